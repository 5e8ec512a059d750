#pragma once

// Second-moment estimation and the thresholded spectral subspace of the
// covariance A = M - r r^T.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mixlearn/core_model.hpp"
#include "mixlearn/errors.hpp"
#include "mixlearn/linalg/sym_eigen.hpp"
#include "mixlearn/sampling.hpp"

namespace mixlearn {

/// M~_ii = freq(i,i), M~_ij = M~_ji = (freq(i,j) + freq(j,i)) / 2.
inline Eigen::MatrixXd empirical_M(const SnapshotBatch& batch, std::size_t n) {
  if (batch.empty()) throw InputError("empirical_M: empty batch");
  if (batch.aperture() != 2) throw InputError("empirical_M: expected 2-snapshots");
  batch.check_domain(n);
  const auto nn = static_cast<Eigen::Index>(n);
  // Integer counts keep the result independent of summation order.
  std::vector<std::uint64_t> counts(n * n, 0);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto row = batch.row(r);
    ++counts[row[0] * n + row[1]];
  }
  Eigen::MatrixXd m(nn, nn);
  const double total = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < n; ++i) {
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
        static_cast<double>(counts[i * n + i]) / total;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = static_cast<double>(counts[i * n + j] + counts[j * n + i]) / (2.0 * total);
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return m;
}

struct SpectralSubspace {
  Eigen::VectorXd rtilde;
  Eigen::VectorXd eigenvalues;   // all eigenvalues of M~ - r~ r~^T, descending
  Eigen::MatrixXd eigenvectors;  // matching columns
  std::size_t kprime = 0;
  Eigen::MatrixXd basis;  // n x kprime, orthonormal columns spanning col(A~)
  double threshold = 0.0;

  /// A~ = sum of retained lambda v v^T.
  [[nodiscard]] Eigen::MatrixXd atilde() const {
    const auto kp = static_cast<Eigen::Index>(kprime);
    const Eigen::MatrixXd v = eigenvectors.leftCols(kp);
    return v * eigenvalues.head(kp).asDiagonal() * v.transpose();
  }
  [[nodiscard]] Eigen::MatrixXd retained_vectors() const {
    return eigenvectors.leftCols(static_cast<Eigen::Index>(kprime));
  }
};

/// Eigendecomposes M~ - r~ r~^T and keeps eigenpairs with lambda >= zeta^2 / 2n,
/// at most max_rank of them. The initial basis is the retained eigenvectors.
inline SpectralSubspace estimate_A(const Eigen::MatrixXd& mtilde, const Eigen::VectorXd& rtilde,
                                   double zeta, linalg::EigenMethod method = linalg::EigenMethod::kAuto,
                                   std::optional<std::size_t> max_rank = std::nullopt) {
  if (mtilde.rows() != mtilde.cols() || mtilde.rows() != rtilde.size()) {
    throw InputError("estimate_A: shape mismatch between M~ and r~");
  }
  const double asym = (mtilde - mtilde.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, mtilde.cwiseAbs().maxCoeff())) {
    throw InputError("estimate_A: M~ is not symmetric");
  }
  SpectralSubspace sub;
  sub.rtilde = rtilde;
  sub.threshold = zeta * zeta / (2.0 * static_cast<double>(rtilde.size()));
  const Eigen::MatrixXd diff = mtilde - rtilde * rtilde.transpose();
  const auto eig = linalg::symmetric_eigen(diff, method);
  sub.eigenvalues = eig.values;
  sub.eigenvectors = eig.vectors;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i)
    if (eig.values(i) >= sub.threshold) ++sub.kprime;
  if (max_rank) sub.kprime = std::min(sub.kprime, *max_rank);
  sub.basis = sub.retained_vectors();
  return sub;
}

/// Uniformly random orthonormal basis of the retained eigenspace.
inline Eigen::MatrixXd random_basis(const SpectralSubspace& sub, RngStream& rng) {
  if (sub.kprime == 0) throw InputError("random_basis: retained subspace is empty");
  const auto kp = static_cast<Eigen::Index>(sub.kprime);
  Eigen::MatrixXd g(kp, kp);
  for (Eigen::Index j = 0; j < kp; ++j)
    for (Eigen::Index i = 0; i < kp; ++i) g(i, j) = rng.normal();
  const Eigen::MatrixXd raw = sub.retained_vectors() * g;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(raw.rows(), kp);
  // Fix column signs so the result is a deterministic function of g.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(kp).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < kp; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// ||Pi_U - Pi_V||_op for matrices with orthonormal columns.
inline double projector_distance(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
  if (u.rows() != v.rows()) throw InputError("projector_distance: ambient dimensions differ");
  const Eigen::MatrixXd d = u * u.transpose() - v * v.transpose();
  return linalg::symmetric_op_norm(d);
}

}  // namespace mixlearn
