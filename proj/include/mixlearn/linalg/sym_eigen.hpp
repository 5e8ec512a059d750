#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mixlearn/errors.hpp"

namespace mixlearn::linalg {

/// Eigenpairs of a real symmetric matrix, eigenvalues in descending order
/// and eigenvectors in the matching columns.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int sweeps = 0;
};

enum class EigenMethod {
  kJacobi,     // cyclic Jacobi rotations
  kTridiagQR,  // Householder tridiagonalization + implicit symmetric QR
  kAuto,       // Jacobi up to kJacobiMaxDim, tridiagonal QR above
};

inline constexpr Eigen::Index kJacobiMaxDim = 200;

namespace detail {

inline void sort_descending(SymmetricEigen& e) {
  const auto n = e.values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return e.values(a) > e.values(b); });
  Eigen::VectorXd vals(n);
  Eigen::MatrixXd vecs(e.vectors.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    vals(i) = e.values(order[static_cast<std::size_t>(i)]);
    vecs.col(i) = e.vectors.col(order[static_cast<std::size_t>(i)]);
  }
  e.values = std::move(vals);
  e.vectors = std::move(vecs);
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition. Sweeps until the off-diagonal Frobenius
/// mass falls to `rel_tol * ||A||_F`.
inline SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& sym, double rel_tol = 1e-12,
                                   int max_sweeps = 100) {
  if (sym.rows() != sym.cols()) throw InputError("jacobi_eigen: matrix is not square");
  const Eigen::Index n = sym.rows();
  Eigen::MatrixXd a = 0.5 * (sym + sym.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double norm = a.norm();
  const double target = rel_tol * norm;

  auto off_norm = [&]() {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  SymmetricEigen out;
  int sweep = 0;
  while (norm > 0.0 && off_norm() > target) {
    if (sweep++ >= max_sweeps) {
      throw NumericalError("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) +
                           " sweeps (off-diagonal " + std::to_string(off_norm()) + ")");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  out.values = a.diagonal();
  out.vectors = std::move(v);
  out.sweeps = sweep;
  detail::sort_descending(out);
  return out;
}

inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& sym,
                                      EigenMethod method = EigenMethod::kAuto,
                                      double rel_tol = 1e-12) {
  if (method == EigenMethod::kAuto) {
    method = sym.rows() <= kJacobiMaxDim ? EigenMethod::kJacobi : EigenMethod::kTridiagQR;
  }
  if (method == EigenMethod::kJacobi) return jacobi_eigen(sym, rel_tol);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (sym + sym.transpose()));
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric_eigen: tridiagonal QR did not converge");
  }
  SymmetricEigen out{solver.eigenvalues(), solver.eigenvectors(), 0};
  detail::sort_descending(out);
  return out;
}

/// Largest absolute eigenvalue, i.e. the operator norm of a symmetric matrix.
inline double symmetric_op_norm(const Eigen::MatrixXd& sym) {
  if (sym.size() == 0) return 0.0;
  const auto e = symmetric_eigen(sym);
  return std::max(std::fabs(e.values(0)), std::fabs(e.values(e.values.size() - 1)));
}

}  // namespace mixlearn::linalg
