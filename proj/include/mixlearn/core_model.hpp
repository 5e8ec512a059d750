#pragma once

// Mixture sources over [n], k-spike distributions on [0,1], width/isotropy
// diagnostics and transportation distances between weighted point sets.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mixlearn/errors.hpp"
#include "mixlearn/linalg/dense_lp.hpp"
#include "mixlearn/linalg/sym_eigen.hpp"

namespace mixlearn {

inline constexpr double kSimplexTol = 1e-12;

namespace detail {

inline void check_probability_vector(const double* p, std::size_t len, double tol,
                                     const std::string& what) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < len; ++i) {
    if (!(p[i] >= 0.0) || !std::isfinite(p[i])) {
      throw InputError(what + ": entry " + std::to_string(i) + " is negative or not finite");
    }
    sum += p[i];
  }
  if (std::fabs(static_cast<double>(sum) - 1.0) > tol) {
    throw InputError(what + ": entries sum to " + std::to_string(static_cast<double>(sum)) +
                     ", expected 1");
  }
}

}  // namespace detail

/// A k-mixture source (w, P) on [n]: weights w on the simplex plus k
/// probability vectors p^1..p^k stored as the columns of an n x k matrix.
class MixtureSource {
 public:
  MixtureSource() = default;

  MixtureSource(std::vector<double> weights, Eigen::MatrixXd constituents)
      : weights_(std::move(weights)), p_(std::move(constituents)) {
    if (weights_.empty()) throw InputError("MixtureSource: k must be at least 1");
    if (static_cast<Eigen::Index>(weights_.size()) != p_.cols()) {
      throw InputError("MixtureSource: " + std::to_string(weights_.size()) + " weights but " +
                       std::to_string(p_.cols()) + " constituents");
    }
    if (p_.rows() < 1) throw InputError("MixtureSource: n must be at least 1");
    detail::check_probability_vector(weights_.data(), weights_.size(), kSimplexTol,
                                     "MixtureSource weights");
    for (Eigen::Index t = 0; t < p_.cols(); ++t) {
      detail::check_probability_vector(p_.col(t).data(), static_cast<std::size_t>(p_.rows()),
                                       kSimplexTol,
                                       "MixtureSource constituent " + std::to_string(t));
    }
  }

  MixtureSource(std::vector<double> weights, const std::vector<std::vector<double>>& constituents)
      : MixtureSource(std::move(weights), to_matrix(constituents)) {}

  [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(p_.rows()); }
  [[nodiscard]] std::size_t k() const { return weights_.size(); }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] double weight(std::size_t t) const { return weights_[t]; }
  [[nodiscard]] const Eigen::MatrixXd& constituents() const { return p_; }
  [[nodiscard]] Eigen::VectorXd constituent(std::size_t t) const {
    return p_.col(static_cast<Eigen::Index>(t));
  }
  [[nodiscard]] double w_min() const { return *std::min_element(weights_.begin(), weights_.end()); }

  /// r = sum_t w_t p^t, the 1-snapshot distribution.
  [[nodiscard]] Eigen::VectorXd mean() const {
    return p_ * Eigen::Map<const Eigen::VectorXd>(weights_.data(),
                                                  static_cast<Eigen::Index>(weights_.size()));
  }

  /// M = sum_t w_t p^t p^t^T, the 2-snapshot distribution.
  [[nodiscard]] Eigen::MatrixXd second_moment() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p_.rows(), p_.rows());
    for (std::size_t t = 0; t < k(); ++t) {
      const auto col = p_.col(static_cast<Eigen::Index>(t));
      m.noalias() += weights_[t] * col * col.transpose();
    }
    return m;
  }

  /// A = sum_t w_t (p^t - r)(p^t - r)^T.
  [[nodiscard]] Eigen::MatrixXd covariance() const {
    const Eigen::VectorXd r = mean();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p_.rows(), p_.rows());
    for (std::size_t t = 0; t < k(); ++t) {
      const Eigen::VectorXd d = p_.col(static_cast<Eigen::Index>(t)) - r;
      a.noalias() += weights_[t] * d * d.transpose();
    }
    return a;
  }

  friend bool operator==(const MixtureSource& a, const MixtureSource& b) {
    return a.weights_ == b.weights_ && a.p_.rows() == b.p_.rows() && a.p_.cols() == b.p_.cols() &&
           a.p_ == b.p_;
  }

 private:
  static Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& cols) {
    if (cols.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(cols.front().size()),
                      static_cast<Eigen::Index>(cols.size()));
    for (std::size_t t = 0; t < cols.size(); ++t) {
      if (cols[t].size() != cols.front().size()) {
        throw InputError("MixtureSource: constituents have different lengths");
      }
      for (std::size_t i = 0; i < cols[t].size(); ++i) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = cols[t][i];
      }
    }
    return m;
  }

  std::vector<double> weights_;
  Eigen::MatrixXd p_;
};

/// k weighted point masses on [0,1].
class KSpikeDistribution {
 public:
  KSpikeDistribution() = default;

  KSpikeDistribution(std::vector<double> weights, std::vector<double> locations)
      : weights_(std::move(weights)), locations_(std::move(locations)) {
    if (weights_.empty()) throw InputError("KSpikeDistribution: needs at least one spike");
    if (weights_.size() != locations_.size()) {
      throw InputError("KSpikeDistribution: weights and locations differ in length");
    }
    detail::check_probability_vector(weights_.data(), weights_.size(), kSimplexTol,
                                     "KSpikeDistribution weights");
    for (double a : locations_) {
      if (!(a >= 0.0 && a <= 1.0)) {
        throw InputError("KSpikeDistribution: location " + std::to_string(a) +
                         " outside [0,1]");
      }
    }
  }

  [[nodiscard]] std::size_t k() const { return weights_.size(); }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<double>& locations() const { return locations_; }

  /// Smallest gap between two spike locations (infinity for a single spike).
  [[nodiscard]] double separation() const {
    double s = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k(); ++i)
      for (std::size_t j = i + 1; j < k(); ++j)
        s = std::min(s, std::fabs(locations_[i] - locations_[j]));
    return s;
  }

  friend bool operator==(const KSpikeDistribution& a, const KSpikeDistribution& b) {
    return a.weights_ == b.weights_ && a.locations_ == b.locations_;
  }

 private:
  std::vector<double> weights_;
  std::vector<double> locations_;
};

struct WidthReport {
  double zeta1 = 0.0;  // sqrt(n) * min_{s != t} ||p^s - p^t||_2 (infinite when k = 1)
  double zeta2 = 0.0;  // sqrt(lambda_min_nonzero(A) / ||r||_inf), 0 when A = 0
  double zeta = 0.0;   // min(zeta1, zeta2)
  bool isotropic = false;  // 1/(2n) <= r_i <= 2/n for every item
  std::size_t kprime = 0;  // rank of A at the caller's threshold
  Eigen::VectorXd a_eigenvalues;  // descending
  Eigen::VectorXd r;
};

/// Width, rank and isotropy diagnostics for a source. Eigenvalues of A at or
/// above `rank_threshold` count toward its rank.
inline WidthReport width_report(const MixtureSource& src, double rank_threshold = 1e-12) {
  WidthReport rep;
  const auto n = static_cast<double>(src.n());
  rep.r = src.mean();

  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < src.k(); ++s)
    for (std::size_t t = s + 1; t < src.k(); ++t)
      min_dist = std::min(min_dist, (src.constituent(s) - src.constituent(t)).norm());
  rep.zeta1 = std::sqrt(n) * min_dist;

  const auto eig = linalg::symmetric_eigen(src.covariance());
  rep.a_eigenvalues = eig.values;
  double smallest_kept = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) >= rank_threshold) {
      ++rep.kprime;
      smallest_kept = eig.values(i);
    }
  }
  const double r_inf = rep.r.cwiseAbs().maxCoeff();
  rep.zeta2 = rep.kprime == 0 ? 0.0 : std::sqrt(smallest_kept / r_inf);
  rep.zeta = std::min(rep.zeta1, rep.zeta2);
  rep.isotropic = (rep.r.array() >= 1.0 / (2.0 * n)).all() && (rep.r.array() <= 2.0 / n).all();
  return rep;
}

struct TransportPlan {
  double cost = 0.0;
  Eigen::MatrixXd flow;  // k x l, rows sum to the first weights, columns to the second
};

/// Optimal transport between weight vectors `wa` (k) and `wb` (l) under the
/// ground cost matrix `cost` (k x l).
inline TransportPlan transport_distance(const std::vector<double>& wa, const std::vector<double>& wb,
                                        const Eigen::MatrixXd& cost) {
  const std::size_t k = wa.size();
  const std::size_t l = wb.size();
  if (k == 0 || l == 0) throw InputError("transport_distance: empty weight vector");
  if (cost.rows() != static_cast<Eigen::Index>(k) || cost.cols() != static_cast<Eigen::Index>(l)) {
    throw InputError("transport_distance: cost matrix shape does not match weights");
  }
  detail::check_probability_vector(wa.data(), k, 1e-9, "transport_distance first weights");
  detail::check_probability_vector(wb.data(), l, 1e-9, "transport_distance second weights");
  if ((cost.array() < 0.0).any()) throw InputError("transport_distance: negative ground cost");

  linalg::LinearProgram lp;
  lp.objective.resize(k * l);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < l; ++j)
      lp.objective[i * l + j] = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> row(k * l, 0.0);
    for (std::size_t j = 0; j < l; ++j) row[i * l + j] = 1.0;
    lp.add_row(std::move(row), linalg::RowSense::kEqual, wa[i]);
  }
  for (std::size_t j = 0; j < l; ++j) {
    std::vector<double> row(k * l, 0.0);
    for (std::size_t i = 0; i < k; ++i) row[i * l + j] = 1.0;
    lp.add_row(std::move(row), linalg::RowSense::kEqual, wb[j]);
  }
  const auto sol = linalg::solve_lp(lp);
  if (sol.status != linalg::LpStatus::kOptimal) {
    throw NumericalError(std::string("transport_distance: LP ended ") + linalg::to_string(sol.status));
  }
  TransportPlan plan;
  plan.cost = sol.value;
  plan.flow.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < l; ++j)
      plan.flow(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sol.x[i * l + j];
  return plan;
}

/// Transport distance between spike sets under |alpha_i - beta_j|.
inline double spike_transport(const std::vector<double>& wa, const std::vector<double>& la,
                              const std::vector<double>& wb, const std::vector<double>& lb) {
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(la.size()), static_cast<Eigen::Index>(lb.size()));
  for (std::size_t i = 0; i < la.size(); ++i)
    for (std::size_t j = 0; j < lb.size(); ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::fabs(la[i] - lb[j]);
  return transport_distance(wa, wb, cost).cost;
}

inline double spike_transport(const KSpikeDistribution& a, const KSpikeDistribution& b) {
  return spike_transport(a.weights(), a.locations(), b.weights(), b.locations());
}

/// Transport distance between mixtures under total variation 1/2 ||p - q||_1.
inline TransportPlan mixture_transport(const MixtureSource& a, const MixtureSource& b) {
  if (a.n() != b.n()) throw InputError("mixture_transport: sources live on different domains");
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(a.k()), static_cast<Eigen::Index>(b.k()));
  for (std::size_t i = 0; i < a.k(); ++i)
    for (std::size_t j = 0; j < b.k(); ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          0.5 * (a.constituent(i) - b.constituent(j)).lpNorm<1>();
  return transport_distance(a.weights(), b.weights(), cost);
}

}  // namespace mixlearn
