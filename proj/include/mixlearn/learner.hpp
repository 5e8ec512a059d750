#pragma once

// Mixture learning pipeline: spectral dimension reduction, 1-D learning along
// random directions of the estimated covariance column space, matching of
// spikes across directions through rotated test directions, and
// reconstruction of constituents.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mixlearn/core_model.hpp"
#include "mixlearn/errors.hpp"
#include "mixlearn/isotropize.hpp"
#include "mixlearn/kspike1d.hpp"
#include "mixlearn/linalg/dense_lp.hpp"
#include "mixlearn/sampling.hpp"
#include "mixlearn/spectral.hpp"

namespace mixlearn {

// ---------------------------------------------------------------------------
// Constants

struct LearnerConstants {
  std::size_t n = 0;
  std::size_t k = 0;
  double w_min = 0.0;
  double zeta = 0.0;
  double omega = 0.0;
  double delta = 0.0;
  double T = 0.0;          // 3 omega k^4
  double H = 0.0;          // 4 / (w_min^2 zeta sqrt n)
  double L = 0.0;          // zeta / (64 omega^1.5 k^4 sqrt n)
  double match_tol = 0.0;  // (sqrt 2 + 1) L / (2 + 5T)
  double delta_bound = 0.0;  // w_min^3 zeta^4 / (2^29 omega^5 k^16)
  bool delta_warning = false;  // delta exceeds delta_bound

  /// delta = 0 selects delta_bound.
  static LearnerConstants make(std::size_t n, std::size_t k, double w_min, double zeta, double omega,
                               double delta) {
    if (n < 1 || k < 1) throw InputError("LearnerConstants: n and k must be positive");
    if (!(omega > 1.0)) throw InputError("LearnerConstants: omega must exceed 1");
    if (!(delta >= 0.0 && delta < 1.0)) throw InputError("LearnerConstants: delta must lie in [0,1)");
    if (!(zeta > 0.0)) throw InputError("LearnerConstants: zeta must be positive");
    if (!(w_min > 0.0 && w_min <= 1.0)) throw InputError("LearnerConstants: w_min must lie in (0,1]");
    LearnerConstants c;
    c.n = n;
    c.k = k;
    c.w_min = w_min;
    c.zeta = zeta;
    c.omega = omega;
    const double kk = static_cast<double>(k);
    const double k4 = kk * kk * kk * kk;
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    c.T = 3.0 * omega * k4;
    c.H = 4.0 / (w_min * w_min * zeta * sqrt_n);
    c.L = zeta / (64.0 * std::pow(omega, 1.5) * k4 * sqrt_n);
    c.match_tol = (std::numbers::sqrt2 + 1.0) * c.L / (2.0 + 5.0 * c.T);
    c.delta_bound = std::pow(w_min, 3) * std::pow(zeta, 4) /
                    (std::ldexp(1.0, 29) * std::pow(omega, 5) * std::pow(kk, 16));
    c.delta = delta > 0.0 ? delta : c.delta_bound;
    c.delta_warning = c.delta > c.delta_bound;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Direction program

namespace detail {

// max v'x over {||x||_inf <= cap, ||x||_2 <= 1}: x_i = sign(v_i) min(cap, t |v_i|)
// with t chosen so that ||x||_2 = 1, or every nonzero coordinate clipped when
// that already fits in the unit ball.
inline Eigen::VectorXd capped_maximizer(const Eigen::VectorXd& v, double cap) {
  const Eigen::Index n = v.size();
  std::vector<double> mags;
  mags.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    if (v(i) != 0.0) mags.push_back(std::fabs(v(i)));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  const double cap2 = cap * cap;
  double t = std::numeric_limits<double>::infinity();
  if (static_cast<double>(mags.size()) * cap2 > 1.0) {
    // With the c largest magnitudes clipped: c cap^2 + t^2 * tail = 1, where
    // tail sums the squares of the remaining magnitudes.
    double tail = 0.0;
    for (double m : mags) tail += m * m;
    for (std::size_t clipped = 0; clipped < mags.size(); ++clipped) {
      const double rest = 1.0 - static_cast<double>(clipped) * cap2;
      const double cand = std::sqrt(rest / tail);
      const bool next_unclipped = cand * mags[clipped] <= cap;
      const bool prev_clipped = clipped == 0 || cand * mags[clipped - 1] >= cap;
      if (next_unclipped && prev_clipped) {
        t = cand;
        break;
      }
      tail -= mags[clipped] * mags[clipped];
    }
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = std::fabs(v(i));
    const double mag = std::isinf(t) ? (m > 0.0 ? cap : 0.0) : std::min(cap, t * m);
    x(i) = v(i) < 0.0 ? -mag : mag;
  }
  return x;
}

}  // namespace detail

struct DirectionProgramResult {
  Eigen::VectorXd a;  // x* / ||x*||_2
  Eigen::VectorXd x;  // x*
  double cap = 0.0;   // ||x*||_inf
  double target = 0.0;  // 1 - 4 delta / zeta^2
};

/// minimize ||x||_inf subject to v'x >= 1 - 4 delta / zeta^2 and ||x||_2 <= 1,
/// by bisection on the cap with the closed-form inner maximization.
inline DirectionProgramResult solve_direction_program(const Eigen::VectorXd& v, double delta, double zeta,
                                                      int iterations = 40) {
  if (std::fabs(v.norm() - 1.0) > 1e-9) throw InputError("solve_direction_program: v must be a unit vector");
  DirectionProgramResult out;
  out.target = 1.0 - 4.0 * delta / (zeta * zeta);
  if (!(out.target > 0.0)) {
    throw InputError("solve_direction_program: 1 - 4 delta / zeta^2 must be positive");
  }
  double lo = 0.0;
  double hi = out.target * v.cwiseAbs().maxCoeff();  // x = target * v is feasible
  Eigen::VectorXd best = out.target * v;
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    Eigen::VectorXd x = detail::capped_maximizer(v, mid);
    if (v.dot(x) >= out.target) {
      hi = mid;
      best = std::move(x);
    } else {
      lo = mid;
    }
  }
  out.x = best;
  out.cap = best.cwiseAbs().maxCoeff();
  out.a = best / best.norm();
  return out;
}

// ---------------------------------------------------------------------------
// l1 projection onto the simplex

/// Cost of argmin_{x in simplex} ||x - p||_1: negative mass plus the gap
/// between the positive mass and 1.
inline double simplex_l1_cost(const Eigen::VectorXd& p) {
  double pos = 0.0;
  double neg = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) (p(i) > 0.0 ? pos : neg) += std::fabs(p(i));
  return neg + std::fabs(pos - 1.0);
}

/// argmin over the simplex of ||x - p||_1: clip negatives, then rescale the
/// positive part to unit mass (uniform when nothing is positive).
inline Eigen::VectorXd simplex_project_l1(const Eigen::VectorXd& p) {
  if (p.size() == 0) throw InputError("simplex_project_l1: empty vector");
  Eigen::VectorXd x = p.cwiseMax(0.0);
  const double pos = x.sum();
  if (pos > 0.0) return x / pos;
  return Eigen::VectorXd::Constant(p.size(), 1.0 / static_cast<double>(p.size()));
}

/// Same problem solved as a dense LP over (x, d) with -d <= x - p <= d.
inline Eigen::VectorXd simplex_project_l1_lp(const Eigen::VectorXd& p, double* cost = nullptr) {
  const auto n = static_cast<std::size_t>(p.size());
  if (n == 0) throw InputError("simplex_project_l1_lp: empty vector");
  linalg::LinearProgram lp;
  lp.objective.assign(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) lp.objective[n + i] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r1(2 * n, 0.0);
    std::vector<double> r2(2 * n, 0.0);
    r1[i] = 1.0;
    r1[n + i] = -1.0;
    r2[i] = -1.0;
    r2[n + i] = -1.0;
    lp.add_row(std::move(r1), linalg::RowSense::kLessEqual, p(static_cast<Eigen::Index>(i)));
    lp.add_row(std::move(r2), linalg::RowSense::kLessEqual, -p(static_cast<Eigen::Index>(i)));
  }
  std::vector<double> sum(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) sum[i] = 1.0;
  lp.add_row(std::move(sum), linalg::RowSense::kEqual, 1.0);
  const auto sol = linalg::solve_lp(lp);
  if (sol.status != linalg::LpStatus::kOptimal) {
    throw NumericalError(std::string("simplex_project_l1_lp: LP ended ") + linalg::to_string(sol.status));
  }
  if (cost) *cost = sol.value;
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i)) = sol.x[i];
  return x;
}

// ---------------------------------------------------------------------------
// Learning along one direction

/// Weighted points on the real line (not restricted to [0,1]).
struct Spikes {
  std::vector<double> weights;
  std::vector<double> locations;
};

enum class ProjectionScale {
  kPaper,    // divide by 2H, H = 4 / (w_min^2 zeta sqrt n)
  kSupNorm,  // divide by 2 ||a||_inf, the tightest scale keeping values in [0,1]
};

inline const char* to_string(ProjectionScale s) {
  return s == ProjectionScale::kPaper ? "paper" : "supnorm";
}

struct DirectionResult {
  Eigen::VectorXd v;
  Eigen::VectorXd a;       // unit vector from the direction program
  double a_dot_v = 0.0;
  double scale = 0.0;      // projection x = a / (2 scale) + 1/2
  Spikes spikes;           // gamma_t = 2 scale (beta_t - 1/2) (a'v)
  KSpikeFit fit;           // the 1-D fit on [0,1]
};

/// Source of 1-D statistics for a projection vector x in [0,1]^n.
///
/// Requirements on Stats:
///   Eigen::VectorXd rtilde();           estimate of r
///   Eigen::MatrixXd mtilde();           estimate of M
///   KSpikeFit fit(const Eigen::VectorXd& x, std::size_t slot, std::uint64_t attempt,
///                 const KSpikeConfig& base);
/// `slot` identifies the direction (basis directions 0..k'-1, test directions
/// k'..2k'-2); `attempt` distinguishes matching retries.

struct LearnerConfig {
  std::size_t k = 1;
  double zeta = 1.0;
  double omega = 2.0;
  double delta = 0.0;  // 0: delta_bound
  double w_min = 0.0;  // 0: use 1/k
  ProjectionScale scale = ProjectionScale::kSupNorm;
  std::optional<double> match_tol;  // overrides (sqrt 2 + 1) L / (2 + 5T)
  std::optional<double> xi;         // overrides the statistics provider's accuracy
  std::optional<double> tau;        // overrides L / (4 scale) as the 1-D separation
  int max_theta_attempts = 8;
  bool cap_rank = true;  // keep at most k-1 eigenpairs, the rank of A
  XiRule xi_rule = XiRule::kStandardError;
  linalg::EigenMethod eigen_method = linalg::EigenMethod::kAuto;

  [[nodiscard]] double effective_w_min() const {
    return w_min > 0.0 ? w_min : 1.0 / static_cast<double>(k);
  }
};

/// 1-D accuracy implied by the sample parameter of Learn: s = varsigma^(4k)
/// and xi = s^(2k).
inline double xi_from_varsigma(double varsigma, std::size_t k) {
  if (!(varsigma > 0.0 && varsigma < 1.0)) throw InputError("xi_from_varsigma: varsigma must lie in (0,1)");
  const double kk = static_cast<double>(k);
  return std::pow(varsigma, 8.0 * kk * kk);
}

template <class Stats>
DirectionResult learn_direction(const Eigen::VectorXd& v, Stats& stats, const LearnerConstants& consts,
                                const LearnerConfig& cfg, std::size_t slot, std::uint64_t attempt = 0) {
  DirectionResult res;
  res.v = v;
  const auto prog = solve_direction_program(v, consts.delta, consts.zeta);
  res.a = prog.a;
  res.a_dot_v = res.a.dot(v);
  const double sup = res.a.cwiseAbs().maxCoeff();
  res.scale = cfg.scale == ProjectionScale::kPaper ? std::max(consts.H, sup) : sup;
  const Eigen::VectorXd x =
      (res.a.array() / (2.0 * res.scale) + 0.5).cwiseMax(0.0).cwiseMin(1.0).matrix();

  KSpikeConfig kcfg;
  kcfg.k = consts.k;
  kcfg.tau = cfg.tau.value_or(consts.L / (4.0 * res.scale));
  kcfg.xi = cfg.xi.value_or(0.0);  // 0 lets the provider choose
  res.fit = stats.fit(x, slot, attempt, kcfg);
  const auto& d = res.fit.distribution;
  res.spikes.weights = d.weights();
  res.spikes.locations.resize(d.k());
  for (std::size_t t = 0; t < d.k(); ++t) {
    res.spikes.locations[t] = 2.0 * res.scale * (d.locations()[t] - 0.5) * res.a_dot_v;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Matching

struct Matching {
  // rho[j][t] = index into the spikes of basis direction j assigned to spike t
  // of the last basis direction.
  std::vector<std::vector<std::size_t>> rho;
  bool valid = false;
  std::string failure;
};

/// For each j < k'-1: rho^j(t2) = t1 iff some test spike t satisfies
/// |alpha^j_t1 cos(theta) + alpha^last_t2 sin(theta) - alphahat^j_t| <= tol.
/// rho^last is the identity. Fails unless every rho^j is a bijection.
inline Matching match_spikes(const std::vector<std::vector<double>>& alpha,
                             const std::vector<std::vector<double>>& alpha_hat, double theta, double tol) {
  Matching out;
  if (alpha.empty()) throw InputError("match_spikes: no directions");
  const std::size_t kp = alpha.size();
  const std::size_t k = alpha.back().size();
  if (alpha_hat.size() + 1 != kp) throw InputError("match_spikes: expected k'-1 test directions");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const auto& last = alpha.back();
  out.rho.assign(kp, std::vector<std::size_t>(k));
  for (std::size_t t = 0; t < k; ++t) out.rho[kp - 1][t] = t;
  for (std::size_t j = 0; j + 1 < kp; ++j) {
    if (alpha[j].size() != k || alpha_hat[j].size() != k) throw InputError("match_spikes: ragged spike sets");
    std::vector<int> assigned(k, -1);
    for (std::size_t t2 = 0; t2 < k; ++t2) {
      for (std::size_t t1 = 0; t1 < k; ++t1) {
        const double pred = alpha[j][t1] * c + last[t2] * s;
        bool hit = false;
        for (double h : alpha_hat[j]) hit = hit || std::fabs(pred - h) <= tol;
        if (!hit) continue;
        if (assigned[t2] != -1) {
          out.failure = "direction " + std::to_string(j) + ": spike " + std::to_string(t2) +
                        " matches several candidates";
          return out;
        }
        assigned[t2] = static_cast<int>(t1);
      }
      if (assigned[t2] == -1) {
        out.failure = "direction " + std::to_string(j) + ": spike " + std::to_string(t2) + " has no match";
        return out;
      }
    }
    std::vector<bool> used(k, false);
    for (std::size_t t2 = 0; t2 < k; ++t2) {
      const auto t1 = static_cast<std::size_t>(assigned[t2]);
      if (used[t1]) {
        out.failure = "direction " + std::to_string(j) + ": assignment is not injective";
        return out;
      }
      used[t1] = true;
      out.rho[j][t2] = t1;
    }
  }
  out.valid = true;
  return out;
}

// ---------------------------------------------------------------------------
// Statistics providers

/// Exact population statistics of a known source: r, M and the NBMs of the
/// projected spike distribution (w, P'x).
class ExactStatistics {
 public:
  explicit ExactStatistics(MixtureSource src, double xi = 1e-12) : src_(std::move(src)), xi_(xi) {}

  Eigen::VectorXd rtilde() { return src_.mean(); }
  Eigen::MatrixXd mtilde() { return src_.second_moment(); }

  KSpikeFit fit(const Eigen::VectorXd& x, std::size_t, std::uint64_t, KSpikeConfig cfg) {
    const Eigen::VectorXd mu = src_.constituents().transpose() * x;
    std::vector<double> locs(mu.data(), mu.data() + mu.size());
    for (double& l : locs) l = std::clamp(l, 0.0, 1.0);
    if (!(cfg.xi > 0.0)) cfg.xi = xi_;
    return learn_kspike_from_nbm(nbm_of(src_.weights(), locs, cfg.k), cfg);
  }

  [[nodiscard]] const MixtureSource& source() const { return src_; }

 private:
  MixtureSource src_;
  double xi_;
};

/// Statistics from snapshot batches of aperture 1, 2 and 2k-1. The high
/// aperture batch is split evenly across `slots` directions.
class SampledStatistics {
 public:
  SampledStatistics(std::size_t n, std::size_t k, SnapshotBatch ones, SnapshotBatch twos, SnapshotBatch hi,
                    RngStream rng, unsigned threads = 1)
      : n_(n), k_(k), ones_(std::move(ones)), twos_(std::move(twos)), hi_(std::move(hi)), rng_(rng),
        threads_(threads) {
    if (hi_.aperture() != 2 * k - 1) {
      throw InputError("SampledStatistics: high-aperture batch must have aperture 2k-1 = " +
                       std::to_string(2 * k - 1));
    }
    if (ones_.empty() || twos_.empty() || hi_.empty()) throw InputError("SampledStatistics: empty batch");
  }

  void set_slots(std::size_t slots) { slots_ = std::max<std::size_t>(1, slots); }
  [[nodiscard]] std::size_t slots() const { return slots_; }
  void set_xi_rule(XiRule rule) { xi_rule_ = rule; }
  [[nodiscard]] XiRule xi_rule() const { return xi_rule_; }

  Eigen::VectorXd rtilde() { return estimate_r(ones_, n_); }
  Eigen::MatrixXd mtilde() { return empirical_M(twos_, n_); }

  KSpikeFit fit(const Eigen::VectorXd& x, std::size_t slot, std::uint64_t attempt, KSpikeConfig cfg) {
    const std::size_t total = hi_.size();
    const std::size_t b = slot * total / slots_;
    const std::size_t e = (slot + 1) * total / slots_;
    if (b >= e) throw InputError("SampledStatistics: too few high-aperture snapshots for the directions");
    const SnapshotBatch part = hi_.slice(b, e);
    const BitBatch bits = project_and_binarize(part, x, rng_.child(slot).child(attempt), threads_);
    const auto hist = bits.ones_histogram();
    if (!(cfg.xi > 0.0)) cfg.xi = sampled_xi(hist, cfg.k, xi_rule_);
    return learn_kspike_from_nbm(empirical_nbm(hist, cfg.k), cfg);
  }

 private:
  std::size_t n_;
  std::size_t k_;
  SnapshotBatch ones_;
  SnapshotBatch twos_;
  SnapshotBatch hi_;
  RngStream rng_;
  unsigned threads_;
  std::size_t slots_ = 1;
  XiRule xi_rule_ = XiRule::kStandardError;
};

// ---------------------------------------------------------------------------
// Full pipeline

/// r + sum_j (coords_j - b_j'r) b_j: the point whose coordinates along the
/// orthonormal columns b_j are `coords` and which agrees with r elsewhere.
inline Eigen::VectorXd reconstruct_point(const Eigen::VectorXd& r, const Eigen::MatrixXd& basis,
                                         const std::vector<double>& coords) {
  if (basis.rows() != r.size() || static_cast<std::size_t>(basis.cols()) != coords.size()) {
    throw InputError("reconstruct_point: shape mismatch");
  }
  Eigen::VectorXd out = r;
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    out += (coords[static_cast<std::size_t>(j)] - basis.col(j).dot(r)) * basis.col(j);
  }
  return out;
}

struct LearnResult {
  MixtureSource model;
  bool degenerate = false;  // k' = 0: every constituent set to r~
  LearnerConstants consts;
  SpectralSubspace subspace;
  Eigen::MatrixXd basis;
  std::vector<DirectionResult> directions;
  std::vector<DirectionResult> test_directions;
  Matching matching;
  double theta = 0.0;
  int theta_attempts = 0;
  std::vector<Eigen::VectorXd> phat;  // reconstructions before simplex projection
};

template <class Stats>
LearnResult learn_mixture(Stats& stats, std::size_t n, const LearnerConfig& cfg, RngStream rng) {
  if (cfg.k < 1) throw InputError("learn_mixture: k must be at least 1");
  LearnResult res;
  res.consts = LearnerConstants::make(n, cfg.k, cfg.effective_w_min(), cfg.zeta, cfg.omega, cfg.delta);
  const std::size_t k = cfg.k;

  // A1: dimension reduction.
  const Eigen::VectorXd r = stats.rtilde();
  if (static_cast<std::size_t>(r.size()) != n) throw InputError("learn_mixture: r~ has the wrong length");
  res.subspace = estimate_A(stats.mtilde(), r, cfg.zeta, cfg.eigen_method,
                            cfg.cap_rank ? std::optional<std::size_t>(k - 1) : std::nullopt);
  const std::size_t kp = res.subspace.kprime;

  if (kp == 0 || k == 1) {
    res.degenerate = kp == 0;
    Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    const Eigen::VectorXd rp = simplex_project_l1(r);
    for (std::size_t t = 0; t < k; ++t) p.col(static_cast<Eigen::Index>(t)) = rp;
    res.model = MixtureSource(std::vector<double>(k, 1.0 / static_cast<double>(k)), std::move(p));
    return res;
  }

  // A2: random basis and 1-D learning along each basis vector.
  RngStream basis_rng = rng.child(0);
  res.basis = random_basis(res.subspace, basis_rng);
  if constexpr (requires(Stats& s) { s.set_slots(std::size_t{1}); }) stats.set_slots(2 * kp - 1);
  if constexpr (requires(Stats& s) { s.set_xi_rule(XiRule::kStandardError); }) stats.set_xi_rule(cfg.xi_rule);
  for (std::size_t j = 0; j < kp; ++j) {
    res.directions.push_back(learn_direction(Eigen::VectorXd(res.basis.col(static_cast<Eigen::Index>(j))), stats,
                                             res.consts, cfg, j));
  }
  std::vector<std::vector<double>> alpha(kp);
  for (std::size_t j = 0; j < kp; ++j) alpha[j] = res.directions[j].spikes.locations;

  // A3: matching through rotated test directions.
  const double tol = cfg.match_tol.value_or(res.consts.match_tol);
  RngStream theta_rng = rng.child(1);
  for (int attempt = 0; attempt < std::max(1, cfg.max_theta_attempts); ++attempt) {
    res.theta_attempts = attempt + 1;
    res.theta = 2.0 * std::numbers::pi * theta_rng.uniform();
    res.test_directions.clear();
    std::vector<std::vector<double>> alpha_hat;
    for (std::size_t j = 0; j + 1 < kp; ++j) {
      const Eigen::VectorXd z = res.basis.col(static_cast<Eigen::Index>(j)) * std::cos(res.theta) +
                                res.basis.col(static_cast<Eigen::Index>(kp - 1)) * std::sin(res.theta);
      res.test_directions.push_back(
          learn_direction(z, stats, res.consts, cfg, kp + j, static_cast<std::uint64_t>(attempt)));
      alpha_hat.push_back(res.test_directions.back().spikes.locations);
    }
    res.matching = match_spikes(alpha, alpha_hat, res.theta, tol);
    if (res.matching.valid) break;
  }
  if (!res.matching.valid) {
    throw MatchingError("learn_mixture: spike matching failed after " + std::to_string(res.theta_attempts) +
                        " attempts (" + res.matching.failure + ")");
  }

  // Reconstruction.
  std::vector<double> w(k, 0.0);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<double> coords(kp);
    for (std::size_t j = 0; j < kp; ++j) {
      const std::size_t idx = res.matching.rho[j][t];
      coords[j] = alpha[j][idx];
      w[t] += res.directions[j].spikes.weights[idx];
    }
    w[t] /= static_cast<double>(kp);
    const Eigen::VectorXd ph = reconstruct_point(r, res.basis, coords);
    res.phat.push_back(ph);
    p.col(static_cast<Eigen::Index>(t)) = simplex_project_l1(ph);
  }
  // Each direction's weights lie on the simplex, so their average does too;
  // renormalize only to remove rounding.
  double wsum = 0.0;
  for (double v : w) wsum += v;
  for (double& v : w) v /= wsum;
  res.model = MixtureSource(std::move(w), std::move(p));
  return res;
}

}  // namespace mixlearn
