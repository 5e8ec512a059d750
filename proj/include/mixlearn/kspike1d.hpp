#pragma once

// One-dimensional k-spike learner. From (2k-1)-bit snapshots it forms
// normalized binomial moments (NBMs), converts them to raw moments with the
// Pascal matrix, finds an approximately annihilating monic polynomial by an
// l1 linear program, takes its roots as spike locations and fits weights by
// simplex-constrained least squares.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mixlearn/core_model.hpp"
#include "mixlearn/errors.hpp"
#include "mixlearn/linalg/dense_lp.hpp"
#include "mixlearn/sampling.hpp"

namespace mixlearn {

// ---------------------------------------------------------------------------
// Binomials and Pascal matrices

__extension__ typedef __int128 int128;

/// C(n, r) in exact 64-bit arithmetic; throws if the value does not fit.
inline std::int64_t binomial(std::int64_t n, std::int64_t r) {
  if (r < 0 || n < 0 || r > n) return 0;
  r = std::min(r, n - r);
  int128 acc = 1;
  for (std::int64_t i = 1; i <= r; ++i) {
    acc = acc * (n - r + i) / i;  // exact: acc holds C(n-r+i, i)
    if (acc > std::numeric_limits<std::int64_t>::max()) {
      throw InputError("binomial: C(" + std::to_string(n) + "," + std::to_string(r) +
                       ") overflows 64 bits");
    }
  }
  return static_cast<std::int64_t>(acc);
}

using IntMatrix = std::vector<std::vector<std::int64_t>>;

/// Lower-triangular Pascal matrix of size b and its integer inverse:
///   pas_ij = C(b-1-j, i-j),  inv_ij = (-1)^(i-j) C(b-1-j, i-j).
struct PascalPair {
  std::size_t b = 0;
  IntMatrix pas;
  IntMatrix inv;

  [[nodiscard]] Eigen::MatrixXd pas_real() const { return to_real(pas); }
  [[nodiscard]] Eigen::MatrixXd inv_real() const { return to_real(inv); }

  /// pas * inv computed in 128-bit integers.
  [[nodiscard]] bool product_is_identity() const {
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        int128 s = 0;
        for (std::size_t l = 0; l < b; ++l) s += static_cast<int128>(pas[i][l]) * inv[l][j];
        if (s != (i == j ? 1 : 0)) return false;
      }
    }
    return true;
  }

  /// ||pas||_F^2 as an exact integer.
  [[nodiscard]] int128 frobenius_squared() const {
    int128 s = 0;
    for (const auto& row : pas)
      for (std::int64_t v : row) s += static_cast<int128>(v) * v;
    return s;
  }

 private:
  static Eigen::MatrixXd to_real(const IntMatrix& m) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = 0; j < m.size(); ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(m[i][j]);
    return out;
  }
};

inline constexpr std::size_t kMaxPascalSize = 60;

inline PascalPair pascal_pair(std::size_t b) {
  if (b < 1) throw InputError("pascal_pair: size must be at least 1");
  if (b > kMaxPascalSize) {
    throw InputError("pascal_pair: size " + std::to_string(b) + " exceeds the supported " +
                     std::to_string(kMaxPascalSize));
  }
  PascalPair p;
  p.b = b;
  p.pas.assign(b, std::vector<std::int64_t>(b, 0));
  p.inv.assign(b, std::vector<std::int64_t>(b, 0));
  const auto bb = static_cast<std::int64_t>(b);
  for (std::int64_t i = 0; i < bb; ++i) {
    for (std::int64_t j = 0; j <= i; ++j) {
      const std::int64_t c = binomial(bb - 1 - j, i - j);
      p.pas[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = c;
      p.inv[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = ((i - j) % 2 == 0) ? c : -c;
    }
  }
  return p;
}

/// sum_{m=0}^{2k-1} C(2m, m), which equals ||Pas||_F^2 for the 2k x 2k matrix.
inline int128 pascal_frobenius_squared_closed_form(std::size_t k) {
  int128 s = 0;
  for (std::size_t m = 0; m < 2 * k; ++m) s += binomial(static_cast<std::int64_t>(2 * m), static_cast<std::int64_t>(m));
  return s;
}

// ---------------------------------------------------------------------------
// Moment vectors

enum class MomentKind { kRaw, kNbm };

struct MomentVector {
  MomentKind kind = MomentKind::kRaw;
  std::vector<double> values;

  [[nodiscard]] std::size_t k() const { return values.size() / 2; }
  [[nodiscard]] double operator[](std::size_t i) const { return values[i]; }
};

/// g_i = sum_j w_j a_j^i for i = 0..count-1.
inline MomentVector moments_of(const std::vector<double>& weights, const std::vector<double>& locations,
                               std::size_t count) {
  MomentVector g{MomentKind::kRaw, std::vector<double>(count, 0.0)};
  for (std::size_t j = 0; j < weights.size(); ++j) {
    long double pw = 1.0L;
    for (std::size_t i = 0; i < count; ++i) {
      g.values[i] += static_cast<double>(weights[j] * pw);
      pw *= locations[j];
    }
  }
  return g;
}

inline MomentVector moments_of(const KSpikeDistribution& d, std::size_t count) {
  return moments_of(d.weights(), d.locations(), count);
}

/// nu_i = sum_j w_j a_j^i (1 - a_j)^(2k-1-i) for i = 0..2k-1.
inline MomentVector nbm_of(const std::vector<double>& weights, const std::vector<double>& locations,
                           std::size_t k) {
  const std::size_t b = 2 * k;
  MomentVector nu{MomentKind::kNbm, std::vector<double>(b, 0.0)};
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const long double a = locations[j];
    for (std::size_t i = 0; i < b; ++i) {
      nu.values[i] += static_cast<double>(weights[j] * std::pow(a, static_cast<int>(i)) *
                                          std::pow(1.0L - a, static_cast<int>(b - 1 - i)));
    }
  }
  return nu;
}

inline MomentVector nbm_of(const KSpikeDistribution& d, std::size_t k) {
  return nbm_of(d.weights(), d.locations(), k);
}
inline MomentVector nbm_of(const KSpikeDistribution& d) { return nbm_of(d, d.k()); }

/// nu~_i = (#rows with exactly i ones) / (N C(2k-1, i)).
inline MomentVector empirical_nbm(const std::vector<std::uint64_t>& ones_histogram, std::size_t k) {
  if (k < 1) throw InputError("empirical_nbm: k must be at least 1");
  if (ones_histogram.size() != 2 * k) {
    throw InputError("empirical_nbm: histogram needs 2k = " + std::to_string(2 * k) + " bins");
  }
  const std::uint64_t total = std::accumulate(ones_histogram.begin(), ones_histogram.end(), std::uint64_t{0});
  if (total == 0) throw InputError("empirical_nbm: no snapshots");
  MomentVector nu{MomentKind::kNbm, std::vector<double>(2 * k)};
  for (std::size_t i = 0; i < 2 * k; ++i) {
    nu.values[i] = static_cast<double>(ones_histogram[i]) /
                   (static_cast<double>(total) *
                    static_cast<double>(binomial(static_cast<std::int64_t>(2 * k - 1), static_cast<std::int64_t>(i))));
  }
  return nu;
}

inline MomentVector empirical_nbm(const BitBatch& bits, std::size_t k) {
  if (bits.empty()) throw InputError("empirical_nbm: no snapshots");
  if (bits.aperture() != 2 * k - 1) {
    throw InputError("empirical_nbm: snapshots have aperture " + std::to_string(bits.aperture()) +
                     ", expected " + std::to_string(2 * k - 1));
  }
  return empirical_nbm(bits.ones_histogram(), k);
}

/// g = nu Pas (row-vector convention).
inline MomentVector nbm_to_moments(const MomentVector& nu) {
  if (nu.kind != MomentKind::kNbm) throw InputError("nbm_to_moments: expected an NBM vector");
  const std::size_t b = nu.values.size();
  if (b == 0 || b % 2 != 0) throw InputError("nbm_to_moments: length must be a positive even number");
  const PascalPair p = pascal_pair(b);
  MomentVector g{MomentKind::kRaw, std::vector<double>(b, 0.0)};
  for (std::size_t j = 0; j < b; ++j) {
    long double s = 0.0L;
    for (std::size_t i = j; i < b; ++i) s += static_cast<long double>(nu.values[i]) * p.pas[i][j];
    g.values[j] = static_cast<double>(s);
  }
  return g;
}

/// Conservative accuracy of raw moments estimated from a histogram: one
/// standard error of nu~ in l2, lifted through ||Pas||_F.
inline double moment_error_bound(const std::vector<std::uint64_t>& ones_histogram, std::size_t k) {
  const std::uint64_t total = std::accumulate(ones_histogram.begin(), ones_histogram.end(), std::uint64_t{0});
  if (total == 0) throw InputError("moment_error_bound: no snapshots");
  const double nn = static_cast<double>(total);
  double var = 0.0;
  for (std::size_t i = 0; i < ones_histogram.size(); ++i) {
    const double q = static_cast<double>(ones_histogram[i]) / nn;
    const double c = static_cast<double>(binomial(static_cast<std::int64_t>(2 * k - 1), static_cast<std::int64_t>(i)));
    var += q * (1.0 - q) / (nn * c * c);
  }
  const double frob = std::sqrt(static_cast<double>(pascal_frobenius_squared_closed_form(k)));
  // Floor keeps the program strictly feasible when every bin is empty but one.
  return frob * std::sqrt(std::max(var, 1.0 / (nn * nn)));
}

/// Root-mean-square error of g~ = nu~ Pas under the multinomial model of the
/// histogram, with the bin frequencies plugged in for the unknown masses.
inline double moment_standard_error(const std::vector<std::uint64_t>& ones_histogram, std::size_t k) {
  const std::uint64_t total = std::accumulate(ones_histogram.begin(), ones_histogram.end(), std::uint64_t{0});
  if (total == 0) throw InputError("moment_standard_error: no snapshots");
  const std::size_t b = 2 * k;
  if (ones_histogram.size() != b) throw InputError("moment_standard_error: histogram must have 2k bins");
  const double nn = static_cast<double>(total);
  const PascalPair p = pascal_pair(b);
  double var = 0.0;
  for (std::size_t l = 0; l < b; ++l) {
    // g~_l = sum_i q_i c_il with c_il = Pas_il / C(2k-1, i).
    double first = 0.0;
    double second = 0.0;
    for (std::size_t i = l; i < b; ++i) {
      const double q = static_cast<double>(ones_histogram[i]) / nn;
      const double c = static_cast<double>(p.pas[i][l]) /
                       static_cast<double>(binomial(static_cast<std::int64_t>(b - 1), static_cast<std::int64_t>(i)));
      first += q * c;
      second += q * c * c;
    }
    var += std::max(0.0, second - first * first) / nn;
  }
  return std::sqrt(std::max(var, 1.0 / (nn * nn)));
}

/// How a sampled 1-D fit picks xi from its own histogram.
enum class XiRule {
  kStandardError,  // moment_standard_error
  kPascalBound,    // moment_error_bound
};

inline const char* to_string(XiRule r) {
  return r == XiRule::kStandardError ? "standard-error" : "pascal-bound";
}

inline double sampled_xi(const std::vector<std::uint64_t>& ones_histogram, std::size_t k, XiRule rule) {
  return rule == XiRule::kStandardError ? moment_standard_error(ones_histogram, k)
                                        : moment_error_bound(ones_histogram, k);
}

// ---------------------------------------------------------------------------
// Configuration

struct KSpikeConfig {
  std::size_t k = 1;
  double tau = 1.0;  // minimum spike separation
  double xi = 1e-12;  // accuracy of the raw moment vector

  /// Root tolerance (4 / tau) (2 k xi)^(1/k).
  [[nodiscard]] double eps_root() const {
    return 4.0 / tau * std::pow(2.0 * static_cast<double>(k) * xi, 1.0 / static_cast<double>(k));
  }
  /// Whether xi <= tau^(2k), the regime covered by the recovery guarantee.
  [[nodiscard]] bool xi_within_bound() const {
    return xi <= std::pow(tau, 2.0 * static_cast<double>(k));
  }
  void validate() const {
    if (k < 1) throw InputError("KSpikeConfig: k must be at least 1");
    if (!(tau > 0.0)) throw InputError("KSpikeConfig: tau must be positive");
    if (!(xi > 0.0) || !std::isfinite(xi)) throw InputError("KSpikeConfig: xi must be positive and finite");
  }
};

// ---------------------------------------------------------------------------
// Step 1: annihilating polynomial

struct LambdaSolution {
  std::vector<double> lambda;  // coefficients lambda_0..lambda_k, lambda_k = 1
  double l1_norm = 0.0;
  double residual_l1 = 0.0;    // ||G(g) lambda||_1
  double slack = 0.0;          // 2^k k xi
  std::size_t pivots = 0;
};

/// G_ij = g_{i+j}, i = 0..k-1, j = 0..k.
inline Eigen::MatrixXd hankel_G(const MomentVector& g, std::size_t k) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k + 1));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j <= k; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g.values[i + j];
  return m;
}

/// minimize ||x||_1 subject to ||G(g) x||_1 <= 2^k k xi and x_k = 1.
///
/// LP variables: x+_j, x-_j (j < k) and row slacks u_i, all nonnegative.
inline LambdaSolution solve_lambda(const MomentVector& g, double xi, std::size_t k) {
  if (g.kind != MomentKind::kRaw) throw InputError("solve_lambda: expected raw moments");
  if (k < 1 || g.values.size() != 2 * k) {
    throw InputError("solve_lambda: expected " + std::to_string(2 * k) + " moments");
  }
  if (!(xi >= 0.0)) throw InputError("solve_lambda: xi must be nonnegative");
  const Eigen::MatrixXd G = hankel_G(g, k);
  const std::size_t nv = 3 * k;
  auto xp = [](std::size_t j) { return j; };
  auto xm = [k](std::size_t j) { return k + j; };
  auto u = [k](std::size_t i) { return 2 * k + i; };

  linalg::LinearProgram lp;
  lp.objective.assign(nv, 0.0);
  for (std::size_t j = 0; j < k; ++j) lp.objective[xp(j)] = lp.objective[xm(j)] = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double gik = G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    std::vector<double> up(nv, 0.0);
    std::vector<double> lo(nv, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      const double gij = G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      up[xp(j)] = gij;
      up[xm(j)] = -gij;
      lo[xp(j)] = -gij;
      lo[xm(j)] = gij;
    }
    up[u(i)] = -1.0;
    lo[u(i)] = -1.0;
    lp.add_row(std::move(up), linalg::RowSense::kLessEqual, -gik);
    lp.add_row(std::move(lo), linalg::RowSense::kLessEqual, gik);
  }
  const double slack = std::ldexp(static_cast<double>(k) * xi, static_cast<int>(k));
  std::vector<double> budget(nv, 0.0);
  for (std::size_t i = 0; i < k; ++i) budget[u(i)] = 1.0;
  lp.add_row(std::move(budget), linalg::RowSense::kLessEqual, slack);

  const auto sol = linalg::solve_lp(lp);
  if (sol.status != linalg::LpStatus::kOptimal) {
    // Always feasible: k equations in k+1 unknowns with x_k pinned.
    throw NumericalError(std::string("solve_lambda: LP ended ") + linalg::to_string(sol.status));
  }
  LambdaSolution out;
  out.lambda.assign(k + 1, 0.0);
  for (std::size_t j = 0; j < k; ++j) out.lambda[j] = sol.x[xp(j)] - sol.x[xm(j)];
  out.lambda[k] = 1.0;
  for (double v : out.lambda) out.l1_norm += std::fabs(v);
  const Eigen::VectorXd lam = Eigen::Map<const Eigen::VectorXd>(out.lambda.data(), static_cast<Eigen::Index>(k + 1));
  out.residual_l1 = (G * lam).lpNorm<1>();
  out.slack = slack;
  out.pivots = sol.pivots;
  return out;
}

// ---------------------------------------------------------------------------
// Step 2: roots

struct RootSet {
  std::vector<std::complex<double>> raw;  // polished complex roots
  std::vector<double> clamped;            // max(0, min(Re, 1))
  double max_abs_residual = 0.0;          // max |P(root)|
  double eps_root = 0.0;
  int newton_steps = 0;
};

namespace detail {

// Parlett-Reinsch balancing by powers of two (exact in floating point).
inline void balance(Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  constexpr double radix = 2.0;
  bool done = false;
  for (int sweep = 0; !done && sweep < 100; ++sweep) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0;
      double r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::fabs(a(j, i));
        r += std::fabs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      double g = r / radix;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

template <class T>
std::complex<T> horner(const std::vector<double>& coeffs, std::complex<T> z, std::complex<T>* deriv) {
  std::complex<T> p = static_cast<T>(coeffs.back());
  std::complex<T> dp = 0;
  for (std::size_t i = coeffs.size() - 1; i-- > 0;) {
    dp = dp * z + p;
    p = p * z + static_cast<T>(coeffs[i]);
  }
  if (deriv) *deriv = dp;
  return p;
}

}  // namespace detail

/// Roots of the monic polynomial sum_l lambda_l x^l via eigenvalues of the
/// balanced companion matrix, refined by Newton steps in extended precision.
inline RootSet polynomial_roots(const std::vector<double>& lambda, double eps_root) {
  if (lambda.size() < 2) throw InputError("polynomial_roots: degree must be at least 1");
  if (std::fabs(lambda.back() - 1.0) > 1e-12) throw InputError("polynomial_roots: polynomial must be monic");
  const std::size_t k = lambda.size() - 1;
  RootSet out;
  out.eps_root = eps_root;

  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 1; i < k; ++i) comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  for (std::size_t i = 0; i < k; ++i) comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k - 1)) = -lambda[i];
  detail::balance(comp);
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("polynomial_roots: companion eigenvalue iteration did not converge (degree " +
                         std::to_string(k) + ")");
  }
  using LD = long double;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    std::complex<LD> z(es.eigenvalues()(i).real(), es.eigenvalues()(i).imag());
    std::complex<LD> dp;
    LD best = std::abs(detail::horner<LD>(lambda, z, &dp));
    for (int it = 0; it < 60 && best > 0.0L; ++it) {
      if (std::abs(dp) == 0.0L) break;
      const std::complex<LD> next = z - detail::horner<LD>(lambda, z, nullptr) / dp;
      std::complex<LD> ndp;
      const LD val = std::abs(detail::horner<LD>(lambda, next, &ndp));
      if (!(val < best)) break;
      z = next;
      dp = ndp;
      best = val;
      ++out.newton_steps;
    }
    out.raw.emplace_back(static_cast<double>(z.real()), static_cast<double>(z.imag()));
    out.max_abs_residual = std::max(out.max_abs_residual, static_cast<double>(best));
  }
  std::sort(out.raw.begin(), out.raw.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  for (const auto& z : out.raw) out.clamped.push_back(std::clamp(z.real(), 0.0, 1.0));
  return out;
}

// ---------------------------------------------------------------------------
// Step 3: weights

/// Euclidean projection onto the probability simplex (sort and threshold).
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> s(v.data(), v.data() + n);
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cum += s[static_cast<std::size_t>(i)];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[static_cast<std::size_t>(i)] - t > 0.0) theta = t;
  }
  Eigen::VectorXd out = (v.array() - theta).max(0.0);
  const double total = out.sum();
  if (total > 0.0) out /= total;
  return out;
}

struct WeightSolution {
  std::vector<double> weights;
  double objective = 0.0;  // ||y V(alpha) - g||_2^2
  std::size_t iterations = 0;
  bool polished = false;   // active-set refinement improved the iterate
};

/// V_ij = alpha_i^j, an l x b matrix.
inline Eigen::MatrixXd vandermonde(const std::vector<double>& alpha, std::size_t b) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(alpha.size()), static_cast<Eigen::Index>(b));
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    double p = 1.0;
    for (std::size_t j = 0; j < b; ++j) {
      v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p;
      p *= alpha[i];
    }
  }
  return v;
}

struct WeightOptions {
  std::size_t max_iterations = 100000;
  double improvement_tol = 1e-12;
  std::size_t patience = 100;  // consecutive iterations below improvement_tol before stopping
};

/// argmin over the simplex of ||y V(alpha) - g||_2^2: accelerated projected
/// gradient with adaptive restart, then an equality-constrained solve on the
/// detected support, kept only when it is feasible and no worse.
inline WeightSolution solve_weights(const std::vector<double>& alpha, const MomentVector& g,
                                    const WeightOptions& opt = {}) {
  const std::size_t k = alpha.size();
  if (k == 0) throw InputError("solve_weights: no spike locations");
  if (g.values.size() < k) throw InputError("solve_weights: too few moments");
  const Eigen::MatrixXd V = vandermonde(alpha, g.values.size());
  const Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.values.data(), static_cast<Eigen::Index>(g.values.size()));
  const Eigen::MatrixXd Q = V * V.transpose();
  const Eigen::VectorXd c = V * gv;
  // Residual form avoids the cancellation of y'Qy - 2c'y + g'g near the optimum.
  auto objective = [&](const Eigen::VectorXd& y) { return (V.transpose() * y - gv).squaredNorm(); };

  WeightSolution out;
  if (k == 1) {
    out.weights = {1.0};
    out.objective = objective(Eigen::VectorXd::Ones(1));
    return out;
  }

  const double lip = 2.0 * std::max(Q.eigenvalues().real().maxCoeff(), 1e-300);
  const double step = 1.0 / lip;
  Eigen::VectorXd y = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
  Eigen::VectorXd z = y;
  double t = 1.0;
  double f = objective(y);
  double best = f;
  Eigen::VectorXd best_y = y;
  std::size_t quiet = 0;
  for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
    const Eigen::VectorXd grad = 2.0 * (Q * z - c);
    const Eigen::VectorXd ynext = project_to_simplex(z - step * grad);
    const double fnext = objective(ynext);
    if (fnext > f) {
      // Restart momentum from the current iterate.
      t = 1.0;
      z = y;
      if (++quiet >= opt.patience) break;
      continue;
    }
    const double tnext = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = ynext + ((t - 1.0) / tnext) * (ynext - y);
    y = ynext;
    t = tnext;
    f = fnext;
    if (best - f < opt.improvement_tol) {
      if (++quiet >= opt.patience) break;
    } else {
      quiet = 0;
    }
    if (f < best) {
      best = f;
      best_y = y;
    }
  }

  // Equality-constrained least squares on the support.
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < best_y.size(); ++i)
    if (best_y(i) > 1e-10) support.push_back(i);
  const auto s = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
  Eigen::VectorXd rhs(s + 1);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) kkt(a, b) = 2.0 * Q(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
    kkt(a, s) = kkt(s, a) = 1.0;
    rhs(a) = 2.0 * c(support[static_cast<std::size_t>(a)]);
  }
  rhs(s) = 1.0;
  const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  Eigen::VectorXd cand = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  bool feasible = sol.allFinite();
  for (Eigen::Index a = 0; a < s && feasible; ++a) {
    if (sol(a) < -1e-14) feasible = false;
    cand(support[static_cast<std::size_t>(a)]) = std::max(0.0, sol(a));
  }
  Eigen::VectorXd chosen = best_y;
  if (feasible && cand.sum() > 0.0) {
    cand /= cand.sum();
    if (objective(cand) <= objective(best_y)) {
      chosen = cand;
      out.polished = true;
    }
  }
  out.weights.assign(chosen.data(), chosen.data() + chosen.size());
  out.objective = objective(chosen);
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct KSpikeFit {
  KSpikeDistribution distribution;
  MomentVector nu;
  MomentVector g;
  LambdaSolution lambda;
  RootSet roots;
  WeightSolution weights;
  double fit_residual = 0.0;  // ||theta~ V(alpha~) - g~||_2
  bool xi_within_bound = true;
};

/// Raw-moment mass g~_0 further than this from 1 marks the statistics corrupt.
inline constexpr double kMaxMassDefect = 0.1;

inline KSpikeFit learn_kspike_from_nbm(const MomentVector& nu, const KSpikeConfig& cfg) {
  cfg.validate();
  if (nu.values.size() != 2 * cfg.k) {
    throw InputError("learn_kspike: NBM vector has " + std::to_string(nu.values.size()) +
                     " entries, expected " + std::to_string(2 * cfg.k));
  }
  KSpikeFit fit;
  fit.nu = nu;
  fit.g = nbm_to_moments(nu);
  if (std::fabs(fit.g.values[0] - 1.0) > kMaxMassDefect) {
    throw InputError("learn_kspike: zeroth moment " + std::to_string(fit.g.values[0]) +
                     " is far from 1; statistics look corrupt");
  }
  fit.xi_within_bound = cfg.xi_within_bound();
  fit.lambda = solve_lambda(fit.g, cfg.xi, cfg.k);
  fit.roots = polynomial_roots(fit.lambda.lambda, cfg.eps_root());
  fit.weights = solve_weights(fit.roots.clamped, fit.g);
  fit.fit_residual = std::sqrt(fit.weights.objective);
  fit.distribution = KSpikeDistribution(fit.weights.weights, fit.roots.clamped);
  return fit;
}

inline KSpikeFit learn_kspike(const BitBatch& bits, const KSpikeConfig& cfg) {
  cfg.validate();
  return learn_kspike_from_nbm(empirical_nbm(bits, cfg.k), cfg);
}

}  // namespace mixlearn
