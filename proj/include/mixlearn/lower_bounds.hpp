#pragma once

// Moment-matched pairs of k-spike distributions and the total variation
// between their b-snapshot distributions on {0,1}^b.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mixlearn/core_model.hpp"
#include "mixlearn/errors.hpp"
#include "mixlearn/kspike1d.hpp"
#include "mixlearn/linalg/dense_lp.hpp"

namespace mixlearn {

struct HardPair {
  std::size_t k = 0;
  std::size_t b = 0;
  double rho = 0.0;
  KSpikeDistribution first;   // (y, alpha), alpha_i = eps 2(i-1)/(2k-1)
  KSpikeDistribution second;  // (z, beta),  beta_i = eps (2i-1)/(2k-1)
  double lp_value = 0.0;
  double bound = 0.0;               // 4 * 3^b / rho^(2k-1)
  double max_low_moment_gap = 0.0;  // max over l <= 2k-2 of |g_l(y,alpha) - g_l(z,beta)|
};

/// Solves the moment-matching LP
///   minimize sum_{l=2k-1}^{b} C(b,l) 2^l lambda_l
///   s.t. sum_i z_i beta_i^l - y_i alpha_i^l = 0           for l = 0..2k-2
///        |sum_i z_i beta_i^l - y_i alpha_i^l| <= lambda_l for l = 2k-1..b
///        sum_i y_i = 1, y, z >= 0.
inline HardPair hard_pair(std::size_t k, std::size_t b, double rho) {
  if (k < 1) throw InputError("hard_pair: k must be at least 1");
  if (b < 2 * k - 1) throw InputError("hard_pair: b must be at least 2k-1");
  if (!(rho >= 2.0)) throw InputError("hard_pair: rho must be at least 2");
  if (b > kMaxPascalSize) throw InputError("hard_pair: b too large");
  const double eps = 1.0 / rho;
  const double denom = static_cast<double>(2 * k - 1);
  std::vector<double> alpha(k);
  std::vector<double> beta(k);
  for (std::size_t i = 0; i < k; ++i) {
    alpha[i] = eps * 2.0 * static_cast<double>(i) / denom;
    beta[i] = eps * (2.0 * static_cast<double>(i) + 1.0) / denom;
  }

  const std::size_t nl = b - (2 * k - 1) + 1;
  const std::size_t nv = 2 * k + nl;
  auto yv = [](std::size_t i) { return i; };
  auto zv = [k](std::size_t i) { return k + i; };
  auto lv = [k](std::size_t l) { return 2 * k + (l - (2 * k - 1)); };

  // Row l is divided by its largest coefficient s_l and lambda_l = s_l mu_l,
  // so every entry is O(1) however small beta^b gets.
  std::vector<double> row_scale(b + 1);
  for (std::size_t l = 0; l <= b; ++l) row_scale[l] = std::pow(beta[k - 1], static_cast<double>(l));

  linalg::LinearProgram lp;
  lp.objective.assign(nv, 0.0);
  for (std::size_t l = 2 * k - 1; l <= b; ++l) {
    lp.objective[lv(l)] = std::ldexp(static_cast<double>(binomial(static_cast<std::int64_t>(b), static_cast<std::int64_t>(l))),
                                     static_cast<int>(l)) *
                          row_scale[l];
  }
  for (std::size_t l = 0; l <= b; ++l) {
    std::vector<double> diff(nv, 0.0);  // (sum z beta^l - y alpha^l) / s_l
    for (std::size_t i = 0; i < k; ++i) {
      diff[zv(i)] = std::pow(beta[i], static_cast<double>(l)) / row_scale[l];
      diff[yv(i)] = -std::pow(alpha[i], static_cast<double>(l)) / row_scale[l];
    }
    std::vector<double> neg(nv);
    for (std::size_t j = 0; j < nv; ++j) neg[j] = -diff[j];
    if (l + 2 <= 2 * k) {
      lp.add_row(diff, linalg::RowSense::kEqual, 0.0);
    } else {
      diff[lv(l)] = -1.0;
      neg[lv(l)] = -1.0;
      lp.add_row(diff, linalg::RowSense::kLessEqual, 0.0);
      lp.add_row(neg, linalg::RowSense::kLessEqual, 0.0);
    }
  }
  std::vector<double> ysum(nv, 0.0);
  for (std::size_t i = 0; i < k; ++i) ysum[yv(i)] = 1.0;
  lp.add_row(std::move(ysum), linalg::RowSense::kEqual, 1.0);

  const auto sol = linalg::solve_lp(lp);
  if (sol.status != linalg::LpStatus::kOptimal) {
    throw NumericalError(std::string("hard_pair: moment LP ended ") + linalg::to_string(sol.status));
  }
  std::vector<double> y(k);
  std::vector<double> z(k);
  for (std::size_t i = 0; i < k; ++i) {
    y[i] = sol.x[yv(i)];
    z[i] = sol.x[zv(i)];
  }
  // Remove rounding so both weight vectors pass the simplex invariant; the
  // certified moment gap below is evaluated on these final weights.
  double ys = 0.0;
  double zs = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    ys += y[i];
    zs += z[i];
  }
  for (std::size_t i = 0; i < k; ++i) {
    y[i] /= ys;
    z[i] /= zs;
  }

  HardPair hp;
  hp.k = k;
  hp.b = b;
  hp.rho = rho;
  hp.first = KSpikeDistribution(y, alpha);
  hp.second = KSpikeDistribution(z, beta);
  hp.lp_value = sol.value;
  hp.bound = 4.0 * std::pow(3.0, static_cast<double>(b)) / std::pow(rho, static_cast<double>(2 * k - 1));
  const MomentVector gy = moments_of(hp.first, 2 * k - 1);
  const MomentVector gz = moments_of(hp.second, 2 * k - 1);
  for (std::size_t l = 0; l + 1 < 2 * k; ++l) {
    hp.max_low_moment_gap = std::max(hp.max_low_moment_gap, std::fabs(gy.values[l] - gz.values[l]));
  }
  if (!(hp.max_low_moment_gap <= 1e-8)) {
    throw NumericalError("hard_pair: solved pair leaves a low-moment gap of " + std::to_string(hp.max_low_moment_gap));
  }
  return hp;
}

namespace detail {

// nu^b_i = sum_j w_j a_j^i (1 - a_j)^(b - i): probability of one particular
// b-bit string with i ones.
inline std::vector<long double> string_probabilities_by_ones(const KSpikeDistribution& d, std::size_t b) {
  std::vector<long double> nu(b + 1, 0.0L);
  for (std::size_t j = 0; j < d.k(); ++j) {
    const long double a = d.locations()[j];
    for (std::size_t i = 0; i <= b; ++i) {
      nu[i] += static_cast<long double>(d.weights()[j]) * std::pow(a, static_cast<int>(i)) *
               std::pow(1.0L - a, static_cast<int>(b - i));
    }
  }
  return nu;
}

inline std::vector<long double> raw_moments_ld(const KSpikeDistribution& d, std::size_t count) {
  std::vector<long double> g(count, 0.0L);
  for (std::size_t j = 0; j < d.k(); ++j) {
    long double p = 1.0L;
    for (std::size_t l = 0; l < count; ++l) {
      g[l] += static_cast<long double>(d.weights()[j]) * p;
      p *= d.locations()[j];
    }
  }
  return g;
}

}  // namespace detail

/// (1/2) sum_{l=2k-1}^{b} C(b,l) 2^l |g_l(d1) - g_l(d2)|. Requires the first
/// 2k-1 raw moments (orders 0..2k-2) to agree within 1e-8.
inline double tv_closed_form(const KSpikeDistribution& d1, const KSpikeDistribution& d2, std::size_t b) {
  const std::size_t k = std::max(d1.k(), d2.k());
  if (b < 2 * k - 1) throw InputError("tv_closed_form: aperture must be at least 2k-1");
  const auto g1 = detail::raw_moments_ld(d1, b + 1);
  const auto g2 = detail::raw_moments_ld(d2, b + 1);
  for (std::size_t l = 0; l + 1 < 2 * k; ++l) {
    if (std::fabs(static_cast<double>(g1[l] - g2[l])) > 1e-8) {
      throw InputError("tv_closed_form: moment " + std::to_string(l) + " differs by " +
                       std::to_string(static_cast<double>(g1[l] - g2[l])));
    }
  }
  long double s = 0.0L;
  for (std::size_t l = 2 * k - 1; l <= b; ++l) {
    s += std::ldexp(static_cast<long double>(binomial(static_cast<std::int64_t>(b), static_cast<std::int64_t>(l))),
                    static_cast<int>(l)) *
         std::fabs(g1[l] - g2[l]);
  }
  return static_cast<double>(0.5L * s);
}

/// (1/2) || (g^b(d1) - g^b(d2)) Pas_{b+1}^{-1} diag(C(b,i)) ||_1, the exact
/// snapshot total variation written through raw moments.
inline double tv_pascal(const KSpikeDistribution& d1, const KSpikeDistribution& d2, std::size_t b) {
  const PascalPair pp = pascal_pair(b + 1);
  const auto g1 = detail::raw_moments_ld(d1, b + 1);
  const auto g2 = detail::raw_moments_ld(d2, b + 1);
  long double s = 0.0L;
  for (std::size_t j = 0; j <= b; ++j) {
    long double v = 0.0L;
    for (std::size_t i = j; i <= b; ++i) v += (g1[i] - g2[i]) * static_cast<long double>(pp.inv[i][j]);
    s += std::fabs(v) * static_cast<long double>(binomial(static_cast<std::int64_t>(b), static_cast<std::int64_t>(j)));
  }
  return static_cast<double>(0.5L * s);
}

inline constexpr std::size_t kMaxBruteForceAperture = 20;

/// (1/2) sum over s in {0,1}^b of |P1(s) - P2(s)|, by explicit enumeration.
inline double tv_brute_force(const KSpikeDistribution& d1, const KSpikeDistribution& d2, std::size_t b) {
  if (b > kMaxBruteForceAperture) throw InputError("tv_brute_force: aperture too large to enumerate");
  if (b == 0) return 0.0;
  auto prob = [b](const KSpikeDistribution& d, std::uint32_t s) {
    long double total = 0.0L;
    for (std::size_t j = 0; j < d.k(); ++j) {
      long double p = d.weights()[j];
      const long double a = d.locations()[j];
      for (std::size_t bit = 0; bit < b; ++bit) p *= ((s >> bit) & 1U) ? a : 1.0L - a;
      total += p;
    }
    return total;
  };
  long double s = 0.0L;
  for (std::uint32_t str = 0; str < (1U << b); ++str) s += std::fabs(prob(d1, str) - prob(d2, str));
  return static_cast<double>(0.5L * s);
}

struct TvReport {
  double closed_form = 0.0;
  double pascal = 0.0;
  double brute_force = 0.0;
  bool has_brute_force = false;
};

/// All available routes for the b-snapshot total variation. Brute force runs
/// for b <= 14.
inline TvReport tv_snapshot_distance(const KSpikeDistribution& d1, const KSpikeDistribution& d2, std::size_t b) {
  TvReport r;
  r.closed_form = tv_closed_form(d1, d2, b);
  r.pascal = tv_pascal(d1, d2, b);
  if (b <= 14) {
    r.brute_force = tv_brute_force(d1, d2, b);
    r.has_brute_force = true;
  }
  return r;
}

/// Total variation between the m-snapshot distributions of the pair, by enumeration.
inline double aperture_indistinguishability(const HardPair& pair, std::size_t m) {
  if (m + 2 > 2 * pair.k) throw InputError("aperture_indistinguishability: m must be at most 2k-2");
  return tv_brute_force(pair.first, pair.second, m);
}

/// rho^(2k-1) / (8 3^b) ln(1 / (4 psi)): samples needed to tell the pair apart
/// with failure probability psi.
inline double implied_sample_bound(std::size_t k, std::size_t b, double rho, double psi) {
  if (!(psi > 0.0 && psi < 0.25)) throw InputError("implied_sample_bound: psi must lie in (0, 1/4)");
  return std::pow(rho, static_cast<double>(2 * k - 1)) / (8.0 * std::pow(3.0, static_cast<double>(b))) *
         std::log(1.0 / (4.0 * psi));
}

}  // namespace mixlearn
