#include <catch_amalgamated.hpp>

#include <cmath>

#include "mixlearn/core_model.hpp"
#include "mixlearn/kspike1d.hpp"
#include "mixlearn/sampling.hpp"
#include "oracles.hpp"

using namespace mixlearn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> random_simplex(std::size_t k, RngStream& rng) {
  std::vector<double> w(k);
  double s = 0.0;
  for (double& x : w) {
    x = -std::log(rng.uniform_open_closed());
    s += x;
  }
  for (double& x : w) x /= s;
  return w;
}

// k locations in [0,1] with pairwise gaps at least tau (requires (k-1) tau < 1).
std::vector<double> separated_locations(std::size_t k, double tau, RngStream& rng) {
  const double free = 1.0 - tau * static_cast<double>(k - 1);
  std::vector<double> u(k);
  for (double& x : u) x = free * rng.uniform();
  std::sort(u.begin(), u.end());
  for (std::size_t j = 0; j < k; ++j) u[j] += tau * static_cast<double>(j);
  return u;
}

void check_values(const MomentVector& m, const std::vector<double>& expect, double tol) {
  REQUIRE(m.values.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK_THAT(m.values[i], WithinAbs(expect[i], tol));
}

}  // namespace

TEST_CASE("binomials are exact and overflow is reported") {
  CHECK(binomial(5, 2) == 10);
  CHECK(binomial(5, 7) == 0);
  CHECK(binomial(60, 30) == 118264581564861424LL);
  CHECK_THROWS_AS(binomial(70, 35), InputError);
}

TEST_CASE("moments_of examples") {
  check_values(moments_of(KSpikeDistribution({1.0}, {0.5}), 2), {1.0, 0.5}, 0.0);
  check_values(moments_of(KSpikeDistribution({0.5, 0.5}, {0.0, 1.0}), 4), {1.0, 0.5, 0.5, 0.5}, 0.0);
  check_values(moments_of(KSpikeDistribution({1.0}, {1.0}), 6), {1, 1, 1, 1, 1, 1}, 0.0);
}

TEST_CASE("nbm_of examples") {
  check_values(nbm_of(KSpikeDistribution({1.0}, {0.5})), {0.5, 0.5}, 1e-15);
  check_values(nbm_of(KSpikeDistribution({0.5, 0.5}, {0.0, 1.0})), {0.5, 0.0, 0.0, 0.5}, 1e-15);
  check_values(nbm_of(KSpikeDistribution({1.0}, {0.0}), 3), {1, 0, 0, 0, 0, 0}, 0.0);
}

TEST_CASE("pascal_pair examples and exact inverse") {
  const auto p2 = pascal_pair(2);
  CHECK(p2.pas == IntMatrix{{1, 0}, {1, 1}});
  const auto p4 = pascal_pair(4);
  CHECK(p4.pas == IntMatrix{{1, 0, 0, 0}, {3, 1, 0, 0}, {3, 2, 1, 0}, {1, 1, 1, 1}});
  for (std::size_t b = 1; b <= 25; ++b) CHECK(pascal_pair(b).product_is_identity());
  CHECK_NOTHROW(pascal_pair(kMaxPascalSize));
  CHECK_THROWS_AS(pascal_pair(0), InputError);
  CHECK_THROWS_AS(pascal_pair(kMaxPascalSize + 1), InputError);
}

TEST_CASE("Vandermonde factors through the Pascal matrix") {
  RngStream rng(1, 0);
  for (std::size_t k = 1; k <= 6; ++k) {
    const std::size_t b = 2 * k;
    const Eigen::MatrixXd pas = pascal_pair(b).pas_real();
    std::vector<double> alpha(k);
    for (double& a : alpha) a = rng.uniform();
    Eigen::MatrixXd amat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < b; ++j)
        amat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            std::pow(alpha[i], static_cast<double>(j)) * std::pow(1.0 - alpha[i], static_cast<double>(b - 1 - j));
    CHECK((vandermonde(alpha, b) - amat * pas).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("Pascal Frobenius norm: closed form and the 4^k / sqrt(3) bound") {
  for (std::size_t k = 1; k <= 10; ++k) {
    const int128 f2 = pascal_pair(2 * k).frobenius_squared();
    CHECK(f2 == pascal_frobenius_squared_closed_form(k));
    int128 sixteen_k = 1;
    for (std::size_t i = 0; i < k; ++i) sixteen_k *= 16;
    CHECK(3 * f2 <= sixteen_k);
  }
}

TEST_CASE("empirical_nbm examples") {
  check_values(empirical_nbm({3, 7}, 1), {0.3, 0.7}, 1e-15);
  check_values(empirical_nbm({2, 3, 3, 0}, 2), {0.25, 0.125, 0.125, 0.0}, 1e-15);
  const BitBatch ones(3, std::vector<std::uint8_t>(30, 1));
  check_values(empirical_nbm(ones, 2), {0, 0, 0, 1}, 0.0);
  CHECK_THROWS_AS(empirical_nbm(BitBatch(3), 2), InputError);
  CHECK_THROWS_AS(empirical_nbm(std::vector<std::uint64_t>{0, 0}, 1), InputError);
  CHECK_THROWS_AS(empirical_nbm(std::vector<std::uint64_t>{1, 2, 3}, 1), InputError);
  CHECK_THROWS_AS(empirical_nbm(BitBatch(2, {1, 0}), 2), InputError);
}

TEST_CASE("nbm_to_moments examples") {
  check_values(nbm_to_moments(MomentVector{MomentKind::kNbm, {0.5, 0.5}}), {1.0, 0.5}, 1e-15);
  check_values(nbm_to_moments(MomentVector{MomentKind::kNbm, {0.5, 0.0, 0.0, 0.5}}), {1.0, 0.5, 0.5, 0.5}, 1e-15);
  check_values(nbm_to_moments(MomentVector{MomentKind::kNbm, {1, 0, 0, 0, 0, 0}}), {1, 0, 0, 0, 0, 0}, 0.0);
  CHECK_THROWS_AS(nbm_to_moments(MomentVector{MomentKind::kRaw, {1.0, 0.5}}), InputError);
  CHECK_THROWS_AS(nbm_to_moments(MomentVector{MomentKind::kNbm, {1.0, 0.5, 0.1}}), InputError);
}

TEST_CASE("g = nu Pas for random spike distributions") {
  RngStream rng(2, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(6);
    std::vector<double> a(k);
    for (double& x : a) x = rng.uniform();
    const auto w = random_simplex(k, rng);
    const auto g = moments_of(w, a, 2 * k);
    const auto lifted = nbm_to_moments(nbm_of(w, a, k));
    for (std::size_t i = 0; i < 2 * k; ++i) CHECK_THAT(lifted[i], WithinAbs(g[i], 1e-10));
  }
}

TEST_CASE("solve_lambda examples") {
  const auto one = solve_lambda(moments_of(KSpikeDistribution({1.0}, {0.37}), 2), 0.0, 1);
  CHECK_THAT(one.lambda[0], WithinAbs(-0.37, 1e-14));
  CHECK(one.lambda[1] == 1.0);

  const MomentVector g{MomentKind::kRaw, {1.0, 0.5, 0.3125, 0.21875}};
  CHECK_THAT(moments_of(KSpikeDistribution({0.5, 0.5}, {0.25, 0.75}), 4)[3], WithinAbs(0.21875, 1e-15));
  const auto two = solve_lambda(g, 1e-14, 2);
  CHECK_THAT(two.lambda[0], WithinAbs(0.1875, 1e-10));
  CHECK_THAT(two.lambda[1], WithinAbs(-1.0, 1e-10));
  CHECK(two.lambda[2] == 1.0);
  CHECK(two.residual_l1 <= two.slack + 1e-12);

  const auto edge = solve_lambda(moments_of(KSpikeDistribution({0.5, 0.5}, {0.0, 1.0}), 4), 0.0, 2);
  CHECK_THAT(edge.lambda[0], WithinAbs(0.0, 1e-14));
  CHECK_THAT(edge.lambda[1], WithinAbs(-1.0, 1e-14));

  CHECK_THROWS_AS(solve_lambda(g, 1e-3, 3), InputError);
  CHECK_THROWS_AS(solve_lambda(MomentVector{MomentKind::kNbm, g.values}, 1e-3, 2), InputError);
  CHECK_THROWS_AS(solve_lambda(g, -1.0, 2), InputError);
}

TEST_CASE("solve_lambda attains the optimum found by vertex enumeration") {
  RngStream rng(3, 0);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t k = 1 + rng.below(3);
    std::vector<double> a(k);
    for (double& x : a) x = rng.uniform();
    auto g = moments_of(random_simplex(k, rng), a, 2 * k);
    for (std::size_t i = 1; i < 2 * k; ++i) g.values[i] += 1e-3 * rng.normal();
    const double xi = std::pow(10.0, -1.0 - 5.0 * rng.uniform());
    const auto sol = solve_lambda(g, xi, k);
    const double slack = std::ldexp(static_cast<double>(k) * xi, static_cast<int>(k));
    CHECK_THAT(sol.slack, WithinRel(slack, 1e-15));
    CHECK(sol.residual_l1 <= slack * (1.0 + 1e-9) + 1e-13);
    const double best = oracle::lambda_l1(g.values, k, slack);
    CHECK_THAT(sol.l1_norm, WithinAbs(best, 1e-8 * std::max(1.0, best)));
  }
}

TEST_CASE("polynomial_roots examples") {
  const auto q = polynomial_roots({0.1875, -1.0, 1.0}, 1e-6);
  REQUIRE(q.clamped.size() == 2);
  CHECK_THAT(q.clamped[0], WithinAbs(0.25, 1e-14));
  CHECK_THAT(q.clamped[1], WithinAbs(0.75, 1e-14));

  const auto c = polynomial_roots({1.0, 0.0, 1.0}, 1e-6);
  CHECK_THAT(std::fabs(c.raw[0].imag()), WithinAbs(1.0, 1e-14));
  CHECK(c.clamped == std::vector<double>{0.0, 0.0});

  const auto l = polynomial_roots({-0.42, 1.0}, 1e-6);
  CHECK_THAT(l.clamped[0], WithinAbs(0.42, 1e-15));

  const auto out = polynomial_roots({-2.0, 1.0}, 1e-6);
  CHECK(out.clamped[0] == 1.0);

  CHECK_THROWS_AS(polynomial_roots({1.0}, 1e-6), InputError);
  CHECK_THROWS_AS(polynomial_roots({1.0, 2.0}, 1e-6), InputError);
}

TEST_CASE("polynomial_roots recovers random separated roots") {
  RngStream rng(4, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    const auto roots = separated_locations(k, 0.05, rng);
    std::vector<long double> poly{1.0L};
    for (double r : roots) {
      std::vector<long double> next(poly.size() + 1, 0.0L);
      for (std::size_t i = 0; i < poly.size(); ++i) {
        next[i + 1] += poly[i];
        next[i] -= r * poly[i];
      }
      poly = std::move(next);
    }
    std::vector<double> lam(poly.begin(), poly.end());
    const auto found = polynomial_roots(lam, 1e-6);
    for (std::size_t j = 0; j < k; ++j) CHECK_THAT(found.clamped[j], WithinAbs(roots[j], 1e-8));
  }
}

TEST_CASE("solve_weights examples") {
  const MomentVector g1 = moments_of(KSpikeDistribution({1.0}, {0.3}), 2);
  CHECK(solve_weights({0.9}, g1).weights == std::vector<double>{1.0});

  const KSpikeDistribution d({0.2, 0.5, 0.3}, {0.1, 0.5, 0.85});
  const auto w = solve_weights(d.locations(), moments_of(d, 6));
  for (std::size_t j = 0; j < 3; ++j) CHECK_THAT(w.weights[j], WithinAbs(d.weights()[j], 1e-7));
  CHECK(w.objective <= 1e-18);

  const KSpikeDistribution pair({0.5, 0.5}, {0.3, 0.7});
  const auto dup = solve_weights({0.3, 0.3, 0.7}, moments_of(pair, 6));
  CHECK(dup.objective <= 1e-18);
  CHECK_THAT(dup.weights[0] + dup.weights[1], WithinAbs(0.5, 1e-7));
  CHECK_THAT(dup.weights[2], WithinAbs(0.5, 1e-7));

  CHECK_THROWS_AS(solve_weights({}, g1), InputError);
}

TEST_CASE("solve_weights matches active-set enumeration") {
  RngStream rng(5, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(3);
    std::vector<double> alpha(k), truth(k);
    for (double& x : alpha) x = rng.uniform();
    for (double& x : truth) x = rng.uniform();
    auto g = moments_of(random_simplex(k, rng), truth, 2 * k);
    for (std::size_t i = 1; i < 2 * k; ++i) g.values[i] += 0.05 * rng.normal();
    const auto sol = solve_weights(alpha, g);
    double sum = 0.0;
    for (double v : sol.weights) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
    CHECK_THAT(sol.objective, WithinAbs(oracle::simplex_least_squares(alpha, g.values), 1e-9));
  }
}

TEST_CASE("simplex projection") {
  Eigen::VectorXd v(3);
  v << 0.2, 0.3, 0.5;
  CHECK((project_to_simplex(v) - v).cwiseAbs().maxCoeff() <= 1e-15);
  v << 2.0, 0.0, 0.0;
  CHECK(project_to_simplex(v) == Eigen::Vector3d(1.0, 0.0, 0.0));
  v << 0.5, 0.5, -3.0;
  CHECK((project_to_simplex(v) - Eigen::Vector3d(0.5, 0.5, 0.0)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("learn_kspike on exact statistics") {
  const KSpikeDistribution d({0.4, 0.6}, {0.2, 0.8});
  const auto fit = learn_kspike_from_nbm(nbm_of(d), KSpikeConfig{2, 0.6, 1e-12});
  CHECK(spike_transport(d, fit.distribution) <= 1e-6);
  CHECK(fit.xi_within_bound);
  CHECK(fit.fit_residual <= 1e-6);

  RngStream rng(6, 0);
  for (std::size_t k = 1; k <= 3; ++k) {
    for (int trial = 0; trial < 20; ++trial) {
      const double tau = 0.2;
      const KSpikeDistribution truth(random_simplex(k, rng), separated_locations(k, tau, rng));
      const auto f = learn_kspike_from_nbm(nbm_of(truth), KSpikeConfig{k, tau, 1e-12});
      CHECK(spike_transport(truth, f.distribution) <= 1e-6);
    }
  }
}

TEST_CASE("learn_kspike with one spike returns the empirical mean up to the slack") {
  RngStream rng(7, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = rng.uniform();
    const auto bits = draw_spike_bits(KSpikeDistribution({1.0}, {a}), 1, 5000, rng.child(static_cast<std::uint64_t>(trial)));
    const auto h = bits.ones_histogram();
    const double mean = static_cast<double>(h[1]) / 5000.0;
    const double xi = 1e-9;
    const auto fit = learn_kspike(bits, KSpikeConfig{1, 1.0, xi});
    REQUIRE(fit.distribution.k() == 1);
    CHECK(fit.distribution.weights()[0] == 1.0);
    CHECK(std::fabs(fit.distribution.locations()[0] - mean) <= 2.0 * xi + 1e-15);
  }
}

TEST_CASE("learn_kspike rejects corrupt statistics and bad configuration") {
  const MomentVector bad{MomentKind::kNbm, {0.2, 0.1}};
  CHECK_THROWS_AS(learn_kspike_from_nbm(bad, KSpikeConfig{1, 1.0, 1e-9}), InputError);
  const MomentVector nu = nbm_of(KSpikeDistribution({1.0}, {0.5}));
  CHECK_THROWS_AS(learn_kspike_from_nbm(nu, KSpikeConfig{2, 1.0, 1e-9}), InputError);
  CHECK_THROWS_AS(learn_kspike_from_nbm(nu, KSpikeConfig{1, 0.0, 1e-9}), InputError);
  CHECK_THROWS_AS(learn_kspike_from_nbm(nu, KSpikeConfig{1, 1.0, 0.0}), InputError);
  CHECK_FALSE((KSpikeConfig{2, 0.1, 1e-3}).xi_within_bound());
  CHECK_THAT((KSpikeConfig{2, 0.5, 1e-8}).eps_root(), WithinRel(8.0 * std::sqrt(4e-8), 1e-12));
}

TEST_CASE("standard-error rule tracks the observed moment error") {
  const KSpikeDistribution d({0.4, 0.6}, {0.25, 0.75});
  const auto g = moments_of(d, 4);
  double sq = 0.0;
  double predicted = 0.0;
  const int seeds = 60;
  for (int s = 0; s < seeds; ++s) {
    const auto bits = draw_spike_bits(d, 3, 100000, RngStream(static_cast<std::uint64_t>(s), 9));
    const auto h = bits.ones_histogram();
    const auto gt = nbm_to_moments(empirical_nbm(h, 2));
    for (std::size_t i = 0; i < 4; ++i) sq += std::pow(gt[i] - g[i], 2) / seeds;
    const double se = sampled_xi(h, 2, XiRule::kStandardError);
    CHECK(se <= sampled_xi(h, 2, XiRule::kPascalBound));
    predicted += se * se / seeds;
  }
  CHECK(std::sqrt(sq) >= 0.75 * std::sqrt(predicted));
  CHECK(std::sqrt(sq) <= 1.33 * std::sqrt(predicted));
  CHECK(std::string(to_string(XiRule::kStandardError)) == "standard-error");
  CHECK(std::string(to_string(XiRule::kPascalBound)) == "pascal-bound");
  CHECK(moment_standard_error({0, 0, 0, 10}, 2) == 0.1);
}

TEST_CASE("interpolating step polynomials respect the coefficient bound") {
  RngStream rng(8, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t kappa = 1 + rng.below(6);
    std::vector<double> beta(kappa + 1);
    for (double& b : beta) b = rng.uniform();
    std::sort(beta.begin(), beta.end());
    const std::size_t ell = 1 + rng.below(kappa);
    const double s = beta[ell] - beta[ell - 1];
    if (!(s > 1e-3)) continue;
    std::vector<long double> x(beta.begin(), beta.end());
    std::vector<long double> y(kappa + 1, 0.0L);
    for (std::size_t i = 0; i < ell; ++i) y[i] = 1.0L;
    const auto gamma = oracle::lagrange_coefficients(x, y);
    long double norm2 = 0.0L;
    for (auto c : gamma) norm2 += c * c;
    const double kk = static_cast<double>(kappa);
    const double bound = kk * kk * std::pow(2.0, 4.0 * kk - 1.0) * std::pow(s, -2.0 * kk);
    CHECK(static_cast<double>(norm2) <= bound * (1.0 + 1e-6));
  }
}
