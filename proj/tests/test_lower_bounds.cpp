#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>

#include "mixlearn/core_model.hpp"
#include "mixlearn/lower_bounds.hpp"
#include "oracles.hpp"

using namespace mixlearn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double weight_sum(const KSpikeDistribution& d) {
  double s = 0.0;
  for (double w : d.weights()) s += w;
  return s;
}

double oracle_tv(const KSpikeDistribution& a, const KSpikeDistribution& b, std::size_t m) {
  return static_cast<double>(oracle::snapshot_tv(a.weights(), a.locations(), b.weights(), b.locations(), m));
}

}  // namespace

TEST_CASE("hard pair for a single spike") {
  const auto hp = hard_pair(1, 1, 2.0);
  REQUIRE(hp.first.k() == 1);
  CHECK(hp.first.locations()[0] == 0.0);
  CHECK(hp.second.locations()[0] == 0.5);
  CHECK_THAT(hp.first.weights()[0], WithinAbs(1.0, 1e-12));
  CHECK_THAT(hp.second.weights()[0], WithinAbs(1.0, 1e-12));
  CHECK_THAT(hp.lp_value, WithinAbs(1.0, 1e-9));
  CHECK(hp.bound == 6.0);
}

TEST_CASE("hard pair for two spikes at aperture three") {
  const auto hp = hard_pair(2, 3, 2.0);
  CHECK(hp.bound == 13.5);
  CHECK(hp.lp_value <= 13.5);
  CHECK(hp.max_low_moment_gap <= 1e-8);
  CHECK_THAT(weight_sum(hp.first), WithinAbs(1.0, 1e-10));
  CHECK_THAT(weight_sum(hp.second), WithinAbs(1.0, 1e-10));
}

TEST_CASE("hard pairs over a parameter grid") {
  for (std::size_t k : {1U, 2U, 3U}) {
    for (std::size_t b : {2 * k - 1, 2 * k, 3 * k}) {
      for (double rho : {2.0, 3.0}) {
        CAPTURE(k, b, rho);
        const auto hp = hard_pair(k, b, rho);
        CHECK(hp.lp_value <= 4.0 * std::pow(3.0, static_cast<double>(b)) / std::pow(rho, 2.0 * k - 1.0));
        CHECK(hp.max_low_moment_gap <= 1e-8);
        CHECK_THAT(weight_sum(hp.first), WithinAbs(1.0, 1e-10));
        CHECK_THAT(weight_sum(hp.second), WithinAbs(1.0, 1e-10));
        const double gap = 1.0 / ((2.0 * k - 1.0) * rho);
        for (std::size_t i = 0; i < k; ++i) {
          CHECK_THAT(hp.second.locations()[i] - hp.first.locations()[i], WithinRel(gap, 1e-12));
          if (i + 1 < k) {
            CHECK_THAT(hp.first.locations()[i + 1] - hp.first.locations()[i], WithinRel(2.0 * gap, 1e-12));
          }
        }
        CHECK(spike_transport(hp.first, hp.second) >= gap - 1e-12);
      }
    }
  }
}

TEST_CASE("hard pairs up to aperture twelve solve for non-integer rho") {
  for (std::size_t k = 1; k <= 3; ++k) {
    for (std::size_t b = 2 * k - 1; b <= 12; ++b) {
      for (double rho : {2.0, 2.5, 3.0, 3.592655229497193, 3.7, 4.0}) {
        CAPTURE(k, b, rho);
        REQUIRE_NOTHROW(hard_pair(k, b, rho));
        const auto hp = hard_pair(k, b, rho);
        CHECK(hp.lp_value <= hp.bound);
        CHECK(hp.max_low_moment_gap <= 1e-8);
      }
    }
  }
}

TEST_CASE("hard pair rejects parameters outside its range") {
  CHECK_THROWS_AS(hard_pair(0, 1, 2.0), InputError);
  CHECK_THROWS_AS(hard_pair(2, 2, 2.0), InputError);
  CHECK_THROWS_AS(hard_pair(2, 3, 1.5), InputError);
}

TEST_CASE("snapshot total variation examples") {
  const KSpikeDistribution d({0.3, 0.7}, {0.2, 0.6});
  const auto same = tv_snapshot_distance(d, d, 5);
  CHECK(same.closed_form == 0.0);
  CHECK(same.pascal == 0.0);
  CHECK(same.brute_force == 0.0);

  const KSpikeDistribution zero({1.0}, {0.0});
  const KSpikeDistribution half({1.0}, {0.5});
  const auto r = tv_snapshot_distance(zero, half, 1);
  CHECK_THAT(r.closed_form, WithinAbs(0.5, 1e-15));
  CHECK_THAT(r.brute_force, WithinAbs(0.5, 1e-15));
  CHECK_THAT(r.pascal, WithinAbs(0.5, 1e-15));

  const auto hp = hard_pair(2, 3, 2.0);
  const auto t = tv_snapshot_distance(hp.first, hp.second, 3);
  REQUIRE(t.has_brute_force);
  CHECK_THAT(t.closed_form, WithinAbs(t.brute_force, 1e-10));
  CHECK_THAT(t.pascal, WithinAbs(t.brute_force, 1e-10));
  CHECK_THAT(t.brute_force, WithinAbs(oracle_tv(hp.first, hp.second, 3), 1e-12));
}

TEST_CASE("total variation routes agree on hard pairs") {
  for (std::size_t k : {1U, 2U, 3U}) {
    for (std::size_t b : {2 * k - 1, 2 * k, 3 * k, 3 * k + 2}) {
      for (double rho : {2.0, 3.0}) {
        CAPTURE(k, b, rho);
        const auto hp = hard_pair(k, b, rho);
        const auto t = tv_snapshot_distance(hp.first, hp.second, b);
        REQUIRE(t.has_brute_force);
        const double oracle = oracle_tv(hp.first, hp.second, b);
        CHECK_THAT(t.brute_force, WithinAbs(oracle, 1e-12));
        CHECK_THAT(t.pascal, WithinAbs(oracle, 1e-10));
        // The moment sum bounds the variation from above; at the minimal
        // aperture only one moment differs and the two coincide.
        CHECK(t.closed_form >= oracle - 1e-10);
        if (b == 2 * k - 1) CHECK_THAT(t.closed_form, WithinAbs(oracle, 1e-10));
      }
    }
  }
}

TEST_CASE("closed form requires matching low moments") {
  const KSpikeDistribution a({0.5, 0.5}, {0.1, 0.4});
  const KSpikeDistribution b({0.5, 0.5}, {0.2, 0.6});
  CHECK_THROWS_AS(tv_closed_form(a, b, 3), InputError);
  CHECK_THROWS_AS(tv_closed_form(a, a, 2), InputError);
  CHECK_NOTHROW(tv_brute_force(a, b, 3));
  CHECK_THROWS_AS(tv_brute_force(a, b, kMaxBruteForceAperture + 1), InputError);
  CHECK(tv_brute_force(a, b, 0) == 0.0);
}

TEST_CASE("Pascal inverse has alternating binomial entries") {
  for (std::int64_t b = 0; b <= 25; ++b) {
    const auto pp = pascal_pair(static_cast<std::size_t>(b + 1));
    for (std::int64_t i = 0; i <= b; ++i) {
      for (std::int64_t j = 0; j <= b; ++j) {
        std::int64_t prod = 0;
        for (std::int64_t m = j; m <= i; ++m) {
          const std::int64_t q = (((m - j) % 2 == 0) ? 1 : -1) * binomial(b - j, m - j);
          prod += pp.pas[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] * q;
        }
        REQUIRE(prod == (i == j ? 1 : 0));
      }
    }
  }
}

TEST_CASE("low-aperture snapshots cannot tell a hard pair apart") {
  const auto hp = hard_pair(2, 3, 2.0);
  CHECK(aperture_indistinguishability(hp, 2) <= 1e-6);
  CHECK(aperture_indistinguishability(hp, 0) == 0.0);
  CHECK_THROWS_AS(aperture_indistinguishability(hp, 3), InputError);

  const auto one = hard_pair(1, 1, 2.0);
  CHECK(aperture_indistinguishability(one, 0) == 0.0);
  CHECK_THAT(tv_brute_force(one.first, one.second, 1), WithinAbs(0.5, 1e-12));

  for (std::size_t k : {2U, 3U}) {
    const auto p = hard_pair(k, 3 * k, 3.0);
    for (std::size_t m = 0; m + 2 <= 2 * k; ++m) {
      CHECK(aperture_indistinguishability(p, m) <= 1e-6);
      CHECK_THAT(aperture_indistinguishability(p, m), WithinAbs(oracle_tv(p.first, p.second, m), 1e-12));
    }
    CHECK(tv_brute_force(p.first, p.second, 2 * k - 1) > 1e-6);
  }
}

TEST_CASE("implied sample bound formula") {
  CHECK_THAT(implied_sample_bound(2, 3, 2.0, 0.01), WithinRel(8.0 / (8.0 * 27.0) * std::log(25.0), 1e-14));
  CHECK_THROWS_AS(implied_sample_bound(2, 3, 2.0, 0.3), InputError);
}
