// Walks through the library on small problems: a 1-D spike mixture from
// binarized snapshots, a full mixture from exact statistics, and a hard
// moment-matched pair.

#include <cstdio>

#include "mixlearn/mixlearn.hpp"

namespace ml = mixlearn;

int main() {
  // 1-D: two spikes, recovered from 3-bit snapshots.
  const ml::KSpikeDistribution spikes({0.4, 0.6}, {0.25, 0.75});
  const ml::BitBatch bits = ml::draw_spike_bits(spikes, 3, 200000, ml::RngStream(7, 0));
  ml::KSpikeConfig cfg1{2, 0.5, ml::moment_standard_error(bits.ones_histogram(), 2)};
  const ml::KSpikeFit fit = ml::learn_kspike(bits, cfg1);
  std::printf("1-D fit: weights (%.4f, %.4f) at (%.4f, %.4f), transport %.4g\n",
              fit.distribution.weights()[0], fit.distribution.weights()[1], fit.distribution.locations()[0],
              fit.distribution.locations()[1], ml::spike_transport(spikes, fit.distribution));

  // Mixture over [20] with exact statistics.
  ml::ExperimentConfig cfg;
  cfg.n = 20;
  cfg.k = 2;
  cfg.seed = 3;
  cfg.mode = ml::RunMode::kOracle;
  const ml::LearnOutcome out = ml::cmd_learn(cfg);
  std::printf("mixture (n=20, k=2, zeta=%.3f): transport %.3g, max l1 error %.3g, max weight error %.3g\n",
              out.zeta, out.errors->tran, out.errors->max_l1, out.errors->max_w);

  // Same source from one million snapshots of each aperture.
  cfg.mode = ml::RunMode::kSampled;
  cfg.threads = 4;
  try {
    const ml::LearnOutcome s = ml::cmd_learn(cfg);
    std::printf("same source from samples: transport %.3g\n", s.errors->tran);
  } catch (const ml::MatchingError& e) {
    std::printf("same source from samples: matching failed (%s)\n", e.what());
  }

  // Two 2-spike distributions sharing their first two moments.
  const ml::HardPair hp = ml::hard_pair(2, 3, 2.0);
  std::printf("hard pair k=2 rho=2: transport %.4f, 2-snapshot TV %.2e, 3-snapshot TV %.4f\n",
              ml::spike_transport(hp.first, hp.second), ml::aperture_indistinguishability(hp, 2),
              ml::tv_brute_force(hp.first, hp.second, 3));
  return 0;
}
