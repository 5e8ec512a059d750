#pragma once

// Experiment plumbing behind the command-line tool: configuration, synthetic
// wide isotropic sources, learning runs with error reports, and lower-bound
// reports. Everything is a function of the configuration and its seed.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mixlearn/core_model.hpp"
#include "mixlearn/errors.hpp"
#include "mixlearn/isotropize.hpp"
#include "mixlearn/learner.hpp"
#include "mixlearn/lower_bounds.hpp"
#include "mixlearn/sampling.hpp"
#include "mixlearn/serialization.hpp"

namespace mixlearn {

enum class RunMode { kOracle, kSampled };

inline const char* to_string(RunMode m) { return m == RunMode::kOracle ? "oracle" : "sampled"; }

inline RunMode parse_run_mode(const std::string& s) {
  if (s == "oracle") return RunMode::kOracle;
  if (s == "sampled") return RunMode::kSampled;
  throw InputError("mode must be \"oracle\" or \"sampled\", got \"" + s + "\"");
}

inline ProjectionScale parse_projection_scale(const std::string& s) {
  if (s == to_string(ProjectionScale::kPaper)) return ProjectionScale::kPaper;
  if (s == to_string(ProjectionScale::kSupNorm)) return ProjectionScale::kSupNorm;
  throw InputError("scale must be \"" + std::string(to_string(ProjectionScale::kPaper)) + "\" or \"" +
                   to_string(ProjectionScale::kSupNorm) + "\", got \"" + s + "\"");
}

inline XiRule parse_xi_rule(const std::string& s) {
  if (s == to_string(XiRule::kStandardError)) return XiRule::kStandardError;
  if (s == to_string(XiRule::kPascalBound)) return XiRule::kPascalBound;
  throw InputError("xi-rule must be \"standard-error\" or \"pascal-bound\", got \"" + s + "\"");
}

struct ExperimentConfig {
  std::string run_id = "run";
  std::size_t n = 20;
  std::size_t k = 2;
  std::uint64_t seed = 1;
  std::size_t samples1 = 1000000;
  std::size_t samples2 = 1000000;
  std::size_t samples_hi = 1000000;
  double zeta = 0.0;  // 0: width of the ground-truth source
  double omega = 2.0;
  double delta = 0.0;     // 0: w_min^3 zeta^4 / (2^29 omega^5 k^16)
  double varsigma = 0.0;  // > 0: 1-D accuracy xi = varsigma^(8k^2)
  RunMode mode = RunMode::kSampled;
  ProjectionScale scale = ProjectionScale::kSupNorm;
  XiRule xi_rule = XiRule::kStandardError;
  bool poissonize = false;
  // Refinement of the item domain before learning.
  bool isotropize = false;
  double sigma = 0.0;  // 0: eps zeta^2 / (32 k w_min)
  double eps = 0.25;
  // Synthetic source generator.
  double spread = 0.5;  // log-normal scale of constituent entries
  std::size_t max_generate_attempts = 10000;
  unsigned threads = 1;
  bool timing = true;
  std::string model_path;  // ground truth; generated from the seed when empty
  std::string out;

  void validate() const {
    if (n < 1) throw InputError("config: n must be at least 1");
    if (k < 1) throw InputError("config: k must be at least 1");
    if (n > std::numeric_limits<std::uint32_t>::max()) throw InputError("config: n too large");
    if (!(zeta >= 0.0) || !std::isfinite(zeta)) throw InputError("config: zeta must be a nonnegative number");
    if (!(omega > 1.0)) throw InputError("config: omega must exceed 1");
    if (!(delta >= 0.0 && delta < 1.0)) throw InputError("config: delta must lie in [0,1)");
    if (!(varsigma >= 0.0 && varsigma < 1.0)) throw InputError("config: varsigma must lie in [0,1)");
    if (!(sigma >= 0.0 && sigma < 1.0)) throw InputError("config: sigma must lie in [0,1)");
    if (!(eps > 0.0)) throw InputError("config: eps must be positive");
    if (!(spread >= 0.0) || !std::isfinite(spread)) throw InputError("config: spread must be a nonnegative number");
    if (max_generate_attempts < 1) throw InputError("config: max_generate_attempts must be at least 1");
    if (mode == RunMode::kSampled && (samples1 == 0 || samples2 == 0 || samples_hi == 0)) {
      throw InputError("config: sampled mode needs positive sample counts");
    }
  }
};

inline Json to_json(const ExperimentConfig& c) {
  return Json{{"run_id", c.run_id},
              {"n", c.n},
              {"k", c.k},
              {"seed", c.seed},
              {"samples1", c.samples1},
              {"samples2", c.samples2},
              {"samples_hi", c.samples_hi},
              {"zeta", c.zeta},
              {"omega", c.omega},
              {"delta", c.delta},
              {"varsigma", c.varsigma},
              {"mode", to_string(c.mode)},
              {"scale", to_string(c.scale)},
              {"xi_rule", to_string(c.xi_rule)},
              {"poissonize", c.poissonize},
              {"isotropize", c.isotropize},
              {"sigma", c.sigma},
              {"eps", c.eps},
              {"spread", c.spread},
              {"max_generate_attempts", c.max_generate_attempts},
              {"threads", c.threads},
              {"timing", c.timing},
              {"model", c.model_path},
              {"out", c.out}};
}

/// Applies every field present in `j` on top of `base`. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
inline ExperimentConfig apply_config_json(ExperimentConfig base, const Json& j) {
  if (!j.is_object()) throw InputError("config: top level must be a JSON object");
  auto get = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("config: field \"") + key + "\" has the wrong type: " + e.what());
    }
  };
  static const char* const kKnown[] = {"run_id", "n",        "k",       "seed",       "samples1",
                                       "samples2", "samples_hi", "zeta",  "omega",      "delta",
                                       "varsigma", "mode",     "scale",   "xi_rule",    "poissonize",
                                       "isotropize", "sigma",  "eps",     "spread",     "max_generate_attempts",
                                       "threads",  "timing",   "model",   "out"};
  for (const auto& item : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), item.key()) == std::end(kKnown)) {
      throw InputError("config: unknown field \"" + item.key() + "\"");
    }
  }
  get("run_id", base.run_id);
  get("n", base.n);
  get("k", base.k);
  get("seed", base.seed);
  get("samples1", base.samples1);
  get("samples2", base.samples2);
  get("samples_hi", base.samples_hi);
  get("zeta", base.zeta);
  get("omega", base.omega);
  get("delta", base.delta);
  get("varsigma", base.varsigma);
  get("poissonize", base.poissonize);
  get("isotropize", base.isotropize);
  get("sigma", base.sigma);
  get("eps", base.eps);
  get("spread", base.spread);
  get("max_generate_attempts", base.max_generate_attempts);
  get("threads", base.threads);
  get("timing", base.timing);
  get("model", base.model_path);
  get("out", base.out);
  std::string text;
  if (j.contains("mode")) {
    get("mode", text);
    base.mode = parse_run_mode(text);
  }
  if (j.contains("scale")) {
    get("scale", text);
    base.scale = parse_projection_scale(text);
  }
  if (j.contains("xi_rule")) {
    get("xi_rule", text);
    base.xi_rule = parse_xi_rule(text);
  }
  return base;
}

// Stream ids under the run seed.
inline constexpr std::uint64_t kGenerateStream = 0x67656e;
inline constexpr std::uint64_t kSampleStream = 0x736d70;

// ---------------------------------------------------------------------------
// Synthetic sources

/// Rejection-samples k-mixtures with weights proportional to 1 + U(0,1) and
/// entries proportional to exp(spread * N(0,1)) until one is isotropic with
/// width at least `min_zeta` (k >= 2; any isotropic source is accepted at k = 1).
inline MixtureSource generate_wide_source(std::size_t n, std::size_t k, double min_zeta, double spread,
                                          RngStream& rng, std::size_t max_attempts) {
  if (n < 1 || k < 1) throw InputError("generate_wide_source: n and k must be positive");
  const auto nn = static_cast<Eigen::Index>(n);
  double best = 0.0;
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<double> w(k);
    for (double& x : w) x = 1.0 + rng.uniform();
    const double ws = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= ws;
    Eigen::MatrixXd p(nn, static_cast<Eigen::Index>(k));
    for (Eigen::Index t = 0; t < p.cols(); ++t) {
      for (Eigen::Index i = 0; i < nn; ++i) p(i, t) = std::exp(spread * rng.normal());
      p.col(t) /= p.col(t).sum();
    }
    MixtureSource src(std::move(w), std::move(p));
    // Isotropy is cheap to test; the eigendecomposition runs only on survivors.
    const Eigen::VectorXd r = src.mean();
    const double lo = 1.0 / (2.0 * static_cast<double>(n));
    const double hi = 2.0 / static_cast<double>(n);
    if (r.minCoeff() < lo || r.maxCoeff() > hi) continue;
    if (k == 1) return src;
    const WidthReport rep = width_report(src);
    best = std::max(best, rep.zeta);
    if (rep.isotropic && rep.zeta >= min_zeta && rep.zeta > 0.0) return src;
  }
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "generate: no isotropic source with zeta >= %.6g after %zu attempts (best %.6g); "
                "lower --zeta or change the spread",
                min_zeta, max_attempts, best);
  throw InputError(buf);
}

inline MixtureSource cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  RngStream rng(cfg.seed, kGenerateStream);
  return generate_wide_source(cfg.n, cfg.k, cfg.zeta, cfg.spread, rng, cfg.max_generate_attempts);
}

// ---------------------------------------------------------------------------
// Error reports against ground truth

struct RecoveryErrors {
  double tran = 0.0;
  double max_l1 = 0.0;  // max over constituents of ||p^t - p~^pi(t)||_1
  double max_w = 0.0;   // max over constituents of |w_t - w~_pi(t)|
  std::vector<std::size_t> assignment;
};

/// Transport distance plus per-constituent errors under the assignment pi
/// minimizing sum_t w_t (1/2)||p^t - p~^pi(t)||_1 (exhaustive for k <= 8,
/// greedy above).
inline RecoveryErrors recovery_errors(const MixtureSource& truth, const MixtureSource& learned) {
  if (truth.n() != learned.n()) throw InputError("recovery_errors: domains differ");
  RecoveryErrors e;
  e.tran = mixture_transport(truth, learned).cost;
  const std::size_t k = truth.k();
  const std::size_t l = learned.k();
  Eigen::MatrixXd d(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t s = 0; s < l; ++s)
      d(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) =
          (truth.constituent(t) - learned.constituent(s)).lpNorm<1>();
  std::vector<std::size_t> best(k);
  if (k == l && k <= 8) {
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (std::size_t t = 0; t < k; ++t)
        c += truth.weight(t) * d(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(perm[t]));
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<bool> used(l, false);
    for (std::size_t t = 0; t < k; ++t) {
      std::size_t arg = 0;
      double v = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < l; ++s) {
        if (used[s] && k <= l) continue;
        if (d(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) < v) {
          v = d(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
          arg = s;
        }
      }
      used[arg] = true;
      best[t] = arg;
    }
  }
  e.assignment = best;
  for (std::size_t t = 0; t < k; ++t) {
    e.max_l1 = std::max(e.max_l1, d(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(best[t])));
    e.max_w = std::max(e.max_w, std::fabs(truth.weight(t) - learned.weight(best[t])));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Learning runs

inline constexpr const char* kResultsCsvHeader =
    "run_id,n,k,N1,N2,Nhi,seed,tran_dist,max_l1_err,max_w_err,wall_ms";

struct LearnOutcome {
  MixtureSource truth;
  MixtureSource model;
  LearnResult result;
  std::optional<RecoveryErrors> errors;
  std::optional<ItemMap> item_map;
  double survival_rate = 1.0;
  double zeta = 0.0;
  double wall_ms = 0.0;
  Json manifest;
  std::string csv_row;
};

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string results_csv_row(const ExperimentConfig& cfg, const std::optional<RecoveryErrors>& e,
                                   double wall_ms) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::string row = detail::csv_field(cfg.run_id);
  for (std::size_t v : {cfg.n, cfg.k, cfg.samples1, cfg.samples2, cfg.samples_hi}) row += "," + std::to_string(v);
  row += "," + std::to_string(cfg.seed);
  row += "," + detail::csv_number(e ? e->tran : nan);
  row += "," + detail::csv_number(e ? e->max_l1 : nan);
  row += "," + detail::csv_number(e ? e->max_w : nan);
  row += "," + detail::csv_number(cfg.timing ? wall_ms : 0.0);
  return row;
}

/// Loads or generates the ground truth, collects statistics in the configured
/// mode, learns, and scores the result. Matching failures propagate as
/// MatchingError.
inline LearnOutcome cmd_learn(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  LearnOutcome out;
  if (!cfg.model_path.empty()) {
    out.truth = mixture_from_json(read_json_file(cfg.model_path));
    if (out.truth.n() != cfg.n || out.truth.k() != cfg.k) {
      throw InputError("learn: model has n=" + std::to_string(out.truth.n()) + ", k=" + std::to_string(out.truth.k()) +
                       " but the configuration asks for n=" + std::to_string(cfg.n) + ", k=" + std::to_string(cfg.k));
    }
  } else {
    out.truth = cmd_generate(cfg);
  }
  out.zeta = cfg.zeta > 0.0 ? cfg.zeta : width_report(out.truth).zeta;
  if (!(out.zeta > 0.0)) {
    if (cfg.k > 1) throw InputError("learn: the ground truth has zero width; pass --zeta explicitly");
    out.zeta = 1.0;  // any positive value: k = 1 never uses it beyond thresholds
  }

  LearnerConfig lcfg;
  lcfg.k = cfg.k;
  lcfg.zeta = out.zeta;
  lcfg.omega = cfg.omega;
  lcfg.delta = cfg.delta;
  lcfg.w_min = out.truth.w_min();
  lcfg.scale = cfg.scale;
  lcfg.xi_rule = cfg.xi_rule;
  if (cfg.varsigma > 0.0) lcfg.xi = xi_from_varsigma(cfg.varsigma, cfg.k);

  const RngStream base(cfg.seed, kSampleStream);
  const RngStream learn_rng = base.child(5);
  Json stats_info;
  if (cfg.mode == RunMode::kOracle) {
    ExactStatistics stats(out.truth);
    out.result = learn_mixture(stats, cfg.n, lcfg, learn_rng);
    out.model = out.result.model;
  } else {
    RngStream count_rng = base.child(0);
    const std::size_t n1 = draw_count(cfg.samples1, cfg.poissonize, count_rng);
    const std::size_t n2 = draw_count(cfg.samples2, cfg.poissonize, count_rng);
    const std::size_t nh = draw_count(cfg.samples_hi, cfg.poissonize, count_rng);
    SnapshotBatch ones = draw_snapshots(out.truth, 1, n1, base.child(1), cfg.threads);
    SnapshotBatch twos = draw_snapshots(out.truth, 2, n2, base.child(2), cfg.threads);
    SnapshotBatch hi = draw_snapshots(out.truth, 2 * cfg.k - 1, nh, base.child(3), cfg.threads);
    stats_info = Json{{"N1", n1}, {"N2", n2}, {"Nhi", nh}};
    std::size_t n_learn = cfg.n;
    if (cfg.isotropize) {
      // A separate 1-snapshot batch fixes the refinement.
      const SnapshotBatch rest = draw_snapshots(out.truth, 1, n1, base.child(6), cfg.threads);
      const double sigma =
          cfg.sigma > 0.0 ? cfg.sigma : default_sigma(cfg.eps, out.zeta, cfg.k, out.truth.w_min());
      out.item_map = build_refinement(estimate_r(rest, cfg.n), sigma);
      const RngStream map_rng = base.child(7);
      auto m1 = map_batch(*out.item_map, ones, map_rng.child(1), cfg.threads);
      auto m2 = map_batch(*out.item_map, twos, map_rng.child(2), cfg.threads);
      auto mh = map_batch(*out.item_map, hi, map_rng.child(3), cfg.threads);
      out.survival_rate = mh.survival_rate();
      stats_info["survival"] = Json{{"ones", m1.survival_rate()}, {"twos", m2.survival_rate()},
                                    {"hi", mh.survival_rate()}};
      ones = std::move(m1.batch);
      twos = std::move(m2.batch);
      hi = std::move(mh.batch);
      n_learn = out.item_map->nprime;
      if (cfg.zeta <= 0.0 && cfg.k > 1) {
        const double z = width_report(refine_source(out.truth, *out.item_map)).zeta;
        if (z > 0.0) lcfg.zeta = z;
      }
    }
    SampledStatistics stats(n_learn, cfg.k, std::move(ones), std::move(twos), std::move(hi), base.child(4),
                            cfg.threads);
    out.result = learn_mixture(stats, n_learn, lcfg, learn_rng);
    out.model = out.item_map ? pull_back(*out.item_map, out.result.model) : out.result.model;
  }
  out.errors = recovery_errors(out.truth, out.model);
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  out.csv_row = results_csv_row(cfg, out.errors, out.wall_ms);

  Json m;
  m["config"] = to_json(cfg);
  m["constants"] = to_json(out.result.consts);
  m["zeta"] = lcfg.zeta;
  m["xi"] = lcfg.xi ? Json(*lcfg.xi) : Json(to_string(cfg.xi_rule));
  m["streams"] = Json{{"generate", kGenerateStream}, {"sample", kSampleStream}};
  m["spectral"] = Json{{"threshold", out.result.subspace.threshold},
                       {"kprime", out.result.subspace.kprime},
                       {"degenerate", out.result.degenerate}};
  m["theta"] = out.result.theta;
  m["theta_attempts"] = out.result.theta_attempts;
  if (!stats_info.is_null()) m["statistics"] = stats_info;
  if (out.item_map) m["item_map"] = to_json(*out.item_map);
  m["tran_dist"] = out.errors->tran;
  m["max_l1_err"] = out.errors->max_l1;
  m["max_w_err"] = out.errors->max_w;
  if (cfg.timing) m["wall_ms"] = out.wall_ms;
  out.manifest = std::move(m);
  return out;
}

// ---------------------------------------------------------------------------
// Lower bounds

/// CSV with columns kind,index,first,second,difference: spike weights and
/// locations of the hard pair, raw moments up to order b, then summary rows.
inline std::string cmd_lowerbound(std::size_t k, std::size_t b, double rho, std::size_t m, double psi = 0.01) {
  const HardPair hp = hard_pair(k, b, rho);
  std::string csv = "kind,index,first,second,difference\n";
  auto row = [&csv](const std::string& kind, std::size_t idx, double a, double c) {
    csv += kind + "," + std::to_string(idx) + "," + detail::csv_number(a) + "," + detail::csv_number(c) + "," +
           detail::csv_number(a - c) + "\n";
  };
  auto scalar = [&csv](const std::string& kind, std::size_t idx, double v) {
    csv += kind + "," + std::to_string(idx) + "," + detail::csv_number(v) + ",,\n";
  };
  for (std::size_t i = 0; i < k; ++i) row("weight", i, hp.first.weights()[i], hp.second.weights()[i]);
  for (std::size_t i = 0; i < k; ++i) row("location", i, hp.first.locations()[i], hp.second.locations()[i]);
  const auto g1 = detail::raw_moments_ld(hp.first, b + 1);
  const auto g2 = detail::raw_moments_ld(hp.second, b + 1);
  for (std::size_t l = 0; l <= b; ++l) row("moment", l, static_cast<double>(g1[l]), static_cast<double>(g2[l]));
  scalar("lp_value", b, hp.lp_value);
  scalar("lp_bound", b, hp.bound);
  scalar("max_low_moment_gap", 2 * k - 2, hp.max_low_moment_gap);
  scalar("transport", 0, spike_transport(hp.first, hp.second));
  const TvReport tv = tv_snapshot_distance(hp.first, hp.second, b);
  scalar("tv_closed_form", b, tv.closed_form);
  scalar("tv_pascal", b, tv.pascal);
  if (tv.has_brute_force) scalar("tv_brute_force", b, tv.brute_force);
  if (m + 2 <= 2 * k) scalar("tv_aperture", m, aperture_indistinguishability(hp, m));
  else if (m <= kMaxBruteForceAperture) scalar("tv_aperture", m, tv_brute_force(hp.first, hp.second, m));
  scalar("implied_samples", b, implied_sample_bound(k, b, rho, psi));
  return csv;
}

}  // namespace mixlearn
