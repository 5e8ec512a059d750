// Command-line front end. Exit codes: 0 ok, 1 matching or solver failure,
// 2 I/O failure, 3 invalid configuration.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "mixlearn/mixlearn.hpp"

namespace {

namespace ml = mixlearn;

enum ExitCode : int { kOk = 0, kPipelineFailure = 1, kIoFailure = 2, kInvalidConfig = 3 };

struct CommonFlags {
  ml::ExperimentConfig cfg;
  std::string mode = "sampled";
  std::string scale = ml::to_string(ml::ProjectionScale::kSupNorm);
  std::string xi_rule = ml::to_string(ml::XiRule::kStandardError);
  std::string config_path;
  bool no_timing = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  auto& c = f.cfg;
  app->add_option("--run-id", c.run_id, "Label written in the results CSV");
  app->add_option("--n", c.n, "Domain size");
  app->add_option("--k", c.k, "Number of constituents");
  app->add_option("--seed", c.seed, "Run seed");
  app->add_option("--samples1", c.samples1, "Number of 1-snapshots");
  app->add_option("--samples2", c.samples2, "Number of 2-snapshots");
  app->add_option("--samples-hi", c.samples_hi, "Number of (2k-1)-snapshots");
  app->add_option("--zeta", c.zeta, "Width parameter (0: width of the ground truth)");
  app->add_option("--omega", c.omega, "Confidence parameter, > 1");
  app->add_option("--delta", c.delta, "Slack of the direction program, in [0,1); 0 picks the largest value the analysis allows");
  app->add_option("--varsigma", c.varsigma, "If > 0, 1-D accuracy xi = varsigma^(8k^2)");
  app->add_option("--mode", f.mode, "oracle | sampled");
  app->add_option("--scale", f.scale, "Projection scale: paper | supnorm");
  app->add_option("--xi-rule", f.xi_rule, "standard-error | pascal-bound");
  app->add_flag("--poissonize", c.poissonize, "Draw Poisson sample counts");
  app->add_flag("--isotropize", c.isotropize, "Refine the item domain before learning");
  app->add_option("--sigma", c.sigma, "Refinement granularity (0: default)");
  app->add_option("--spread", c.spread, "Log-normal scale of generated constituents");
  app->add_option("--model", c.model_path, "Ground-truth model JSON");
  app->add_option("--out", c.out, "Output path");
  app->add_option("--config", f.config_path, "JSON config; its fields override flags");
  app->add_option("--threads", c.threads, "Worker threads");
  app->add_flag("--no-timing", f.no_timing, "Write zero wall time so reruns are byte-identical");
}

ml::ExperimentConfig finish(CommonFlags& f) {
  f.cfg.mode = ml::parse_run_mode(f.mode);
  f.cfg.scale = ml::parse_projection_scale(f.scale);
  f.cfg.xi_rule = ml::parse_xi_rule(f.xi_rule);
  if (f.no_timing) f.cfg.timing = false;
  ml::ExperimentConfig cfg = f.cfg;
  if (!f.config_path.empty()) cfg = ml::apply_config_json(cfg, ml::read_json_file(f.config_path));
  cfg.validate();
  return cfg;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    ml::write_text_file(path, text);
  }
}

int run_generate(CommonFlags& f) {
  const auto cfg = finish(f);
  const auto src = ml::cmd_generate(cfg);
  emit(cfg.out, ml::to_json(src).dump(2) + "\n");
  return kOk;
}

int run_learn(CommonFlags& f) {
  const auto cfg = finish(f);
  const auto out = ml::cmd_learn(cfg);
  const std::string csv = std::string(ml::kResultsCsvHeader) + "\n" + out.csv_row + "\n";
  if (cfg.out.empty()) {
    std::cout << csv;
    return kOk;
  }
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) throw ml::IoError("cannot create " + cfg.out + ": " + ec.message());
  const std::filesystem::path dir(cfg.out);
  ml::write_json_file((dir / "learned.json").string(), ml::to_json(out.model));
  ml::write_json_file((dir / "manifest.json").string(), out.manifest);
  ml::write_text_file((dir / "results.csv").string(), csv);
  return kOk;
}

int run_sample(CommonFlags& f, std::size_t aperture, std::size_t count) {
  const auto cfg = finish(f);
  const auto src = cfg.model_path.empty() ? ml::cmd_generate(cfg) : ml::mixture_from_json(ml::read_json_file(cfg.model_path));
  const auto batch = ml::draw_snapshots(src, aperture, count, ml::RngStream(cfg.seed, ml::kSampleStream).child(aperture),
                                        cfg.threads);
  emit(cfg.out, ml::snapshots_to_csv(batch));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn mixtures of discrete distributions from few-sample snapshots"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  auto* gen = app.add_subcommand("generate", "Emit a random wide isotropic model as JSON");
  add_common(gen, gen_flags);

  CommonFlags learn_flags;
  auto* learn = app.add_subcommand("learn", "Learn a model and score it against the ground truth");
  add_common(learn, learn_flags);

  CommonFlags sample_flags;
  std::size_t aperture = 1;
  std::size_t count = 1000;
  auto* sample = app.add_subcommand("sample", "Write snapshots of a model as CSV");
  add_common(sample, sample_flags);
  sample->add_option("--aperture", aperture, "Snapshot aperture m")->check(CLI::PositiveNumber);
  sample->add_option("--count", count, "Number of snapshots");

  std::size_t lb_k = 2;
  std::size_t lb_b = 3;
  double lb_rho = 2.0;
  std::size_t lb_m = 2;
  std::string lb_out;
  auto* lower = app.add_subcommand("lowerbound", "Hard pair, moments and snapshot total variation as CSV");
  lower->add_option("--k", lb_k, "Spikes per distribution");
  lower->add_option("--b", lb_b, "Aperture of the moment program");
  lower->add_option("--rho", lb_rho, "Scale parameter, >= 2");
  lower->add_option("--m", lb_m, "Aperture for the indistinguishability report");
  lower->add_option("--out", lb_out, "Output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidConfig;
  }

  try {
    if (*gen) return run_generate(gen_flags);
    if (*learn) return run_learn(learn_flags);
    if (*sample) return run_sample(sample_flags, aperture, count);
    if (*lower) {
      emit(lb_out, ml::cmd_lowerbound(lb_k, lb_b, lb_rho, lb_m));
      return kOk;
    }
  } catch (const ml::MatchingError& e) {
    std::cerr << "matching failure: " << e.what() << "\n";
    return kPipelineFailure;
  } catch (const ml::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kPipelineFailure;
  } catch (const ml::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const ml::InputError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kInvalidConfig;
  }
  return kInvalidConfig;
}
