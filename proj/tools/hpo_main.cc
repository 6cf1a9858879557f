// Command-line driver: train, gradcheck, gradquality, riccati, report.
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "hpo/cli/commands.h"
#include "hpo/cli/config.h"

namespace {

using hpo::cli::ExperimentConfig;

// Shared config flags. Values land in optionals and are applied on top of
// the preset / config file, so an unset flag never clobbers the file.
struct Overrides {
  std::string config_path;
  std::string preset;
  std::optional<std::string> env, algo, out;
  std::optional<std::size_t> p, J, B, T, trials, iterations;
  std::optional<std::int64_t> updates, instance_seed;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::size_t>> hidden, p_list;
  std::optional<double> noise;

  void Register(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file");
    app->add_option("--preset", preset, "named preset (see `presets`)");
    app->add_option("--env", env, "jrp | slqr");
    app->add_option("--p", p, "continuous action dimension");
    app->add_option("--p-list", p_list, "sweep over these p");
    app->add_option("--J", J, "S-LQR modes");
    app->add_option("--B", B, "batch size (trajectories)");
    app->add_option("--T", T, "horizon (0 = default)");
    app->add_option("--algo", algo, "hpo_full | hpo_nocross | ppo");
    app->add_option("--seed", seed, "base seed; trial k uses seed + k");
    app->add_option("--instance-seed", instance_seed,
                    "environment instance seed (-1 = trial seed)");
    app->add_option("--trials", trials);
    app->add_option("--updates", updates, "total policy updates");
    app->add_option("--iterations", iterations,
                    "full-dataset iterations (when updates = 0)");
    app->add_option("--hidden", hidden, "hidden layer widths");
    app->add_option("--noise-std", noise, "S-LQR process noise");
    app->add_option("--out", out, "output directory");
  }

  ExperimentConfig Build() const {
    ExperimentConfig c;
    if (!config_path.empty()) {
      c = hpo::cli::LoadConfig(config_path);
    } else if (!preset.empty()) {
      c = hpo::cli::Preset(preset);
    }
    if (!config_path.empty() && !preset.empty()) {
      throw std::invalid_argument("give --config or --preset, not both");
    }
    if (env) c.env = *env;
    if (p) c.p = *p;
    if (p_list) c.p_list = *p_list;
    if (J) c.J = *J;
    if (B) c.train.batch_size = *B;
    if (T) c.T = *T;
    if (algo) c.train.algorithm = hpo::training::ParseAlgorithm(*algo);
    if (seed) c.seed = *seed;
    if (instance_seed) c.instance_seed = *instance_seed;
    if (trials) c.trials = *trials;
    if (updates) c.updates = *updates;
    if (iterations) {
      c.train.iterations = *iterations;
      if (!updates) c.updates = 0;
    }
    if (hidden) c.hidden = *hidden;
    if (noise) c.noise_std = *noise;
    if (out) c.output_dir = *out;
    c.Validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid policy optimization toolkit"};
  app.require_subcommand(1);

  Overrides train_o;
  auto* train = app.add_subcommand("train", "train policies, write logs");
  train_o.Register(train);
  bool dump_config = false;
  train->add_flag("--dump-config", dump_config,
                  "print the resolved config and exit");

  hpo::cli::GradcheckOptions gc;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference and toy-MDP checks");
  gradcheck->add_option("--seed", gc.seed);
  gradcheck->add_option("--toy-samples", gc.toy_samples);
  gradcheck->add_option("--corrupt-backward", gc.corrupt_op,
                        "negative control: op whose backward rule is scaled");
  gradcheck->add_option("--corrupt-scale", gc.corrupt_scale);

  Overrides gq_o;
  std::string gq_checkpoint;
  bool gq_pretrain = false;
  std::optional<std::vector<std::size_t>> gq_p;
  std::optional<std::size_t> gq_epochs, gq_runs, gq_m;
  auto* gq = app.add_subcommand("gradquality", "gradient-quality diagnostics");
  gq_o.Register(gq);
  gq->add_option("--checkpoint", gq_checkpoint, "trained policy (one p)");
  gq->add_flag("--pretrain", gq_pretrain, "train the checkpoint first");
  gq->add_option("--gq-p", gq_p, "product counts");
  gq->add_option("--epochs", gq_epochs, "discrete training epochs");
  gq->add_option("--runs", gq_runs, "independent runs per p");
  gq->add_option("--batches", gq_m, "batch estimates per epoch (M)");

  Overrides ric_o;
  std::string ric_checkpoint;
  auto* ric = app.add_subcommand("riccati", "single-mode Riccati baselines");
  ric_o.Register(ric);
  ric->add_option("--checkpoint", ric_checkpoint, "HPO policy to compare");

  std::vector<std::string> report_dirs;
  std::vector<double> report_targets = {0.05, 0.10, 0.20, 0.30};
  std::string report_out;
  auto* report = app.add_subcommand("report", "updates-to-target medians");
  report->add_option("dirs", report_dirs, "run directories")->required();
  report->add_option("--targets", report_targets, "target gaps (fractions)");
  report->add_option("--csv", report_out, "also write the table here");

  auto* presets = app.add_subcommand("presets", "list presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const ExperimentConfig c = train_o.Build();
      if (dump_config) {
        std::cout << hpo::cli::ToJson(c).dump(2) << "\n";
        return hpo::cli::kOk;
      }
      const auto outcomes = hpo::cli::RunTrain(c, std::cout);
      for (const auto& o : outcomes) {
        if (o.summary.at("diverged").get<bool>()) return hpo::cli::kFailed;
      }
      return hpo::cli::kOk;
    }
    if (gradcheck->parsed()) {
      return hpo::cli::RunGradcheck(gc, std::cout).passed ? hpo::cli::kOk
                                                          : hpo::cli::kFailed;
    }
    if (gq->parsed()) {
      ExperimentConfig c = gq_o.Build();
      if (gq_p) c.gq_p = *gq_p;
      if (gq_epochs) c.gq.epochs = *gq_epochs;
      if (gq_runs) c.gq_runs = *gq_runs;
      if (gq_m) c.gq.batches_per_estimate = *gq_m;
      const auto res =
          hpo::cli::RunGradQuality(c, gq_checkpoint, gq_pretrain, std::cout);
      hpo::analysis::WriteBucketCsv(std::cout, res.table);
      return hpo::cli::kOk;
    }
    if (ric->parsed()) {
      const ExperimentConfig c = ric_o.Build();
      const auto rows = hpo::cli::RunRiccati(c, ric_checkpoint, std::cerr);
      hpo::cli::WriteRiccatiCsv(std::cout, rows);
      return hpo::cli::kOk;
    }
    if (report->parsed()) {
      const auto rows = hpo::cli::RunReport(report_dirs, report_targets);
      hpo::cli::WriteReportCsv(std::cout, rows);
      if (!report_out.empty()) {
        std::ofstream f(report_out);
        hpo::cli::WriteReportCsv(f, rows);
      }
      return hpo::cli::kOk;
    }
    if (presets->parsed()) {
      for (const auto& n : hpo::cli::PresetNames()) std::cout << n << "\n";
      return hpo::cli::kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hpo::cli::kFailed;
  }
  return hpo::cli::kOk;
}
