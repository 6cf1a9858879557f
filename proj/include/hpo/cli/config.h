#ifndef HPO_CLI_CONFIG_H_
#define HPO_CLI_CONFIG_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hpo/analysis/gradquality.h"
#include "hpo/envs/environment.h"
#include "hpo/envs/jrp.h"
#include "hpo/policy/policy.h"
#include "hpo/training/trainer.h"
#include "json.hpp"

namespace hpo::cli {

// Everything a run needs. Defaults follow the training stack used for the
// benchmarks except the network width (see README).
struct ExperimentConfig {
  std::string env = "jrp";  // jrp | slqr
  std::size_t p = 1;
  // Training sweeps over these when non-empty (one subdirectory per p).
  std::vector<std::size_t> p_list;
  std::size_t J = 1;             // slqr modes
  std::size_t T = 0;             // 0: env default (jrp 100, slqr 20)
  bool identical = false;        // jrp: u = 9, h = 1, mu = 10
  std::int64_t instance_seed = -1;  // -1: use the trial seed
  double noise_std = 0.0;        // slqr process noise

  training::TrainConfig train;
  // > 0: derive iterations so that exactly this many updates happen.
  std::int64_t updates = 0;
  std::vector<std::size_t> hidden = {64, 64};

  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::size_t train_size = 1024;
  std::size_t validation_size = 256;
  std::size_t test_size = 256;
  std::string output_dir = "runs";

  // gradquality
  std::vector<std::size_t> gq_p = {3};
  std::size_t gq_runs = 1;
  std::size_t gq_T = 100;
  std::int64_t gq_pretrain_updates = 800;
  double gq_bucket_width = 0.05;
  double gq_bucket_max = 0.35;
  analysis::GradQualityConfig gq;

  // report
  std::vector<double> targets = {0.05, 0.10, 0.20, 0.30};

  // Throws std::invalid_argument naming the field and the constraint.
  void Validate() const;
  std::size_t Iterations() const;
  std::uint64_t TrialSeed(std::size_t trial) const { return seed + trial; }
};

nlohmann::json ToJson(const ExperimentConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig FromJson(const nlohmann::json& j);
ExperimentConfig LoadConfig(const std::string& path);

// Named starting points: desk-jrp, desk-slqr, desk-gradquality, full-jrp,
// full-slqr, full-gradquality.
std::vector<std::string> PresetNames();
ExperimentConfig Preset(const std::string& name);

std::unique_ptr<envs::Environment> BuildEnv(const ExperimentConfig& c,
                                            std::size_t p,
                                            std::uint64_t trial_seed);
policy::PolicyConfig BuildPolicyConfig(const ExperimentConfig& c,
                                       const envs::Environment& env,
                                       std::uint64_t trial_seed);
envs::JrpParams GradQualityParams(const ExperimentConfig& c, std::size_t p);

}  // namespace hpo::cli

#endif  // HPO_CLI_CONFIG_H_
