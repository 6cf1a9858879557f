#ifndef HPO_TRAINING_TRAINER_H_
#define HPO_TRAINING_TRAINER_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpo/envs/environment.h"
#include "hpo/nn/optim.h"
#include "hpo/policy/policy.h"
#include "hpo/training/runlog.h"

namespace hpo::training {

enum class Algorithm { kHpoFull, kHpoNoCross, kPpo };
std::string AlgorithmName(Algorithm a);
Algorithm ParseAlgorithm(const std::string& name);

struct TrainConfig {
  Algorithm algorithm = Algorithm::kHpoFull;
  double lr_continuous = 1e-3;
  double lr_ppo = 1e-4;
  double adam_eps = 1e-5;
  double clip_coef = 0.15;
  double value_coef = 0.15;
  double entropy_coef_init = 0.5;
  double entropy_coef_final = 0.0;
  double gae_gamma = 0.99;
  double gae_lambda = 0.96;
  int ppo_epochs = 5;
  int minibatches = 4;
  double kl_stop = 0.015;
  double grad_clip = 5.0;
  std::size_t batch_size = 16;
  std::size_t iterations = 25;
  std::size_t eval_every = 1;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 12345;

  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
  double EntropyCoef(std::size_t iteration) const;
};

// Full-dataset iterations giving exactly total_updates policy updates with
// dataset size H and batch size B (one update per batch).
std::size_t IterationsForUpdates(std::size_t total_updates, std::size_t B,
                                 std::size_t H);

struct Dataset {
  std::vector<envs::Scenario> train;
  std::vector<envs::Scenario> validation;
  std::vector<envs::Scenario> test;
};

// Disjoint seed streams per split.
Dataset BuildDataset(const envs::Environment& env, std::size_t train_size,
                     std::size_t validation_size, std::size_t test_size,
                     std::uint64_t base_seed);

// Mean reported cost of the policy on scenarios: modes sampled with a fixed
// seed, continuous actions at the candidate (mean) values.
double Evaluate(const policy::HybridPolicy& policy,
                const envs::Environment& env,
                const std::vector<envs::Scenario>& scenarios,
                std::uint64_t seed, std::size_t chunk = 256);

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  RunLog log;
  std::int64_t policy_updates = 0;
  double final_validation_loss = 0.0;
  double final_test_loss = 0.0;
  double best_validation_loss = 0.0;
  double test_at_best_validation = 0.0;
  // Training stopped early on non-finite values; the log ends there.
  bool diverged = false;
  std::string error;
};

// Algorithm 2 (HPOFull / HPONoCross) and the PPO baseline. The policy is
// owned by the trainer and stays accessible after a divergence, which Run
// reports through TrainResult::diverged instead of throwing.
class Trainer {
 public:
  using Progress = std::function<void(const EvalRecord&)>;

  Trainer(const envs::Environment& env, TrainConfig config,
          policy::PolicyConfig policy_config, const Dataset& data);

  TrainResult Run(const Progress& progress = {});

  const policy::HybridPolicy& policy() const { return policy_; }
  policy::HybridPolicy& policy() { return policy_; }

  // One training batch (rows of the training set); returns the record.
  UpdateRecord TrainBatch(std::span<const std::size_t> rows,
                          std::size_t iteration);

 private:
  UpdateRecord HpoBatch(std::span<const std::size_t> rows,
                        std::size_t iteration);
  UpdateRecord PpoBatchUpdate(std::span<const std::size_t> rows,
                              std::size_t iteration);
  EvalRecord EvaluateNow(std::size_t iteration) const;

  const envs::Environment& env_;
  TrainConfig config_;
  const Dataset& data_;
  policy::HybridPolicy policy_;
  nn::Adam adam_phi_;
  nn::Adam adam_kappa_;
  nn::Adam adam_psi_;
  nn::Adam adam_log_std_;
  std::int64_t updates_ = 0;
  std::uint64_t batch_counter_ = 0;
};

}  // namespace hpo::training

#endif  // HPO_TRAINING_TRAINER_H_
