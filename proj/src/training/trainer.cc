#include "hpo/training/trainer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hpo/autodiff/ops.h"
#include "hpo/autodiff/tape.h"
#include "hpo/estimators/losses.h"
#include "hpo/estimators/rollout.h"
#include "hpo/training/gae.h"
#include "hpo/training/ppo.h"

namespace hpo::training {

using ad::Tensor;
using estimators::ContinuousMode;
using estimators::RolloutOptions;
using estimators::Trajectories;

std::string AlgorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::kHpoFull: return "hpo_full";
    case Algorithm::kHpoNoCross: return "hpo_nocross";
    case Algorithm::kPpo: return "ppo";
  }
  return "?";
}

Algorithm ParseAlgorithm(const std::string& name) {
  if (name == "hpo_full" || name == "hpo") return Algorithm::kHpoFull;
  if (name == "hpo_nocross") return Algorithm::kHpoNoCross;
  if (name == "ppo") return Algorithm::kPpo;
  throw std::invalid_argument("unknown algorithm '" + name +
                              "' (expected hpo_full, hpo_nocross or ppo)");
}

void TrainConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train config: " + field + " " + why);
  };
  if (!(lr_continuous > 0)) fail("lr_continuous", "must be positive");
  if (!(lr_ppo > 0)) fail("lr_ppo", "must be positive");
  if (!(adam_eps > 0)) fail("adam_eps", "must be positive");
  if (!(clip_coef > 0 && clip_coef < 1)) fail("clip_coef", "must be in (0, 1)");
  if (value_coef < 0) fail("value_coef", "must be non-negative");
  if (entropy_coef_init < 0 || entropy_coef_final < 0) {
    fail("entropy_coef", "must be non-negative");
  }
  if (!(gae_gamma > 0 && gae_gamma <= 1)) fail("gae_gamma", "must be in (0, 1]");
  if (!(gae_lambda >= 0 && gae_lambda <= 1)) {
    fail("gae_lambda", "must be in [0, 1]");
  }
  if (ppo_epochs < 1) fail("ppo_epochs", "must be >= 1");
  if (minibatches < 1) fail("minibatches", "must be >= 1");
  if (!(kl_stop > 0)) fail("kl_stop", "must be positive");
  if (!(grad_clip > 0)) fail("grad_clip", "must be positive");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (eval_every < 1) fail("eval_every", "must be >= 1");
}

double TrainConfig::EntropyCoef(std::size_t iteration) const {
  if (iterations <= 1) return entropy_coef_init;
  const double frac = static_cast<double>(std::min(iteration, iterations - 1)) /
                      static_cast<double>(iterations - 1);
  return entropy_coef_init + (entropy_coef_final - entropy_coef_init) * frac;
}

std::size_t IterationsForUpdates(std::size_t total_updates, std::size_t B,
                                 std::size_t H) {
  if (B == 0 || H < B || H % B != 0) {
    throw std::invalid_argument("dataset size must be a positive multiple of "
                                "the batch size");
  }
  const std::size_t per_iter = H / B;
  if (total_updates % per_iter != 0) {
    throw std::invalid_argument(
        "update budget " + std::to_string(total_updates) +
        " is not a whole number of iterations of " + std::to_string(per_iter) +
        " batches");
  }
  return total_updates / per_iter;
}

Dataset BuildDataset(const envs::Environment& env, std::size_t train_size,
                     std::size_t validation_size, std::size_t test_size,
                     std::uint64_t base_seed) {
  Dataset d;
  d.train = env.GenerateScenarios(
      train_size, envs::SplitSeed(base_seed, envs::Split::kTrain));
  d.validation = env.GenerateScenarios(
      validation_size, envs::SplitSeed(base_seed, envs::Split::kValidation));
  d.test = env.GenerateScenarios(
      test_size, envs::SplitSeed(base_seed, envs::Split::kTest));
  return d;
}

double Evaluate(const policy::HybridPolicy& policy,
                const envs::Environment& env,
                const std::vector<envs::Scenario>& scenarios,
                std::uint64_t seed, std::size_t chunk) {
  if (scenarios.empty()) {
    throw std::invalid_argument("evaluate: empty scenario set");
  }
  chunk = std::max<std::size_t>(chunk, 1);
  const policy::ParamView v = policy.Constants();
  Rng rng(seed, 0);
  double total = 0.0;
  for (std::size_t lo = 0; lo < scenarios.size(); lo += chunk) {
    const std::size_t hi = std::min(scenarios.size(), lo + chunk);
    std::vector<std::size_t> rows(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) rows[i - lo] = i;
    const Trajectories traj =
        estimators::Rollout(policy, v, env, scenarios, rows, rng);
    for (double c : traj.ReportedCosts(env)) total += c;
  }
  return total / static_cast<double>(scenarios.size());
}

namespace {

nn::AdamOptions AdamFor(const TrainConfig& c) {
  nn::AdamOptions o;
  o.learning_rate = c.algorithm == Algorithm::kPpo ? c.lr_ppo : c.lr_continuous;
  o.epsilon = c.adam_eps;
  return o;
}

double StepGroup(nn::Adam& adam, nn::Mlp& net, const std::vector<Tensor>& view,
                 std::vector<double> grad, double clip) {
  const double norm = nn::ClipGlobalNorm(grad, clip);
  std::vector<Tensor> params;
  for (const Tensor& t : view) params.emplace_back(t.shape(), t.ToVector());
  adam.Step(params, grad);
  StoreParams(net, params);
  return norm;
}

}  // namespace

Trainer::Trainer(const envs::Environment& env, TrainConfig config,
                 policy::PolicyConfig policy_config, const Dataset& data)
    : env_(env),
      config_(std::move(config)),
      data_(data),
      policy_((config_.Validate(), std::move(policy_config))),
      adam_phi_("phi", AdamFor(config_)),
      adam_kappa_("kappa", AdamFor(config_)),
      adam_psi_("psi", AdamFor(config_)),
      adam_log_std_("log_std", AdamFor(config_)) {
  if (data_.train.size() < config_.batch_size) {
    throw std::invalid_argument("training set smaller than one batch");
  }
  if (data_.validation.empty() || data_.test.empty()) {
    throw std::invalid_argument("validation and test sets must be non-empty");
  }
}

UpdateRecord Trainer::TrainBatch(std::span<const std::size_t> rows,
                                 std::size_t iteration) {
  auto& norm = policy_.normalizer();
  if (norm.enabled()) {
    norm.Update(policy::Normalizer::BatchMean(data_.train, rows));
  }
  try {
    UpdateRecord rec = config_.algorithm == Algorithm::kPpo
                           ? PpoBatchUpdate(rows, iteration)
                           : HpoBatch(rows, iteration);
    rec.update = ++updates_;
    rec.iteration = iteration;
    return rec;
  } catch (const DivergenceError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw DivergenceError("training diverged at policy update " +
                          std::to_string(updates_ + 1) + ": " + e.what());
  }
}

UpdateRecord Trainer::HpoBatch(std::span<const std::size_t> rows,
                               std::size_t iteration) {
  const double gamma = config_.gae_gamma;
  const double beta = config_.EntropyCoef(iteration);
  const std::size_t d = env_.state_dim();
  const std::size_t p = env_.action_dim();
  Rng rng(config_.seed, 1000 + batch_counter_++);

  ad::Tape tape;
  const policy::ParamView v = policy_.Bind(tape, true, true, false);
  RolloutOptions ro;
  ro.drop_cross = config_.algorithm == Algorithm::kHpoNoCross;
  Trajectories traj =
      estimators::Rollout(policy_, v, env_, data_.train, rows, rng, ro);
  estimators::ComputeValues(policy_, traj);
  const double scale = 1.0 / CostScaleStd(traj.cost_values);
  GaeResult gae = ComputeGae(traj.cost_values, traj.values, traj.T, traj.n,
                             gamma, config_.gae_lambda, scale);
  traj.advantages = gae.advantages;
  Standardize(traj.advantages);
  traj.returns = gae.returns;

  // Entropy bonus on the discrete head only, with detached states.
  Tensor entropy = Tensor::Scalar(0.0);
  for (std::size_t t = 0; t < traj.T; ++t) {
    entropy = entropy + ad::Mean(policy::DiscreteEntropy(
                            policy_.Logits(v, ad::StopGrad(traj.states[t]))));
  }
  entropy = entropy / static_cast<double>(traj.T);
  const Tensor mixed = estimators::MixedLoss(traj, gamma, scale);
  const Tensor loss = mixed - beta * entropy;
  if (!std::isfinite(loss.item())) {
    throw std::runtime_error("non-finite mixed loss");
  }
  const ad::Gradients g = tape.Backward(loss);

  UpdateRecord rec;
  rec.train_loss = traj.MeanReportedCost(env_);
  rec.entropy_coef = beta;
  rec.grad_norm_kappa = StepGroup(adam_kappa_, policy_.continuous(), v.kappa,
                                  g.Flat(v.kappa), config_.grad_clip);
  rec.grad_norm_phi = StepGroup(adam_phi_, policy_.discrete(), v.phi,
                                g.Flat(v.phi), config_.grad_clip);

  const PpoBatch batch = FlattenTrajectories(traj, d, p, gae.advantages, gae.returns);
  PpoOptions po;
  po.clip_coef = config_.clip_coef;
  po.value_coef = config_.value_coef;
  po.entropy_coef = beta;
  po.epochs = config_.ppo_epochs;
  po.minibatches = config_.minibatches;
  po.kl_stop = config_.kl_stop;
  po.grad_clip = config_.grad_clip;
  po.joint = false;
  const PpoStats st =
      PpoUpdate(policy_, batch, po, {&adam_phi_, &adam_psi_}, rng);
  rec.surrogate = mixed.item();
  rec.entropy = st.entropy;
  rec.approx_kl = st.approx_kl;
  rec.ppo_epochs = st.epochs_run;
  rec.grad_norm_psi = st.grad_norm_psi;
  return rec;
}

UpdateRecord Trainer::PpoBatchUpdate(std::span<const std::size_t> rows,
                                     std::size_t iteration) {
  const double beta = config_.EntropyCoef(iteration);
  const std::size_t d = env_.state_dim();
  const std::size_t p = env_.action_dim();
  Rng rng(config_.seed, 1000 + batch_counter_++);

  const policy::ParamView v = policy_.Constants();
  RolloutOptions ro;
  ro.continuous = ContinuousMode::kGaussian;
  Trajectories traj =
      estimators::Rollout(policy_, v, env_, data_.train, rows, rng, ro);
  estimators::ComputeValues(policy_, traj);
  const double scale = 1.0 / CostScaleStd(traj.cost_values);
  GaeResult gae = ComputeGae(traj.cost_values, traj.values, traj.T, traj.n,
                             config_.gae_gamma, config_.gae_lambda, scale);

  PpoBatch batch = FlattenTrajectories(traj, d, p, gae.advantages, gae.returns);
  batch.raw_samples.reserve(batch.size * p);
  for (std::size_t t = 0; t < traj.T; ++t) {
    const Tensor mean = ad::GatherBlocks(
        policy_.RawCandidates(v, traj.states[t]), traj.modes[t], p);
    const Tensor lpb =
        policy::GaussianLogProb(traj.raw_samples[t], mean, v.log_std);
    for (std::size_t i = 0; i < traj.n; ++i) {
      batch.old_logp[t * traj.n + i] += lpb.at(i);
    }
    auto z = traj.raw_samples[t].data();
    batch.raw_samples.insert(batch.raw_samples.end(), z.begin(), z.end());
  }

  PpoOptions po;
  po.clip_coef = config_.clip_coef;
  po.value_coef = config_.value_coef;
  po.entropy_coef = beta;
  po.epochs = config_.ppo_epochs;
  po.minibatches = config_.minibatches;
  po.kl_stop = config_.kl_stop;
  po.grad_clip = config_.grad_clip;
  po.joint = true;
  const PpoStats st = PpoUpdate(
      policy_, batch, po, {&adam_phi_, &adam_psi_, &adam_kappa_, &adam_log_std_},
      rng);

  UpdateRecord rec;
  rec.train_loss = traj.MeanReportedCost(env_);
  rec.entropy_coef = beta;
  rec.surrogate = st.policy_loss;
  rec.entropy = st.entropy;
  rec.approx_kl = st.approx_kl;
  rec.ppo_epochs = st.epochs_run;
  rec.grad_norm_phi = st.grad_norm_phi;
  rec.grad_norm_kappa = st.grad_norm_kappa;
  rec.grad_norm_psi = st.grad_norm_psi;
  return rec;
}

EvalRecord Trainer::EvaluateNow(std::size_t iteration) const {
  EvalRecord e;
  e.update = updates_;
  e.iteration = iteration;
  e.validation_loss =
      Evaluate(policy_, env_, data_.validation, config_.eval_seed);
  e.test_loss = Evaluate(policy_, env_, data_.test, config_.eval_seed + 1);
  return e;
}

TrainResult Trainer::Run(const Progress& progress) {
  TrainResult result;
  const std::size_t H = data_.train.size();
  const std::size_t B = config_.batch_size;
  const std::size_t batches = H / B;

  // Before the first update, initialize the demand estimate so the
  // evaluation at update 0 sees sensible features.
  auto& norm = policy_.normalizer();
  if (norm.enabled() && !norm.initialized()) {
    std::vector<std::size_t> first(B);
    const std::vector<int> perm0 =
        Rng(config_.seed, 500).Permutation(static_cast<int>(H));
    for (std::size_t i = 0; i < B; ++i) first[i] = perm0[i];
    norm.Set(policy::Normalizer::BatchMean(data_.train, first));
  }

  auto eval = [&](std::size_t it) {
    const EvalRecord e = EvaluateNow(it);
    result.log.evals.push_back(e);
    if (progress) progress(e);
  };
  eval(0);
  try {
    for (std::size_t it = 0; it < config_.iterations; ++it) {
      const std::vector<int> perm =
          Rng(config_.seed, 500 + it).Permutation(static_cast<int>(H));
      std::vector<std::size_t> rows(B);
      for (std::size_t k = 0; k < batches; ++k) {
        for (std::size_t i = 0; i < B; ++i) rows[i] = perm[k * B + i];
        result.log.updates.push_back(TrainBatch(rows, it));
      }
      if ((it + 1) % config_.eval_every == 0 ||
          it + 1 == config_.iterations) {
        eval(it + 1);
      }
    }
  } catch (const DivergenceError& e) {
    // Keep what was logged; the caller decides what to do with the run.
    result.diverged = true;
    result.error = e.what();
  }
  result.policy_updates = updates_;
  const EvalRecord& last = result.log.evals.back();
  result.final_validation_loss = last.validation_loss;
  result.final_test_loss = last.test_loss;
  const EvalRecord* best = result.log.BestValidationRecord();
  result.best_validation_loss = best->validation_loss;
  result.test_at_best_validation = best->test_loss;
  return result;
}

}  // namespace hpo::training
