#include "hpo/analysis/gradquality.h"

#include <cmath>
#include <stdexcept>

#include "hpo/analysis/metrics.h"
#include "hpo/autodiff/ops.h"
#include "hpo/autodiff/tape.h"
#include "hpo/estimators/rollout.h"
#include "hpo/nn/optim.h"
#include "hpo/training/gae.h"
#include "hpo/training/ppo.h"

namespace hpo::analysis {

using ad::Tensor;
using estimators::ContinuousMode;
using estimators::RolloutOptions;
using estimators::Trajectories;

namespace {

std::vector<std::size_t> Range(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

class Experiment {
 public:
  Experiment(const envs::Jrp& env, const policy::HybridPolicy& checkpoint,
             const GradQualityConfig& c)
      : env_(env),
        c_(c),
        policy_(Fresh(checkpoint, c.seed)),
        adam_phi_("phi", {.learning_rate = c.learning_rate}),
        adam_psi_("psi", {.learning_rate = c.learning_rate}) {
    options_.continuous = ContinuousMode::kReparam;
    options_.noise = {c.sigma, c.offset};
    validation_ = Scenarios(c.validation_size, 1);
  }

  GradQualityResult Run(const GradQualityProgress& progress) {
    GradQualityResult out;
    PretrainValue();
    Rng metric_rng(c_.seed, 77);
    auto estimate = [&](int iteration) {
      EstimationEpoch e = Estimate(iteration);
      for (std::size_t m = 0; m < e.mixed.size(); ++m) {
        const std::int64_t id = iteration * 1000 + static_cast<int>(m);
        using K = estimators::EstimatorKind;
        out.estimates.push_back({K::kMixedFull, "kappa", c_.estimation_batch,
                                 id, e.mixed[m]});
        out.estimates.push_back({K::kPathwiseOnly, "kappa",
                                 c_.estimation_batch, id, e.pathwise[m]});
        out.estimates.push_back({K::kCrossOnly, "kappa", c_.estimation_batch,
                                 id, e.cross[m]});
        out.estimates.push_back({K::kSf, "kappa", c_.estimation_batch, id,
                                 e.sf[m]});
      }
      for (auto& s : EpochMetrics(e, env_.params().p, c_.run, c_.repetitions,
                                  metric_rng, c_.with_replacement)) {
        out.samples.push_back(s);
      }
      if (progress) progress(e);
    };
    if (c_.estimate_at_start) estimate(0);
    for (std::size_t epoch = 0; epoch < c_.epochs; ++epoch) {
      const double frac = c_.epochs > 1 ? static_cast<double>(epoch) /
                                              static_cast<double>(c_.epochs - 1)
                                        : 0.0;
      const double beta = c_.entropy_coef_init +
                          (c_.entropy_coef_final - c_.entropy_coef_init) * frac;
      for (std::size_t k = 0; k < c_.train_batches_per_epoch; ++k) {
        TrainDiscrete(beta);
      }
      estimate(static_cast<int>(epoch + 1));
    }
    return out;
  }

 private:
  static policy::HybridPolicy Fresh(const policy::HybridPolicy& checkpoint,
                                    std::uint64_t seed) {
    policy::PolicyConfig pc = checkpoint.config();
    pc.seed = SplitMix64(seed + 0x9e37);
    policy::HybridPolicy fresh(pc);
    // Keep the trained continuous network and demand estimate.
    fresh.continuous() = checkpoint.continuous();
    if (checkpoint.normalizer().initialized()) {
      fresh.normalizer().Set(checkpoint.normalizer().value());
    }
    return fresh;
  }

  std::vector<envs::Scenario> Scenarios(std::size_t count,
                                        std::uint64_t stream) {
    const std::uint64_t seed = SplitMix64(c_.seed * 1000003 + stream);
    std::vector<envs::Scenario> s = env_.GenerateScenarios(count, seed);
    envs::AttachReparamNoise(s, env_.action_dim(), seed + 1);
    return s;
  }

  // Costs are scaled by one constant for the whole experiment.
  void Advantages(Trajectories& traj) {
    estimators::ComputeValues(policy_, traj);
    const training::GaeResult g = training::ComputeGae(
        traj.cost_values, traj.values, traj.T, traj.n, c_.gamma, c_.lambda,
        cost_scale_);
    traj.advantages = g.advantages;
    traj.returns = g.returns;
  }

  void PretrainValue() {
    for (std::size_t k = 0; k < c_.value_pretrain_batches; ++k) {
      const auto scen = Scenarios(c_.train_batch, 100 + counter_++);
      Rng rng(c_.seed, 200 + counter_);
      Trajectories traj = estimators::Rollout(
          policy_, policy_.Constants(), env_, scen, Range(scen.size()), rng,
          options_);
      if (k == 0) cost_scale_ = 1.0 / training::CostScaleStd(traj.cost_values);
      Advantages(traj);
      // Value regression only: phi fixed, returns as targets.
      const training::PpoBatch batch = training::FlattenTrajectories(
          traj, env_.state_dim(), env_.action_dim(), traj.advantages,
          traj.returns);
      const Tensor S = Tensor::Matrix(batch.size, batch.state_dim,
                                      batch.states);
      for (int step = 0; step < 20; ++step) {
        ad::Tape tape;
        const policy::ParamView v = policy_.Bind(tape, false, false, true);
        const Tensor loss = ad::Mean(ad::Square(
            policy_.Value(v, S) - Tensor::Vector(batch.returns)));
        std::vector<double> g = tape.Backward(loss).Flat(v.psi);
        nn::ClipGlobalNorm(g, 5.0);
        std::vector<Tensor> params;
        for (const Tensor& t : v.psi) params.emplace_back(t.shape(), t.ToVector());
        adam_psi_.Step(params, g);
        training::StoreParams(policy_.value(), params);
      }
    }
  }

  void TrainDiscrete(double beta) {
    const auto scen = Scenarios(c_.train_batch, 100 + counter_++);
    Rng rng(c_.seed, 200 + counter_);
    Trajectories traj = estimators::Rollout(
        policy_, policy_.Constants(), env_, scen, Range(scen.size()), rng,
        options_);
    Advantages(traj);
    const training::PpoBatch batch = training::FlattenTrajectories(
        traj, env_.state_dim(), env_.action_dim(), traj.advantages,
        traj.returns);
    training::PpoOptions po;
    po.entropy_coef = beta;
    training::PpoUpdate(policy_, batch, po, {&adam_phi_, &adam_psi_}, rng);
  }

  double Validation() {
    const policy::ParamView v = policy_.Constants();
    Rng rng(c_.seed, 999);
    const Trajectories traj = estimators::Rollout(
        policy_, v, env_, validation_, Range(validation_.size()), rng,
        options_);
    return traj.MeanReportedCost(env_);
  }

  EstimationEpoch Estimate(int iteration) {
    EstimationEpoch e;
    e.iteration = iteration;
    e.validation_loss = Validation();
    for (std::size_t m = 0; m < c_.batches_per_estimate; ++m) {
      const auto scen = Scenarios(c_.estimation_batch, 5000 + counter_++);
      Rng rng(c_.seed, 6000 + counter_);
      ad::Tape tape;
      const policy::ParamView v = policy_.Bind(tape, true, true, false);
      Trajectories traj = estimators::Rollout(
          policy_, v, env_, scen, Range(scen.size()), rng, options_);
      Advantages(traj);
      const estimators::SplitTerms terms =
          estimators::SplitGradTerms(tape, v, traj, c_.gamma, cost_scale_);
      e.mixed.push_back(terms.mixed);
      e.pathwise.push_back(terms.pathwise);
      e.cross.push_back(terms.cross);
      e.sf.push_back(
          tape.Backward(estimators::SfLoss(policy_, v, traj, c_.gamma))
              .Flat(v.kappa));
    }
    return e;
  }

  const envs::Jrp& env_;
  GradQualityConfig c_;
  policy::HybridPolicy policy_;
  nn::Adam adam_phi_;
  nn::Adam adam_psi_;
  RolloutOptions options_;
  std::vector<envs::Scenario> validation_;
  double cost_scale_ = 1.0;
  std::uint64_t counter_ = 0;
};

}  // namespace

std::vector<MetricSample> EpochMetrics(const EstimationEpoch& epoch,
                                       std::size_t p, int run, std::size_t R,
                                       Rng& rng, bool with_replacement) {
  const std::pair<const char*, const std::vector<std::vector<double>>*>
      kinds[] = {{"mixed_full", &epoch.mixed},
                 {"pathwise_only", &epoch.pathwise},
                 {"cross_only", &epoch.cross},
                 {"sf", &epoch.sf}};
  std::vector<MetricSample> out;
  for (const auto& [name, batches] : kinds) {
    const BatchMetrics m =
        ComputeBatchMetrics(*batches, epoch.mixed, R, rng, with_replacement);
    MetricSample s;
    s.p = p;
    s.run = run;
    s.iteration = epoch.iteration;
    s.validation_loss = epoch.validation_loss;
    s.estimator = name;
    s.signal_sq = m.signal_sq;
    s.rmse_sq = m.rmse_sq;
    s.align = m.align;
    s.crossalign = m.crossalign;
    s.R = R;
    out.push_back(s);
  }
  return out;
}

GradQualityResult GradientQualityExperiment(
    const envs::Jrp& env, const policy::HybridPolicy& checkpoint,
    const GradQualityConfig& config, const GradQualityProgress& progress) {
  const auto& pc = checkpoint.config();
  if (pc.kind != envs::EnvKind::kJrp || pc.state_dim != env.state_dim() ||
      pc.action_dim != env.action_dim() || pc.num_modes != env.num_modes()) {
    throw std::invalid_argument(
        "gradquality: checkpoint does not match the environment");
  }
  if (config.batches_per_estimate < 2) {
    throw std::invalid_argument("gradquality: need at least 2 batches");
  }
  Experiment ex(env, checkpoint, config);
  return ex.Run(progress);
}

}  // namespace hpo::analysis
