#ifndef HPO_ANALYSIS_GRADQUALITY_H_
#define HPO_ANALYSIS_GRADQUALITY_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "hpo/analysis/buckets.h"
#include "hpo/envs/jrp.h"
#include "hpo/estimators/losses.h"
#include "hpo/policy/policy.h"

namespace hpo::analysis {

struct GradQualityConfig {
  // Perturbation of the frozen continuous policy: b = mu + offset + sigma eps.
  double offset = 2.0;
  double sigma = 1.0;
  std::size_t estimation_batch = 512;
  std::size_t batches_per_estimate = 8;  // M
  std::size_t repetitions = 100;         // R
  bool with_replacement = true;
  // Discrete training between estimation epochs.
  std::size_t train_batch = 64;
  std::size_t train_batches_per_epoch = 4;
  std::size_t epochs = 12;
  std::size_t value_pretrain_batches = 20;
  double learning_rate = 1e-3;
  double entropy_coef_init = 0.5;
  double entropy_coef_final = 0.0;
  double gamma = 0.99;
  double lambda = 0.96;
  std::size_t validation_size = 128;
  // Estimate before the first training epoch too.
  bool estimate_at_start = true;
  std::uint64_t seed = 0;
  int run = 0;
};

// One estimation epoch: the per-batch kappa gradients of every estimator,
// all computed from the same rollouts.
struct EstimationEpoch {
  int iteration = 0;
  double validation_loss = 0.0;
  std::vector<std::vector<double>> mixed;
  std::vector<std::vector<double>> pathwise;
  std::vector<std::vector<double>> cross;
  std::vector<std::vector<double>> sf;
};

struct GradQualityResult {
  std::vector<MetricSample> samples;  // gap left at 0; see SetGaps
  std::vector<estimators::GradEstimate> estimates;
};

using GradQualityProgress = std::function<void(const EstimationEpoch&)>;

// Freeze kappa from the checkpoint, perturb it, reinitialize phi, pretrain
// psi alone, then alternate discrete training epochs with frozen-policy
// gradient estimation epochs. Estimators: mixed (pathwise + cross),
// pathwise only, cross only, and score-function (critic baseline, no
// clipping). Metrics are taken over the kappa gradients.
GradQualityResult GradientQualityExperiment(
    const envs::Jrp& env, const policy::HybridPolicy& checkpoint,
    const GradQualityConfig& config,
    const GradQualityProgress& progress = {});

// Metrics of one estimation epoch for the four estimators.
std::vector<MetricSample> EpochMetrics(const EstimationEpoch& epoch,
                                       std::size_t p, int run,
                                       std::size_t R, Rng& rng,
                                       bool with_replacement = true);

}  // namespace hpo::analysis

#endif  // HPO_ANALYSIS_GRADQUALITY_H_
