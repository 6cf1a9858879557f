#ifndef HPO_ESTIMATORS_ROLLOUT_H_
#define HPO_ESTIMATORS_ROLLOUT_H_

#include <span>
#include <vector>

#include "hpo/autodiff/tensor.h"
#include "hpo/envs/environment.h"
#include "hpo/policy/policy.h"
#include "hpo/util/rng.h"

namespace hpo::estimators {

enum class ContinuousMode {
  // b = candidate[x].
  kDeterministic,
  // b = candidate[x] + offset + sigma eps, eps from the scenario.
  kReparam,
  // z = raw candidate[x] + exp(log_std) eps with eps from the sampling RNG,
  // b = transform(z). The PPO baseline's head.
  kGaussian,
};

struct RolloutOptions {
  bool drop_cross = false;
  ContinuousMode continuous = ContinuousMode::kDeterministic;
  policy::ContinuousNoise noise;  // kReparam only
  // If set, [T][n] modes replayed instead of sampled.
  const std::vector<std::vector<int>>* forced_modes = nullptr;
};

// A batch of n trajectories rolled out over T periods. Tensors are on the
// tape of the ParamView used for the rollout (or constants). Per-step
// scalars are stored t-major: index t * n + i.
struct Trajectories {
  std::size_t n = 0;
  std::size_t T = 0;
  std::vector<std::size_t> rows;  // scenario indices
  ContinuousMode continuous = ContinuousMode::kDeterministic;
  policy::ContinuousNoise noise;

  std::vector<ad::Tensor> states;       // T + 1 entries, [n x state_dim]
  std::vector<std::vector<int>> modes;  // T entries of n
  std::vector<ad::Tensor> b;            // executed controls [n x p]
  std::vector<ad::Tensor> raw_samples;  // kGaussian: z [n x p]
  std::vector<ad::Tensor> logp_x;       // [n]
  std::vector<ad::Tensor> costs;        // [n]

  std::vector<double> cost_values;  // T x n
  std::vector<double> values;       // (T + 1) x n, terminal row 0
  std::vector<double> advantages;   // T x n
  std::vector<double> returns;      // T x n

  double cost(std::size_t t, std::size_t i) const {
    return cost_values[t * n + i];
  }
  // Per-trajectory figure of merit as defined by the environment.
  std::vector<double> ReportedCosts(const envs::Environment& env) const;
  double MeanReportedCost(const envs::Environment& env) const;
};

Trajectories Rollout(const policy::HybridPolicy& policy,
                     const policy::ParamView& view,
                     const envs::Environment& env,
                     const std::vector<envs::Scenario>& scenarios,
                     std::span<const std::size_t> rows, Rng& rng,
                     const RolloutOptions& options = {});

// Fills traj.values with V_psi at every visited state (constants) and a
// zero terminal value.
void ComputeValues(const policy::HybridPolicy& policy, Trajectories& traj);

}  // namespace hpo::estimators

#endif  // HPO_ESTIMATORS_ROLLOUT_H_
