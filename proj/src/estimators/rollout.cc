#include "hpo/estimators/rollout.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hpo/autodiff/ops.h"

namespace hpo::estimators {

using ad::Tensor;

namespace {

void CheckFinite(const Tensor& t, const char* what, std::size_t step) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("rollout: non-finite ") + what +
                               " at step " + std::to_string(step));
    }
  }
}

}  // namespace

Trajectories Rollout(const policy::HybridPolicy& policy,
                     const policy::ParamView& view,
                     const envs::Environment& env,
                     const std::vector<envs::Scenario>& scenarios,
                     std::span<const std::size_t> rows, Rng& rng,
                     const RolloutOptions& options) {
  const std::size_t T = env.horizon();
  const std::size_t n = rows.size();
  const std::size_t p = env.action_dim();
  if (policy.action_dim() != p || policy.num_modes() != env.num_modes() ||
      policy.config().state_dim != env.state_dim()) {
    throw std::invalid_argument("rollout: policy does not match environment");
  }
  if (options.forced_modes != nullptr && options.forced_modes->size() < T) {
    throw std::invalid_argument("rollout: forced mode sequence too short");
  }
  Trajectories traj;
  traj.n = n;
  traj.T = T;
  traj.rows.assign(rows.begin(), rows.end());
  traj.continuous = options.continuous;
  traj.noise = options.noise;
  traj.cost_values.reserve(T * n);
  traj.states.push_back(envs::StackInitialStates(scenarios, rows));

  for (std::size_t t = 0; t < T; ++t) {
    const Tensor& s = traj.states.back();
    Tensor eps;
    const Tensor* eps_ptr = nullptr;
    if (options.continuous == ContinuousMode::kReparam) {
      eps = envs::StackReparamNoise(scenarios, rows, t);
      eps_ptr = &eps;
    }
    const policy::ContinuousNoise noise =
        options.continuous == ContinuousMode::kReparam ? options.noise
                                                       : policy::ContinuousNoise{};
    policy::ActResult a =
        options.forced_modes != nullptr
            ? policy.ActWithModes(view, s, (*options.forced_modes)[t],
                                  options.drop_cross, eps_ptr, noise)
            : policy.Act(view, s, rng, options.drop_cross, eps_ptr, noise);
    if (options.continuous == ContinuousMode::kGaussian) {
      const Tensor mu = ad::GatherBlocks(policy.RawCandidates(view, s),
                                         a.modes, p);
      std::vector<double> e(n * p);
      for (double& v : e) v = rng.Normal();
      const Tensor z = mu + ad::Exp(view.log_std) * Tensor({n, p}, std::move(e));
      a.b = policy.Transform(z);
      traj.raw_samples.push_back(z);
    }
    const envs::StepOutput out =
        env.Step(s, a.modes, a.b, envs::StackDisturbances(scenarios, rows, t));
    CheckFinite(out.next_state, "state", t);
    CheckFinite(out.cost, "cost", t);
    traj.modes.push_back(std::move(a.modes));
    traj.b.push_back(a.b);
    traj.logp_x.push_back(a.logp);
    traj.costs.push_back(out.cost);
    traj.cost_values.insert(traj.cost_values.end(), out.cost.data().begin(),
                            out.cost.data().end());
    traj.states.push_back(out.next_state);
  }
  return traj;
}

void ComputeValues(const policy::HybridPolicy& policy, Trajectories& traj) {
  const policy::ParamView constants = policy.Constants();
  traj.values.assign((traj.T + 1) * traj.n, 0.0);
  for (std::size_t t = 0; t < traj.T; ++t) {
    const Tensor v = policy.Value(constants, ad::StopGrad(traj.states[t]));
    std::copy(v.data().begin(), v.data().end(),
              traj.values.begin() + static_cast<std::ptrdiff_t>(t * traj.n));
  }
}

std::vector<double> Trajectories::ReportedCosts(
    const envs::Environment& env) const {
  std::vector<double> out(n);
  std::vector<double> seq(T);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) seq[t] = cost(t, i);
    out[i] = env.ReportedCost(seq);
  }
  return out;
}

double Trajectories::MeanReportedCost(const envs::Environment& env) const {
  const std::vector<double> costs = ReportedCosts(env);
  double total = 0.0;
  for (double c : costs) total += c;
  return costs.empty() ? 0.0 : total / static_cast<double>(costs.size());
}

}  // namespace hpo::estimators
