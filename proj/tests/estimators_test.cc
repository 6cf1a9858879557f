#include <cmath>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "hpo/autodiff/ops.h"
#include "hpo/envs/jrp.h"
#include "hpo/envs/slqr.h"
#include "hpo/estimators/losses.h"
#include "hpo/estimators/rollout.h"
#include "test_util.h"

namespace hpo::estimators {
namespace {

using ad::Tensor;

policy::PolicyConfig ConfigFor(const envs::Environment& env, double fixed_cost,
                               std::uint64_t seed) {
  policy::PolicyConfig c;
  c.kind = env.kind();
  c.state_dim = env.state_dim();
  c.action_dim = env.action_dim();
  c.num_modes = env.num_modes();
  c.fixed_cost = fixed_cost;
  c.hidden = {12, 12};
  c.policy_output_gain = 1.0;
  c.seed = seed;
  return c;
}

std::vector<Tensor> Unflatten(const std::vector<Tensor>& like,
                              const std::vector<double>& flat) {
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (const Tensor& t : like) {
    out.emplace_back(t.shape(),
                     std::vector<double>(flat.begin() + offset,
                                         flat.begin() + offset + t.size()));
    offset += t.size();
  }
  return out;
}

std::vector<std::size_t> Range(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

void FillRewardToGo(Trajectories& traj, double gamma) {
  traj.advantages.assign(traj.T * traj.n, 0.0);
  for (std::size_t i = 0; i < traj.n; ++i) {
    double acc = 0.0;
    for (std::size_t t = traj.T; t-- > 0;) {
      acc = traj.cost(t, i) + gamma * acc;
      traj.advantages[t * traj.n + i] = acc;
    }
  }
}

envs::JrpParams ShortJrp(std::size_t p, std::size_t T) {
  envs::JrpParams params = envs::JrpSampleParams(p, 1);
  params.T = T;
  return params;
}

TEST(RolloutTest, SinglePeriodCostEqualsEnvironmentStep) {
  const envs::Jrp env(ShortJrp(2, 1));
  policy::HybridPolicy policy(ConfigFor(env, env.params().K, 1));
  policy.normalizer().Set(10.0);
  const auto scen = env.GenerateScenarios(3, 2);
  const auto rows = Range(3);
  Rng rng(5);
  const Trajectories traj =
      Rollout(policy, policy.Constants(), env, scen, rows, rng);
  const envs::StepOutput direct =
      env.Step(envs::StackInitialStates(scen, rows), traj.modes[0], traj.b[0],
               envs::StackDisturbances(scen, rows, 0));
  EXPECT_EQ(traj.costs[0].ToVector(), direct.cost.ToVector());
  EXPECT_EQ(traj.states[1].ToVector(), direct.next_state.ToVector());
}

TEST(RolloutTest, ReplayWithSameModesIsIdentical) {
  const envs::Jrp env(ShortJrp(3, 15));
  policy::HybridPolicy policy(ConfigFor(env, env.params().K, 2));
  policy.normalizer().Set(10.0);
  const auto scen = env.GenerateScenarios(4, 2);
  const auto rows = Range(4);
  Rng rng(1);
  const Trajectories first =
      Rollout(policy, policy.Constants(), env, scen, rows, rng);
  RolloutOptions replay;
  replay.forced_modes = &first.modes;
  Rng other(999);
  const Trajectories second =
      Rollout(policy, policy.Constants(), env, scen, rows, other, replay);
  EXPECT_EQ(first.cost_values, second.cost_values);
  for (std::size_t t = 0; t <= first.T; ++t) {
    EXPECT_EQ(first.states[t].ToVector(), second.states[t].ToVector());
  }
  // Same sampling seed gives the same modes too.
  Rng again(1);
  const Trajectories third =
      Rollout(policy, policy.Constants(), env, scen, rows, again);
  EXPECT_EQ(first.modes, third.modes);
}

// Mixed kappa-gradient with and without the cross term on a 3-step JRP:
// the forward pass is identical, and the difference is exactly the score
// term's kappa-gradient.
TEST(MixedLossTest, DropCrossRemovesExactlyTheCrossContribution) {
  const envs::Jrp env(ShortJrp(2, 3));
  policy::HybridPolicy policy(ConfigFor(env, env.params().K, 3));
  policy.normalizer().Set(10.0);
  auto scen = env.GenerateScenarios(5, 4);
  const auto rows = Range(5);
  const double gamma = 0.99;

  ad::Tape full_tape;
  const policy::ParamView full_view = policy.Bind(full_tape, true, true, false);
  Rng rng(7);
  Trajectories full = Rollout(policy, full_view, env, scen, rows, rng);
  FillRewardToGo(full, gamma);
  const SplitTerms split = SplitGradTerms(full_tape, full_view, full, gamma);

  ad::Tape nc_tape;
  const policy::ParamView nc_view = policy.Bind(nc_tape, true, true, false);
  RolloutOptions opts;
  opts.drop_cross = true;
  opts.forced_modes = &full.modes;
  Rng unused(0);
  Trajectories nocross = Rollout(policy, nc_view, env, scen, rows, unused, opts);
  nocross.advantages = full.advantages;
  EXPECT_EQ(full.cost_values, nocross.cost_values);

  const auto g_nc =
      nc_tape.Backward(MixedLoss(nocross, gamma)).Flat(nc_view.kappa);
  double cross_norm = 0.0;
  for (std::size_t i = 0; i < g_nc.size(); ++i) {
    EXPECT_NEAR(g_nc[i], split.pathwise[i], 1e-10);
    EXPECT_NEAR(split.mixed[i] - g_nc[i], split.cross[i], 1e-10);
    cross_norm += split.cross[i] * split.cross[i];
  }
  EXPECT_GT(cross_norm, 0.0);
  // phi gradient is unaffected by drop_cross.
  const auto phi_full =
      full_tape.Backward(MixedLoss(full, gamma)).Flat(full_view.phi);
  const auto phi_nc =
      nc_tape.Backward(MixedLoss(nocross, gamma)).Flat(nc_view.phi);
  EXPECT_LT(testing::MaxAbsDiff(phi_full, phi_nc), 1e-12);
}

TEST(MixedLossTest, DecompositionIsExact) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const envs::Slqr env(envs::SlqrBuild(3, 3, seed));
    const policy::HybridPolicy policy(ConfigFor(env, 0.0, seed));
    const auto scen = env.GenerateScenarios(8, seed);
    const auto rows = Range(8);
    ad::Tape tape;
    const policy::ParamView view = policy.Bind(tape, true, true, false);
    Rng rng(seed);
    Trajectories traj = Rollout(policy, view, env, scen, rows, rng);
    FillRewardToGo(traj, 0.99);
    const SplitTerms split = SplitGradTerms(tape, view, traj, 0.99, 0.37);
    for (std::size_t i = 0; i < split.mixed.size(); ++i) {
      EXPECT_NEAR(split.pathwise[i] + split.cross[i], split.mixed[i], 1e-10);
    }
  }
}

TEST(MixedLossTest, ZeroAdvantagesGivePurePathwise) {
  const envs::Slqr env(envs::SlqrBuild(2, 2, 1));
  const policy::HybridPolicy policy(ConfigFor(env, 0.0, 1));
  const auto scen = env.GenerateScenarios(4, 1);
  const auto rows = Range(4);
  ad::Tape tape;
  const policy::ParamView view = policy.Bind(tape, true, true, false);
  Rng rng(2);
  Trajectories traj = Rollout(policy, view, env, scen, rows, rng);
  EXPECT_THROW(MixedLoss(traj, 0.99), std::logic_error);
  traj.advantages.assign(traj.T * traj.n, 0.0);
  const auto mixed = tape.Backward(MixedLoss(traj, 0.99)).Flat(view.kappa);
  const auto pw = tape.Backward(CostLoss(traj, 0.99)).Flat(view.kappa);
  EXPECT_EQ(mixed, pw);
}

TEST(MixedLossTest, SingleModeHasNoCrossTerm) {
  const envs::Slqr env(envs::SlqrBuild(3, 1, 2));
  const policy::HybridPolicy policy(ConfigFor(env, 0.0, 2));
  const auto scen = env.GenerateScenarios(6, 3);
  const auto rows = Range(6);
  ad::Tape tape;
  const policy::ParamView view = policy.Bind(tape, true, true, false);
  Rng rng(3);
  Trajectories traj = Rollout(policy, view, env, scen, rows, rng);
  FillRewardToGo(traj, 0.99);
  const SplitTerms split = SplitGradTerms(tape, view, traj, 0.99);
  for (double c : split.cross) EXPECT_EQ(c, 0.0);
  EXPECT_LT(testing::MaxAbsDiff(split.mixed, split.pathwise), 1e-12);
}

// kappa-gradient of a 20-period JRP rollout (fixed scenario and modes)
// against central differences.
TEST(PathwiseTest, JrpRolloutGradientMatchesFiniteDifferences) {
  const envs::Jrp env(ShortJrp(2, 20));
  policy::HybridPolicy policy(ConfigFor(env, env.params().K, 8));
  policy.normalizer().Set(9.0);
  const auto scen = env.GenerateScenarios(2, 6);
  const auto rows = Range(2);
  Rng rng(4);
  const Trajectories base =
      Rollout(policy, policy.Constants(), env, scen, rows, rng);
  RolloutOptions opts;
  opts.forced_modes = &base.modes;
  const auto total = [&](const policy::ParamView& v) {
    Rng unused(0);
    return CostLoss(Rollout(policy, v, env, scen, rows, unused, opts), 1.0);
  };
  ad::Tape tape;
  const policy::ParamView view = policy.Bind(tape, false, true, false);
  const auto grad = tape.Backward(total(view)).Flat(view.kappa);
  const std::vector<double> flat = policy.continuous().FlatParameters();
  const auto fd = testing::CentralDiff(
      [&](const std::vector<double>& k) {
        policy::ParamView v = policy.Constants();
        v.kappa = Unflatten(v.kappa, k);
        return total(v).item();
      },
      flat, 1e-5);
  EXPECT_LT(testing::MaxRelErr(grad, fd), 1e-5);
}

TEST(SfLossTest, ZeroAdvantagesGiveZeroGradient) {
  const envs::Slqr env(envs::SlqrBuild(2, 2, 1));
  const policy::HybridPolicy policy(ConfigFor(env, 0.0, 4));
  const auto scen = env.GenerateScenarios(4, 1);
  const auto rows = Range(4);
  RolloutOptions opts;
  opts.continuous = ContinuousMode::kGaussian;
  Rng rng(2);
  Trajectories traj =
      Rollout(policy, policy.Constants(), env, scen, rows, rng, opts);
  traj.advantages.assign(traj.T * traj.n, 0.0);
  ad::Tape tape;
  const policy::ParamView view = policy.Bind(tape, true, true, false, true);
  const auto g = tape.Backward(SfLoss(policy, view, traj, 0.99));
  for (double x : g.Flat(view.kappa)) EXPECT_EQ(x, 0.0);
  for (double x : g.Flat(view.phi)) EXPECT_EQ(x, 0.0);
}

TEST(SfLossTest, DeterministicHeadRejected) {
  const envs::Slqr env(envs::SlqrBuild(2, 2, 1));
  const policy::HybridPolicy policy(ConfigFor(env, 0.0, 4));
  const auto scen = env.GenerateScenarios(2, 1);
  const auto rows = Range(2);
  Rng rng(2);
  Trajectories traj =
      Rollout(policy, policy.Constants(), env, scen, rows, rng);
  traj.advantages.assign(traj.T * traj.n, 1.0);
  EXPECT_THROW(SfLoss(policy, policy.Constants(), traj, 0.99),
               std::invalid_argument);
}

TEST(SfLossTest, ReparamRolloutUsesScenarioNoise) {
  const envs::Jrp env(ShortJrp(2, 5), {.clamp_orders = true});
  policy::HybridPolicy policy(ConfigFor(env, env.params().K, 5));
  policy.normalizer().Set(10.0);
  auto scen = env.GenerateScenarios(3, 2);
  envs::AttachReparamNoise(scen, 2, 3);
  const auto rows = Range(3);
  RolloutOptions opts;
  opts.continuous = ContinuousMode::kReparam;
  opts.noise = {.sigma = 1.0, .offset = 2.0};
  Rng rng(1);
  Trajectories traj =
      Rollout(policy, policy.Constants(), env, scen, rows, rng, opts);
  const Tensor eps0 = envs::StackReparamNoise(scen, rows, 0);
  const Tensor mean0 = ad::GatherBlocks(
      policy.Candidates(policy.Constants(), traj.states[0]), traj.modes[0], 2);
  for (std::size_t i = 0; i < traj.b[0].size(); ++i) {
    EXPECT_NEAR(traj.b[0].at(i), mean0.at(i) + 2.0 + eps0.at(i), 1e-12);
  }
  FillRewardToGo(traj, 0.99);
  ad::Tape tape;
  const policy::ParamView view = policy.Bind(tape, true, true, false);
  const auto g = tape.Backward(SfLoss(policy, view, traj, 0.99)).Flat(view.kappa);
  double norm = 0.0;
  for (double x : g) norm += x * x;
  EXPECT_GT(norm, 0.0);
}

TEST(GradEstimateTest, CsvRoundTrip) {
  std::vector<GradEstimate> in = {
      {EstimatorKind::kMixedFull, "kappa", 512, 3, {1.0, -2.5, 1e-300}},
      {EstimatorKind::kSf, "phi", 16, 4, {0.1}},
  };
  std::stringstream buf;
  WriteGradEstimates(buf, in);
  const auto out = ReadGradEstimates(buf);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].values, in[0].values);
  EXPECT_EQ(out[1].kind, EstimatorKind::kSf);
  EXPECT_EQ(out[1].group, "phi");
  EXPECT_EQ(out[0].batch_size, 512u);
  EXPECT_EQ(out[1].batch_id, 4);
  EXPECT_EQ(ParseEstimatorKind("cross_only"), EstimatorKind::kCrossOnly);
}

}  // namespace
}  // namespace hpo::estimators
