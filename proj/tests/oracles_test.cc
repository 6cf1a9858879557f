#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "hpo/envs/jrp.h"
#include "hpo/oracles/jrp_dp.h"

namespace hpo::oracles {
namespace {

using ad::Tensor;

// Independent check: simulate the (s, S) policy from the DP through the
// environment for a long horizon and compare the average cost.
TEST(JrpDp, MatchesSimulatedBaseStockPolicy) {
  envs::JrpParams params = envs::JrpSampleParams(1, 0);
  params.T = 20000;
  params.warmup = 100;
  params.cooldown = 0;
  const JrpDpResult dp = JrpSingleProductOptimum(params);
  envs::Jrp env(params);
  const auto scen = env.GenerateScenarios(1, 77);
  Tensor state = Tensor::Zeros({1, env.state_dim()});
  std::vector<double> costs;
  for (std::size_t t = 0; t < params.T; ++t) {
    const double position = state.at(0) + state.at(1);
    const double order =
        position <= dp.reorder_point ? dp.order_up_to - position : 0.0;
    const Tensor xi = Tensor::Matrix(1, 1, {scen[0].disturbances.at(t)});
    const envs::StepOutput out =
        env.FlatStep(state, Tensor::Matrix(1, 1, {order}), xi);
    costs.push_back(out.cost.at(0));
    state = out.next_state;
  }
  EXPECT_NEAR(env.ReportedCost(costs), dp.average_cost,
              0.02 * dp.average_cost);
  EXPECT_GT(dp.order_up_to, dp.reorder_point);
}

// Values from a separate numpy implementation of the same recursion.
TEST(JrpDp, ReferenceValues) {
  EXPECT_NEAR(JrpSingleProductOptimum(10.3187, 1.0815, 11.1538, 64).average_cost,
              41.163, 1e-2);
  EXPECT_NEAR(JrpSingleProductOptimum(9.0, 1.0, 10.0, 64).average_cost, 37.064,
              1e-2);
}

TEST(JrpDp, ZeroFixedCostIsBaseStockNewsvendor) {
  // With K = 0 the optimum orders up to the critical fractile of
  // Poisson(3 mu) every period.
  const double u = 9, h = 1, mu = 5;
  const JrpDpResult r = JrpSingleProductOptimum(u, h, mu, 0.0);
  double cdf = 0, pmf = std::exp(-3 * mu);
  int k = 0;
  for (;; ++k) {
    cdf += pmf;
    if (cdf >= u / (u + h)) break;
    pmf *= 3 * mu / (k + 1);
  }
  EXPECT_EQ(r.order_up_to, k);
  EXPECT_THROW(JrpSingleProductOptimum(envs::JrpSampleParams(2, 0)),
               std::invalid_argument);
}

}  // namespace
}  // namespace hpo::oracles
