#include <cmath>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "hpo/autodiff/ops.h"
#include "hpo/autodiff/tape.h"
#include "hpo/envs/jrp.h"
#include "hpo/envs/scenario_io.h"
#include "hpo/envs/slqr.h"
#include "hpo/envs/toy.h"
#include "hpo/util/rng.h"
#include "test_util.h"

namespace hpo::envs {
namespace {

using ad::Tensor;

JrpParams OneProduct(double u, double h) {
  JrpParams params = JrpIdenticalParams(1);
  params.u = {u};
  params.h = {h};
  return params;
}

TEST(JrpParamsTest, SingleProductFixedCost) {
  EXPECT_EQ(JrpSampleParams(1, 3).K, 64.0);
  EXPECT_EQ(JrpSampleParams(7, 3).K, 448.0);
}

TEST(JrpParamsTest, IdenticalProducts) {
  for (std::size_t p : {1, 5, 20}) {
    const JrpParams params = JrpIdenticalParams(p);
    for (std::size_t k = 0; k < p; ++k) {
      EXPECT_EQ(params.u[k], 9.0);
      EXPECT_EQ(params.h[k], 1.0);
      EXPECT_EQ(params.mu[k], 10.0);
    }
    EXPECT_EQ(params.K, 64.0 * p);
  }
}

TEST(JrpParamsTest, SampledRangesAndDeterminism) {
  const JrpParams a = JrpSampleParams(50, 11);
  const JrpParams b = JrpSampleParams(50, 11);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.mu, b.mu);
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_GE(a.u[k], 6.3);
    EXPECT_LE(a.u[k], 11.7);
    EXPECT_GE(a.h[k], 0.7);
    EXPECT_LE(a.h[k], 1.3);
    EXPECT_GE(a.mu[k], 6.0);
    EXPECT_LE(a.mu[k], 14.0);
  }
  EXPECT_EQ(a.L, 2u);
  EXPECT_EQ(a.T, 100u);
  EXPECT_NO_THROW(ValidateJrpParams(a));
  JrpParams bad = a;
  bad.h[3] = bad.u[3] + 1.0;
  EXPECT_THROW(ValidateJrpParams(bad), std::invalid_argument);
}

TEST(JrpStepTest, AllZero) {
  const Jrp env(OneProduct(9, 1));
  const int modes[] = {0};
  const StepOutput out = env.Step(Tensor::Zeros({1, 2}), modes,
                                  Tensor::Zeros({1, 1}), Tensor::Zeros({1, 1}));
  EXPECT_EQ(out.cost.item(), 0.0);
  EXPECT_EQ(out.next_state.ToVector(), (std::vector<double>{0.0, 0.0}));
}

TEST(JrpStepTest, UnderageCost) {
  const Jrp env(OneProduct(9, 1));
  const int modes[] = {0};
  const StepOutput out =
      env.Step(Tensor::Matrix(1, 2, {5, 0}), modes, Tensor::Zeros({1, 1}),
               Tensor::Matrix(1, 1, {8}));
  EXPECT_EQ(out.cost.item(), 27.0);
  EXPECT_EQ(out.next_state.at(0, 0), -3.0);
}

TEST(JrpStepTest, OrderingChargesFixedCostRegardlessOfSize) {
  const Jrp env(OneProduct(9, 1));
  const int modes[] = {1, 1};
  const StepOutput out =
      env.Step(Tensor::Matrix(2, 2, {3, 0, 3, 0}), modes,
               Tensor::Matrix(2, 1, {1e-6, 500.0}), Tensor::Matrix(2, 1, {3, 3}));
  EXPECT_EQ(out.cost.at(0), 64.0);
  EXPECT_EQ(out.cost.at(1), 64.0);
}

TEST(JrpStepTest, ModeZeroExecutesNothing) {
  JrpParams params = JrpIdenticalParams(2);
  const Jrp env(params);
  const Tensor s = Tensor::Matrix(1, 4, {10, 10, 0, 0});
  const Tensor b = Tensor::Matrix(1, 2, {3, 3});
  const Tensor xi = Tensor::Matrix(1, 2, {0, 0});
  const int no_order[] = {0};
  const int order[] = {1};
  const StepOutput out0 = env.Step(s, no_order, b, xi);
  EXPECT_EQ(out0.next_state.ToVector(), (std::vector<double>{10, 10, 0, 0}));
  EXPECT_EQ(out0.cost.item(), 20.0);  // holding only
  const StepOutput out1 = env.Step(s, order, b, xi);
  EXPECT_EQ(out1.next_state.ToVector(), (std::vector<double>{10, 10, 3, 3}));
  EXPECT_EQ(out1.cost.item(), 20.0 + params.K);
  const JrpActionSpace space = env.ActionSpace();
  EXPECT_EQ(space.num_modes, 2u);
  EXPECT_EQ(space.mode0_width, 0.0);
}

TEST(JrpStepTest, NegativeOrderRejectedUnlessClamped) {
  const int modes[] = {1};
  const Tensor s = Tensor::Zeros({1, 2});
  const Tensor b = Tensor::Matrix(1, 1, {-1.0});
  const Tensor xi = Tensor::Zeros({1, 1});
  EXPECT_THROW(Jrp(OneProduct(9, 1)).Step(s, modes, b, xi), std::domain_error);
  const Jrp clamped(OneProduct(9, 1), {.clamp_orders = true});
  EXPECT_EQ(clamped.Step(s, modes, b, xi).next_state.at(0, 1), 0.0);
}

TEST(JrpStepTest, PipelineDeliversAfterLeadTime) {
  JrpParams params = OneProduct(9, 1);
  params.L = 3;
  const Jrp env(params);
  Tensor s = Tensor::Zeros({1, 3});
  const Tensor xi = Tensor::Zeros({1, 1});
  const int order[] = {1};
  const int none[] = {0};
  s = env.Step(s, order, Tensor::Matrix(1, 1, {7}), xi).next_state;
  EXPECT_EQ(s.ToVector(), (std::vector<double>{0, 0, 7}));
  s = env.Step(s, none, Tensor::Matrix(1, 1, {1}), xi).next_state;
  EXPECT_EQ(s.ToVector(), (std::vector<double>{0, 7, 0}));
  s = env.Step(s, none, Tensor::Matrix(1, 1, {1}), xi).next_state;
  EXPECT_EQ(s.ToVector(), (std::vector<double>{7, 0, 0}));
}

TEST(JrpStepTest, IdleStepsLeaveInventoryUnchanged) {
  const Jrp env(JrpIdenticalParams(3));
  Tensor s = Tensor::Matrix(1, 6, {4, -2, 0.5, 0, 0, 0});
  const int none[] = {0};
  for (int t = 0; t < 2; ++t) {
    s = env.Step(s, none, Tensor::Zeros({1, 3}), Tensor::Zeros({1, 3}))
            .next_state;
  }
  EXPECT_EQ(s.ToVector(), (std::vector<double>{4, -2, 0.5, 0, 0, 0}));
}

TEST(JrpStepTest, ShapeMismatchThrows) {
  const Jrp env(JrpIdenticalParams(2));
  const int modes[] = {0};
  EXPECT_THROW(env.Step(Tensor::Zeros({1, 3}), modes, Tensor::Zeros({1, 2}),
                        Tensor::Zeros({1, 2})),
               ad::ShapeError);
  const int bad_mode[] = {2};
  EXPECT_THROW(env.Step(Tensor::Zeros({1, 4}), bad_mode, Tensor::Zeros({1, 2}),
                        Tensor::Zeros({1, 2})),
               std::out_of_range);
}

TEST(JrpStepTest, ReportedCostWindow) {
  JrpParams params = JrpIdenticalParams(2);
  const Jrp env(params);
  std::vector<double> costs(100, 0.0);
  for (std::size_t t = 20; t < 80; ++t) costs[t] = 10.0;
  costs[5] = 1e6;
  costs[90] = 1e6;
  EXPECT_DOUBLE_EQ(env.ReportedCost(costs), 5.0);
}

// Flat PS-MDP actions and their hybrid encoding produce identical states
// and costs along a trajectory.
TEST(JrpStepTest, FlatAndHybridTrajectoriesCoincide) {
  const JrpParams params = JrpSampleParams(3, 2);
  const Jrp env(params);
  Rng rng(5);
  const std::vector<Scenario> scen = env.GenerateScenarios(4, 9);
  const std::size_t rows[] = {0, 1, 2, 3};
  Tensor flat_state = StackInitialStates(scen, rows);
  Tensor hybrid_state = flat_state;
  for (std::size_t t = 0; t < 30; ++t) {
    std::vector<double> orders(4 * 3, 0.0);
    for (std::size_t r = 0; r < 4; ++r) {
      if (rng.Uniform() < 0.4) {
        for (std::size_t k = 0; k < 3; ++k) orders[r * 3 + k] = rng.Uniform(0, 30);
      }
    }
    const Tensor a({4, 3}, orders);
    const Tensor xi = StackDisturbances(scen, rows, t);
    const StepOutput flat = env.FlatStep(flat_state, a, xi);
    const std::vector<int> modes = FlatOrdersToModes(a);
    // Hybrid side: arbitrary b in mode 0 must not matter.
    std::vector<double> b = orders;
    for (std::size_t r = 0; r < 4; ++r) {
      if (modes[r] == 0) {
        for (std::size_t k = 0; k < 3; ++k) b[r * 3 + k] = 99.0;
      }
    }
    const StepOutput hybrid =
        env.Step(hybrid_state, modes, Tensor({4, 3}, b), xi);
    EXPECT_EQ(flat.next_state.ToVector(), hybrid.next_state.ToVector());
    EXPECT_EQ(flat.cost.ToVector(), hybrid.cost.ToVector());
    flat_state = flat.next_state;
    hybrid_state = hybrid.next_state;
  }
}

TEST(ScenarioTest, JrpDemandsArePoissonIntegers) {
  JrpParams params = JrpIdenticalParams(1);
  params.T = 1000;
  params.mu = {7.3};
  const Jrp env(params);
  const auto scen = env.GenerateScenarios(100, 4);
  double sum = 0.0;
  std::size_t n = 0;
  for (const Scenario& s : scen) {
    EXPECT_EQ(s.initial_state.ToVector(), (std::vector<double>{0.0, 0.0}));
    for (double d : s.disturbances.data()) {
      EXPECT_GE(d, 0.0);
      EXPECT_EQ(d, std::floor(d));
      sum += d;
      ++n;
    }
  }
  ASSERT_EQ(n, 100000u);
  const double se = std::sqrt(7.3 / n);
  EXPECT_NEAR(sum / n, 7.3, 3 * se);
}

TEST(ScenarioTest, SameSeedSameScenarios) {
  const Jrp env(JrpSampleParams(4, 1));
  const auto a = env.GenerateScenarios(5, 77);
  const auto b = env.GenerateScenarios(5, 77);
  const auto c = env.GenerateScenarios(5, 78);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].disturbances.ToVector(), b[i].disturbances.ToVector());
  }
  EXPECT_NE(a[0].disturbances.ToVector(), c[0].disturbances.ToVector());
  EXPECT_NE(SplitSeed(3, Split::kTrain), SplitSeed(3, Split::kTest));
  EXPECT_NE(SplitSeed(3, Split::kValidation), SplitSeed(4, Split::kTrain));
}

TEST(ScenarioTest, SlqrInitialStateSecondMoment) {
  for (std::size_t p : {1, 4, 16}) {
    const Slqr env(SlqrBuild(p, 2, 1));
    const auto scen = env.GenerateScenarios(20000, 3);
    double sum = 0.0;
    double sum_sq = 0.0;
    const double a = 10.0 / std::sqrt(static_cast<double>(p));
    for (const Scenario& s : scen) {
      double sq = 0.0;
      for (double v : s.initial_state.data()) {
        EXPECT_LE(std::abs(v), a);
        sq += v * v;
      }
      sum += sq;
      sum_sq += sq * sq;
      for (double w : s.disturbances.data()) EXPECT_EQ(w, 0.0);
    }
    const double mean = sum / scen.size();
    const double se =
        std::sqrt((sum_sq / scen.size() - mean * mean) / scen.size());
    EXPECT_NEAR(mean, 100.0 / 3.0, 3 * se) << "p=" << p;
  }
}

TEST(ScenarioTest, CsvRoundTripIsExact) {
  const Jrp env(JrpSampleParams(3, 1));
  auto scen = env.GenerateScenarios(4, 5);
  AttachReparamNoise(scen, 3, 8);
  std::stringstream buf;
  WriteScenarios(buf, {EnvKind::kJrp, 3, 100, 5}, scen);
  ScenarioSetHeader header;
  const auto back = ReadScenarios(buf, &header);
  EXPECT_EQ(header.kind, EnvKind::kJrp);
  EXPECT_EQ(header.p, 3u);
  EXPECT_EQ(header.seed, 5u);
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back[i].initial_state.ToVector(), scen[i].initial_state.ToVector());
    EXPECT_EQ(back[i].disturbances.ToVector(), scen[i].disturbances.ToVector());
    EXPECT_EQ(back[i].reparam_noise.ToVector(), scen[i].reparam_noise.ToVector());
  }
  std::stringstream bad("format=other,version=1\n");
  EXPECT_THROW(ReadScenarios(bad), std::runtime_error);
}

TEST(SlqrBuildTest, ScalarCaseTracesConstruction) {
  // N is 1x1, normalized to +-1, so A = 1.10 +- 0.05.
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const SlqrParams params = SlqrBuild(1, 1, seed);
    EXPECT_NEAR(std::abs(params.A.item() - 1.10), 0.05, 1e-15);
    EXPECT_EQ(params.B[0].item(), 1.0);
  }
}

TEST(SlqrBuildTest, PerturbationBounded) {
  for (std::size_t p : {2, 5, 13}) {
    const SlqrParams params = SlqrBuild(p, 3, p);
    double worst = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        const double dev = std::abs(params.A.at(i, j) - (i == j ? 1.1 : 0.0));
        worst = std::max(worst, dev);
        EXPECT_DOUBLE_EQ(params.A.at(i, j), params.A.at(j, i));
      }
    }
    EXPECT_LE(worst, 0.05 + 1e-15);
    EXPECT_NEAR(worst, 0.05, 1e-15);
  }
}

TEST(SlqrBuildTest, GroupsAndControlMatrices) {
  const SlqrParams params = SlqrBuild(4, 2, 0);
  EXPECT_EQ(params.groups[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(params.groups[1], (std::vector<std::size_t>{2, 3}));
  const std::vector<double> b1 = {1, 0, 0, 0, 0, 1, 0, 0,
                                  0, 0, 0.15, 0, 0, 0, 0, 0.15};
  EXPECT_EQ(params.B[0].ToVector(), b1);
  const auto uneven = ContiguousGroups(7, 3);
  EXPECT_EQ(uneven[0].size(), 3u);
  EXPECT_EQ(uneven[1].size(), 2u);
  EXPECT_EQ(uneven[2].size(), 2u);
  EXPECT_EQ(uneven[2].back(), 6u);
  EXPECT_EQ(params.Q.ToVector(), (std::vector<double>{1, 0, 0, 0, 0, 1, 0, 0,
                                                      0, 0, 1, 0, 0, 0, 0, 1}));
  EXPECT_DOUBLE_EQ(params.R.at(2, 2), 0.1);
}

SlqrParams ScalarSlqr() {
  SlqrParams params = SlqrBuild(1, 1, 0);
  params.A = Tensor::Matrix(1, 1, {1.1});
  return params;
}

TEST(SlqrStepTest, ZeroEverything) {
  const Slqr env(SlqrBuild(3, 2, 0));
  const int modes[] = {1};
  const StepOutput out = env.Step(Tensor::Zeros({1, 3}), modes,
                                  Tensor::Zeros({1, 3}), Tensor::Zeros({1, 3}));
  EXPECT_EQ(out.cost.item(), 0.0);
  EXPECT_EQ(out.next_state.ToVector(), (std::vector<double>{0, 0, 0}));
}

TEST(SlqrStepTest, ScalarArithmetic) {
  const Slqr env(ScalarSlqr());
  const int modes[] = {0};
  const StepOutput out =
      env.Step(Tensor::Matrix(1, 1, {2}), modes, Tensor::Matrix(1, 1, {-1}),
               Tensor::Zeros({1, 1}));
  EXPECT_NEAR(out.next_state.item(), 1.2, 1e-15);
  EXPECT_NEAR(out.cost.item(), 4.1, 1e-15);
}

TEST(SlqrStepTest, CostIsModeIndependent) {
  const Slqr env(SlqrBuild(5, 4, 2));
  Rng rng(1);
  std::vector<double> s(5);
  std::vector<double> b(5);
  for (double& v : s) v = rng.Normal();
  for (double& v : b) v = rng.Normal();
  double first = 0.0;
  for (int j = 0; j < 4; ++j) {
    const int modes[] = {j};
    const double c = env.Step(Tensor({1, 5}, s), modes, Tensor({1, 5}, b),
                              Tensor::Zeros({1, 5}))
                          .cost.item();
    if (j == 0) first = c;
    EXPECT_EQ(c, first);
  }
}

// Total cost along a fixed (mode sequence, scenario) is smooth in the
// b-sequence; check with central differences.
template <typename Env>
void CheckConditionalSmoothness(const Env& env, std::uint64_t seed,
                                double b_scale) {
  const std::size_t T = 8;
  const std::size_t p = env.action_dim();
  const auto scen = env.GenerateScenarios(1, seed);
  Rng rng(seed);
  std::vector<int> modes(T);
  for (int& x : modes) x = static_cast<int>(rng.UniformInt(env.num_modes()));
  std::vector<double> b(T * p);
  for (double& v : b) v = b_scale * rng.Uniform(0.2, 1.0);
  const std::size_t rows[] = {0};
  auto total = [&](const Tensor& bseq) {
    Tensor s = StackInitialStates(scen, rows);
    Tensor cost = Tensor::Scalar(0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const Tensor bt = ad::Reshape(ad::SliceCols(ad::Reshape(bseq, {1, T * p}),
                                                  t * p, (t + 1) * p),
                                    {1, p});
      const int mode[] = {modes[t]};
      const StepOutput out =
          env.Step(s, mode, bt, StackDisturbances(scen, rows, t));
      cost = cost + ad::Sum(out.cost);
      s = out.next_state;
    }
    return cost;
  };
  ad::Tape tape;
  const Tensor leaf = tape.Leaf(Tensor({T * p}, b));
  const auto grad = tape.Backward(total(leaf)).Of(leaf);
  const auto fd = testing::CentralDiff(
      [&](const std::vector<double>& v) {
        return total(Tensor({T * p}, v)).item();
      },
      b, 1e-5);
  EXPECT_LT(testing::MaxRelErr(grad, fd), 1e-5);
}

TEST(SmoothnessTest, JrpTotalCostSmoothInOrders) {
  CheckConditionalSmoothness(Jrp(JrpSampleParams(3, 4)), 6, 13.7);
}

TEST(SmoothnessTest, SlqrTotalCostSmoothInControls) {
  CheckConditionalSmoothness(Slqr(SlqrBuild(4, 2, 3)), 2, 1.0);
}

TEST(SmoothnessTest, ToyTotalCostSmoothInControls) {
  ToyParams params;
  params.T = 8;
  CheckConditionalSmoothness(ToyEnv(params), 1, 1.0);
}

TEST(ToyEnvTest, StepFormula) {
  const ToyEnv env;
  const int modes[] = {0, 1};
  const StepOutput out = env.Step(Tensor::Matrix(2, 1, {1.5, 1.5}), modes,
                                  Tensor::Matrix(2, 1, {-1, 2}),
                                  Tensor::Matrix(2, 1, {1, -1}));
  EXPECT_DOUBLE_EQ(out.next_state.at(0, 0), 1.5 - 1 + 1);
  EXPECT_DOUBLE_EQ(out.next_state.at(1, 0), 0.75 + 1.2 - 1);
  EXPECT_DOUBLE_EQ(out.cost.at(0), 2.25 + 0.3);
  EXPECT_DOUBLE_EQ(out.cost.at(1), 2.25 + 1.2 + 0.4);
}

TEST(ToyEnvTest, DisturbanceFrequencies) {
  const ToyEnv env;
  const auto scen = env.GenerateScenarios(40000, 1);
  std::array<int, 3> counts{};
  for (const Scenario& s : scen) {
    for (double x : s.disturbances.data()) counts[static_cast<int>(x) + 1]++;
  }
  const double n = 80000;
  for (int i = 0; i < 3; ++i) {
    const double p = env.params().xi_probs[i];
    EXPECT_NEAR(counts[i] / n, p, 3 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(ExogeneityTest, ReplayConsumesIdenticalDisturbances) {
  const Jrp env(JrpSampleParams(2, 1));
  const auto scen = env.GenerateScenarios(2, 3);
  const std::vector<double> before = scen[1].disturbances.ToVector();
  const std::size_t rows[] = {1};
  for (double q : {0.0, 25.0}) {
    Tensor s = StackInitialStates(scen, rows);
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      const int mode[] = {t % 3 == 0 ? 1 : 0};
      s = env.Step(s, mode, Tensor::Full({1, 2}, q),
                   StackDisturbances(scen, rows, t))
              .next_state;
    }
  }
  EXPECT_EQ(scen[1].disturbances.ToVector(), before);
}

}  // namespace
}  // namespace hpo::envs
