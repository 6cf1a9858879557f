#include <cmath>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "hpo/analysis/buckets.h"
#include "hpo/analysis/metrics.h"
#include "hpo/analysis/riccati.h"
#include "hpo/envs/slqr.h"

namespace hpo::analysis {
namespace {

using ad::Tensor;

std::vector<double> Gaussian(Rng& rng, const std::vector<double>& mu,
                             double sigma) {
  std::vector<double> g(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) g[i] = mu[i] + sigma * rng.Normal();
  return g;
}

TEST(Metrics, DeterministicEstimates) {
  const std::vector<double> mu = {3.0, 4.0};
  const std::vector<EstimatePair> pairs(5, EstimatePair{mu, mu});
  EXPECT_DOUBLE_EQ(MetricSignal(pairs).value, 5.0);
  EXPECT_DOUBLE_EQ(MetricRmse(pairs), 0.0);
  EXPECT_DOUBLE_EQ(MetricAlignment(pairs).value, 1.0);
  EXPECT_TRUE(std::isinf(MetricSnr(5.0, 0.0)));
}

TEST(Metrics, OrthogonalAndErrors) {
  const std::vector<double> a = {1, 0}, b = {0, 2}, z = {0, 0};
  const std::vector<EstimatePair> orth = {{a, b}};
  EXPECT_DOUBLE_EQ(MetricAlignment(orth).value, 0.0);
  EXPECT_DOUBLE_EQ(MetricSnr(2, 1), 2.0);
  EXPECT_DOUBLE_EQ(MetricSnr(0, 1), 0.0);
  const std::vector<EstimatePair> none;
  EXPECT_THROW(MetricSignal(none), std::invalid_argument);
  EXPECT_THROW(MetricRmse(none), std::invalid_argument);
  const std::vector<EstimatePair> zeros = {{z, z}};
  EXPECT_THROW(MetricAlignment(zeros), std::invalid_argument);
  const std::vector<EstimatePair> some_zero = {{z, a}, {a, a}};
  const AlignResult r = MetricAlignment(some_zero);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(Metrics, NegativeSignalIsClampedAndFlagged) {
  const std::vector<double> a = {1, 0}, b = {-1, 0};
  const std::vector<EstimatePair> pairs = {{a, b}};
  const SignalResult s = MetricSignal(pairs);
  EXPECT_TRUE(s.clamped);
  EXPECT_EQ(s.value, 0.0);
  EXPECT_DOUBLE_EQ(s.mean_inner, -1.0);
}

TEST(Metrics, RmseIsHomogeneous) {
  Rng rng(1);
  std::vector<std::vector<double>> g, h;
  for (int i = 0; i < 20; ++i) {
    g.push_back(Gaussian(rng, {1, 2, 3}, 1.0));
    h.push_back(Gaussian(rng, {1, 2, 3}, 1.0));
  }
  std::vector<EstimatePair> p1, p2;
  std::vector<std::vector<double>> g2 = g, h2 = h;
  for (auto& v : g2) for (double& x : v) x *= -3.0;
  for (auto& v : h2) for (double& x : v) x *= -3.0;
  for (int i = 0; i < 20; ++i) {
    p1.push_back({g[i], h[i]});
    p2.push_back({g2[i], h2[i]});
  }
  EXPECT_NEAR(MetricRmse(p2), 3.0 * MetricRmse(p1), 1e-12);
}

// Signal -> |mu|, RMSE^2 -> tr Sigma for i.i.d. Gaussian estimates.
TEST(Metrics, GaussianCalibration) {
  Rng rng(7);
  const std::vector<double> mu = {1.0, -2.0, 0.5, 0.0};
  const double sigma = 0.8;
  const std::size_t R = 20000;
  std::vector<std::vector<double>> g, h;
  for (std::size_t r = 0; r < R; ++r) {
    g.push_back(Gaussian(rng, mu, sigma));
    h.push_back(Gaussian(rng, mu, sigma));
  }
  std::vector<EstimatePair> pairs;
  for (std::size_t r = 0; r < R; ++r) pairs.push_back({g[r], h[r]});
  const double mu_norm = Norm(mu);
  const double trace = sigma * sigma * 4;
  EXPECT_NEAR(MetricSignal(pairs).value, mu_norm, 0.03);
  EXPECT_NEAR(MetricRmse(pairs), std::sqrt(trace), 0.03);
  EXPECT_NEAR(MetricSnr(MetricSignal(pairs).value, MetricRmse(pairs)),
              mu_norm / std::sqrt(trace), 0.03);
}

TEST(Metrics, NoiseDominatedAlignmentNearZero) {
  Rng rng(3);
  std::vector<double> mu(50, 0.01);
  std::vector<std::vector<double>> b;
  for (int i = 0; i < 200; ++i) b.push_back(Gaussian(rng, mu, 1.0));
  const auto pairs = MakePairs(b, SamplePairs(b.size(), 2000, rng, false));
  EXPECT_NEAR(MetricAlignment(pairs).value, 0.0, 0.02);
}

TEST(Metrics, PairSampling) {
  Rng rng(4);
  const auto with = SamplePairs(3, 3000, rng, true);
  int same = 0;
  for (auto [i, j] : with) same += i == j;
  EXPECT_NEAR(same / 3000.0, 1.0 / 3.0, 0.04);
  for (auto [i, j] : SamplePairs(3, 500, rng, false)) EXPECT_NE(i, j);
  EXPECT_THROW(SamplePairs(1, 5, rng, false), std::invalid_argument);
}

TEST(CrossAlign, IdenticalOrthogonalAndTwoBatches) {
  Rng rng(5);
  const std::vector<std::vector<double>> same = {{1, 2}, {1, 2}, {1, 2}};
  EXPECT_NEAR(MetricCrossAlign(same, same, 50, rng), 1.0, 1e-12);
  const std::vector<std::vector<double>> orth = {{0, 0, 1}, {0, 0, 2}, {0, 0, 3}};
  const std::vector<std::vector<double>> base = {{1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  EXPECT_NEAR(MetricCrossAlign(base, orth, 50, rng), 0.0, 1e-12);
  // M = 2: the reference for j = 0 is exactly batch 1.
  const std::vector<std::vector<double>> two = {{1, 0}, {0, 1}};
  const std::vector<std::vector<double>> test = {{0, 1}, {1, 0}};
  EXPECT_NEAR(MetricCrossAlign(two, test, 50, rng), 1.0, 1e-12);
  EXPECT_THROW(MetricCrossAlign({{1.0}}, {{1.0}}, 5, rng),
               std::invalid_argument);
}

TEST(CrossAlign, SelfInclusionInflatesNoiseOnlyAlignment) {
  Rng rng(6);
  std::vector<std::vector<double>> b;
  for (int i = 0; i < 8; ++i) b.push_back(Gaussian(rng, std::vector<double>(30, 0.0), 1.0));
  Rng r1(9), r2(9);
  const double loo = MetricCrossAlign(b, b, 400, r1, true);
  const double incl = MetricCrossAlign(b, b, 400, r2, false);
  EXPECT_GT(incl, loo + 0.2);
  EXPECT_NEAR(loo, 0.0, 0.1);
}

TEST(Riccati, ZeroDynamics) {
  const Tensor A = Tensor::Zeros({2, 2});
  const Tensor B = Tensor::Matrix(2, 2, {1, 0, 0, 1});
  const Tensor Q = Tensor::Matrix(2, 2, {2, 0, 0, 1});
  const Tensor R = Tensor::Matrix(2, 2, {0.1, 0, 0, 0.1});
  const RiccatiSolution s = RiccatiSolve(A, B, Q, R, 5);
  for (const auto& K : s.K) for (double v : K.data()) EXPECT_EQ(v, 0.0);
  for (const auto& P : s.P) EXPECT_EQ(P.ToVector(), Q.ToVector());
}

TEST(Riccati, ScalarOneStep) {
  const RiccatiSolution s =
      RiccatiSolve(Tensor::Matrix(1, 1, {1.1}), Tensor::Matrix(1, 1, {1.0}),
                   Tensor::Matrix(1, 1, {1.0}), Tensor::Matrix(1, 1, {0.1}), 1);
  EXPECT_NEAR(s.K[0].item(), 1.0, 1e-14);
  EXPECT_NEAR(s.P[0].item(), 1.11, 1e-14);
}

TEST(Riccati, SimulatedCostMatchesClosedForm) {
  for (std::size_t J : {1u, 2u}) {
    envs::Slqr env(envs::SlqrBuild(4, J, 3));
    const auto scen = env.GenerateScenarios(20, 8);
    for (std::size_t j = 0; j < J; ++j) {
      const double sim = SimulateRiccati(env, j, scen);
      const double closed = RiccatiExpectedCost(env.params(), j, scen);
      EXPECT_NEAR(sim, closed, 1e-10 * closed);
    }
  }
}

TEST(Riccati, IsALowerBoundForPerturbedGains) {
  envs::Slqr env(envs::SlqrBuild(3, 1, 2));
  const auto scen = env.GenerateScenarios(10, 1);
  const RiccatiSolution sol = SlqrRiccati(env.params(), 0);
  const double opt = RiccatiExpectedCost(env.params(), 0, scen);
  // Simulate slightly perturbed stationary gain.
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> k = sol.K[0].ToVector();
    for (double& v : k) v += 0.05 * rng.Normal();
    const Tensor K = Tensor::Matrix(3, 3, k);
    double total = 0.0;
    for (const auto& s : scen) {
      std::vector<double> st = s.initial_state.ToVector();
      const auto& P = env.params();
      for (std::size_t t = 0; t < P.T; ++t) {
        std::vector<double> b(3, 0.0);
        if (t + 1 < P.T) {
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) b[r] -= K.at(r, c) * st[c];
        }
        const std::vector<int> mode = {0};
        const auto out = env.Step(Tensor::Matrix(1, 3, st), mode,
                                  Tensor::Matrix(1, 3, b),
                                  Tensor::Zeros({1, 3}));
        total += out.cost.at(0);
        st = out.next_state.ToVector();
      }
    }
    EXPECT_GE(total / scen.size(), opt - 1e-8);
  }
}

TEST(Riccati, SingleModeBaseline) {
  envs::Slqr one(envs::SlqrBuild(2, 1, 1));
  const auto s1 = one.GenerateScenarios(5, 1);
  EXPECT_EQ(BestSingleModeBaseline(one, s1).mode, 0u);

  envs::SlqrParams sym = envs::SlqrBuild(2, 3, 1);
  for (auto& B : sym.B) B = sym.B[0];
  envs::Slqr tie(sym);
  const auto st = tie.GenerateScenarios(5, 1);
  const SingleModeBaseline b = BestSingleModeBaseline(tie, st);
  EXPECT_EQ(b.mode, 0u);
  EXPECT_EQ(b.per_mode.size(), 3u);
  EXPECT_EQ(b.per_mode[0], b.per_mode[2]);
}

TEST(Buckets, EdgesAndPartition) {
  const std::vector<double> e = UniformEdges(0.05, 0.35);
  ASSERT_EQ(e.size(), 8u);
  EXPECT_EQ(BucketOf(0.0, e), 0u);
  EXPECT_EQ(BucketOf(0.32, e), 6u);
  EXPECT_FALSE(BucketOf(0.35, e).has_value());
  EXPECT_FALSE(BucketOf(-0.01, e).has_value());
  EXPECT_EQ(BucketLabel(e, 6), "30-35");
  const std::vector<double> fig = {0.05, 0.10, 0.30, 0.35};
  EXPECT_EQ(BucketOf(0.07, fig), 0u);
  EXPECT_EQ(BucketOf(0.31, fig), 2u);
  EXPECT_EQ(BucketLabel(fig, 2), "30-35");
}

TEST(Buckets, AggregationOrder) {
  std::vector<MetricSample> s;
  auto add = [&](int run, int it, double loss, double align) {
    MetricSample m;
    m.p = 20;
    m.run = run;
    m.iteration = it;
    m.validation_loss = loss;
    m.estimator = "mixed_full";
    m.signal_sq = 4.0;
    m.rmse_sq = 1.0;
    m.align = align;
    s.push_back(m);
  };
  add(0, 0, 100.0, 0.9);
  SetGaps(s, BestReference(s));
  BucketTable t = GapBucketize(s, UniformEdges(0.05, 0.35));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(t.rows[0].align, 0.9);
  EXPECT_DOUBLE_EQ(t.rows[0].signal, 2.0);
  EXPECT_DOUBLE_EQ(t.rows[0].snr, 2.0);

  // Run 0 has two iterations in the bucket, run 1 one: runs weigh equally.
  s.clear();
  add(0, 0, 101.0, 0.2);
  add(0, 1, 101.0, 0.4);
  add(1, 0, 101.0, 0.9);
  add(1, 1, 100.0, 0.0);  // best reference, bucket 0
  add(1, 2, 200.0, 0.0);  // out of range
  SetGaps(s, BestReference(s));
  t = GapBucketize(s, UniformEdges(0.05, 0.35));
  EXPECT_EQ(t.out_of_range, 1u);
  const BucketRow* r = FindRow(t, 20, 0, "mixed_full");
  ASSERT_NE(r, nullptr);
  EXPECT_NEAR(r->align, 0.5 * (0.3 + 0.5 * (0.9 + 0.0)), 1e-12);
  EXPECT_EQ(r->n, 4u);
  EXPECT_EQ(r->runs, 2u);
}

TEST(Buckets, SamplesCsvRoundTrip) {
  MetricSample m;
  m.p = 5;
  m.run = 2;
  m.iteration = 7;
  m.validation_loss = 1.0 / 3.0;
  m.gap = 0.1;
  m.estimator = "sf";
  m.signal_sq = -0.25;
  std::stringstream ss;
  WriteSamplesCsv(ss, {m});
  const auto back = ReadSamplesCsv(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].validation_loss, m.validation_loss);
  EXPECT_EQ(back[0].estimator, "sf");
  EXPECT_EQ(back[0].signal_sq, -0.25);
}

}  // namespace
}  // namespace hpo::analysis
