#include <cmath>
#include <memory>
#include <vector>

#include "gtest/gtest.h"
#include "hpo/autodiff/ops.h"
#include "hpo/autodiff/tape.h"
#include "hpo/util/rng.h"
#include "test_util.h"

namespace hpo::ad {
namespace {

using ::hpo::testing::CentralDiff;
using ::hpo::testing::MaxRelErr;

// Gradient of f at x via the tape.
std::vector<double> TapeGrad(
    const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
  Tape tape;
  Tensor leaf = tape.Leaf(x);
  Tensor y = f(leaf);
  return tape.Backward(y).Of(leaf);
}

std::vector<double> FdGrad(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& x, double h = 1e-6) {
  return CentralDiff(
      [&](const std::vector<double>& v) {
        return f(Tensor(x.shape(), v)).item();
      },
      x.ToVector(), h);
}

TEST(ElementwiseTest, Max0Definition) {
  Tensor y = Max0(Tensor::Vector({-1.0, 0.0, 2.0}));
  EXPECT_EQ(y.ToVector(), (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(ElementwiseTest, Max0SubgradientAtKinkIsZero) {
  auto g = TapeGrad([](const Tensor& x) { return Sum(Max0(x)); },
                    Tensor::Vector({-1.0, 0.0, 2.0}));
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(ElementwiseTest, TanhAtZero) {
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Scalar(0.0));
  Tensor y = Tanh(x);
  EXPECT_EQ(y.item(), 0.0);
  EXPECT_DOUBLE_EQ(tape.Backward(y).Of(x)[0], 1.0);
}

TEST(ElementwiseTest, SquareDerivativeMatchesFiniteDifference) {
  auto f = [](const Tensor& x) { return x * x; };
  const Tensor x = Tensor::Scalar(3.0);
  const std::vector<double> fd = FdGrad(f, x, 1e-6);
  EXPECT_NEAR(fd[0], 6.0, 1e-8);
  EXPECT_NEAR(TapeGrad(f, x)[0], fd[0], 1e-8);
  EXPECT_DOUBLE_EQ(TapeGrad(f, x)[0], 6.0);
}

TEST(ElementwiseTest, GenericEntryPointDispatches) {
  const Tensor a = Tensor::Vector({1.0, 2.0});
  const Tensor b = Tensor::Vector({3.0, 5.0});
  const Tensor ops[] = {a, b};
  EXPECT_EQ(Elementwise(ElementwiseKind::kMul, ops).ToVector(),
            (std::vector<double>{3.0, 10.0}));
  const Tensor one[] = {a};
  EXPECT_EQ(Elementwise(ElementwiseKind::kSquare, one).ToVector(),
            (std::vector<double>{1.0, 4.0}));
  EXPECT_THROW(Elementwise(ElementwiseKind::kAdd, one), std::invalid_argument);
}

TEST(ElementwiseTest, ShapeMismatchNamesBothShapes) {
  const Tensor a = Tensor::Zeros({2, 3});
  const Tensor b = Tensor::Zeros({4});
  try {
    Add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4]"), std::string::npos) << msg;
  }
}

TEST(ElementwiseTest, UnaryOpsMatchFiniteDifferences) {
  const Tensor x = Tensor::Vector({-1.3, -0.2, 0.4, 1.7});
  const Tensor pos = Tensor::Vector({0.3, 0.9, 1.5, 4.0});
  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&)> f;
    Tensor at;
  };
  const std::vector<Case> cases = {
      {"neg", [](const Tensor& v) { return Sum(Neg(v) * v); }, x},
      {"exp", [](const Tensor& v) { return Sum(Exp(v)); }, x},
      {"log", [](const Tensor& v) { return Sum(Log(v)); }, pos},
      {"tanh", [](const Tensor& v) { return Sum(Tanh(v)); }, x},
      {"softplus", [](const Tensor& v) { return Sum(Softplus(v)); }, x},
      {"max0", [](const Tensor& v) { return Sum(Max0(v) * v); }, x},
      {"square", [](const Tensor& v) { return Sum(Square(v)); }, x},
      {"sqrt", [](const Tensor& v) { return Sum(Sqrt(v)); }, pos},
      {"clamp", [](const Tensor& v) { return Sum(Clamp(v, -1.0, 1.0) * v); },
       x},
      {"div", [](const Tensor& v) { return Sum(v / (v * v + 1.0)); }, x},
  };
  for (const Case& c : cases) {
    EXPECT_LT(MaxRelErr(TapeGrad(c.f, c.at), FdGrad(c.f, c.at)), 1e-7)
        << c.name;
  }
}

TEST(ElementwiseTest, BroadcastBackwardSumsOverExpandedAxes) {
  const Tensor m = Tensor::Matrix(3, 2, {1, 2, 3, 4, 5, 6});
  auto f = [&m](const Tensor& bias) { return Sum(Square(m * bias + bias)); };
  const Tensor bias = Tensor::Vector({0.5, -0.25});
  EXPECT_LT(MaxRelErr(TapeGrad(f, bias), FdGrad(f, bias)), 1e-7);

  auto g = [&m](const Tensor& col) { return Sum(Tanh(m - col)); };
  const Tensor col = Tensor::Matrix(3, 1, {0.1, 0.2, 0.3});
  EXPECT_LT(MaxRelErr(TapeGrad(g, col), FdGrad(g, col)), 1e-7);
}

TEST(MatMulTest, IdentityLeavesVectorUnchanged) {
  const Tensor eye = Tensor::Matrix(2, 2, {1, 0, 0, 1});
  const Tensor v = Tensor::Matrix(2, 1, {3.5, -7.25});
  EXPECT_EQ(MatMul(eye, v).ToVector(), v.ToVector());
}

TEST(MatMulTest, HandComputedProduct) {
  const Tensor a = Tensor::Matrix(2, 2, {1, 2, 3, 4});
  const Tensor b = Tensor::Matrix(2, 1, {1, 1});
  const Tensor c = MatMul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c.ToVector(), (std::vector<double>{3.0, 7.0}));
}

TEST(MatMulTest, GradientOfSumMatchesFiniteDifferences) {
  const Tensor a = Tensor::Matrix(3, 2, {0.5, -1.0, 2.0, 0.25, -0.75, 1.5});
  auto f = [&a](const Tensor& x) { return Sum(MatMul(a, x)); };
  const Tensor x = Tensor::Matrix(2, 2, {1.0, -2.0, 0.5, 3.0});
  EXPECT_LT(MaxRelErr(TapeGrad(f, x), FdGrad(f, x)), 1e-6);
  // Both operands, nonlinear downstream.
  auto h = [&x](const Tensor& lhs) { return Sum(Tanh(MatMul(lhs, x))); };
  EXPECT_LT(MaxRelErr(TapeGrad(h, a), FdGrad(h, a)), 1e-6);
}

TEST(MatMulTest, InnerDimensionMismatchThrows) {
  EXPECT_THROW(MatMul(Tensor::Zeros({2, 3}), Tensor::Zeros({2, 3})),
               ShapeError);
}

TEST(StructuralOpsTest, BackwardRulesMatchFiniteDifferences) {
  const Tensor x = Tensor::Matrix(2, 6, {0.1, -0.4, 0.9, 1.2, -1.1, 0.3,  //
                                         0.7, 0.2, -0.6, 0.5, 0.8, -0.2});
  const std::vector<int> pick = {2, 0};
  const Tensor w = Tensor::Matrix(3, 6, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6,   //
                                         -0.1, 0.0, 0.1, 0.2, -0.3, 0.4,  //
                                         0.3, -0.2, 0.1, 0.0, 0.1, -0.2});
  const Tensor b = Tensor::Vector({0.05, -0.05, 0.2});
  const std::vector<std::function<Tensor(const Tensor&)>> fs = {
      [&](const Tensor& v) { return Sum(Square(GatherBlocks(v, pick, 2))); },
      [&](const Tensor& v) { return Sum(Exp(SliceCols(v, 1, 4))); },
      [&](const Tensor& v) {
        return Sum(Tanh(ConcatCols({SliceCols(v, 0, 2), v, Square(v)})));
      },
      [&](const Tensor& v) {
        return Sum(GatherBlocks(LogSoftmaxRows(v), std::vector<int>{4, 1}, 1));
      },
      [&](const Tensor& v) { return Sum(Square(Linear(v, w, b))); },
      [&](const Tensor& v) { return Sum(Tanh(Linear(Tanh(v), w, b))); },
      [&](const Tensor& v) { return Sum(Square(SumCols(v))); },
      [&](const Tensor& v) { return Sum(Square(SumRows(v))); },
      [&](const Tensor& v) { return Sum(Square(Transpose(v)) * 0.5); },
      [&](const Tensor& v) { return Sum(Square(Reshape(v, {3, 4}))); },
      [&](const Tensor& v) { return Sum(Maximum(v, Square(v) - 0.5)); },
      [&](const Tensor& v) { return Sum(Minimum(v, Tanh(v) * 0.3)); },
  };
  for (std::size_t i = 0; i < fs.size(); ++i) {
    EXPECT_LT(MaxRelErr(TapeGrad(fs[i], x), FdGrad(fs[i], x)), 1e-7)
        << "case " << i;
  }
}

TEST(StructuralOpsTest, LinearGradientWrtWeightAndBias) {
  const Tensor x = Tensor::Matrix(4, 2, {1, 2, -1, 0.5, 0.3, -0.7, 2, 1});
  const Tensor w = Tensor::Matrix(3, 2, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6});
  const Tensor b = Tensor::Vector({0.1, 0.2, -0.3});
  auto fw = [&](const Tensor& v) { return Sum(Tanh(Linear(x, v, b))); };
  auto fb = [&](const Tensor& v) { return Sum(Tanh(Linear(x, w, v))); };
  EXPECT_LT(MaxRelErr(TapeGrad(fw, w), FdGrad(fw, w)), 1e-7);
  EXPECT_LT(MaxRelErr(TapeGrad(fb, b), FdGrad(fb, b)), 1e-7);
}

TEST(StructuralOpsTest, GatherBlocksRejectsOutOfRangeIndex) {
  EXPECT_THROW(GatherBlocks(Tensor::Zeros({1, 4}), std::vector<int>{2}, 2),
               std::out_of_range);
  EXPECT_THROW(GatherBlocks(Tensor::Zeros({2, 4}), std::vector<int>{0}, 2),
               ShapeError);
}

TEST(StopGradTest, DetachedFactorGetsNoAdjoint) {
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Scalar(2.0));
  Tensor y = tape.Leaf(Tensor::Scalar(5.0));
  Tensor out = StopGrad(x) * y;
  EXPECT_EQ(out.item(), 10.0);
  Gradients g = tape.Backward(out);
  EXPECT_EQ(g.Of(x)[0], 0.0);
  EXPECT_EQ(g.Of(y)[0], 2.0);
  EXPECT_FALSE(StopGrad(x).tracked());
}

TEST(StopGradTest, OnlyLiveBranchContributes) {
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Scalar(1.5));
  Gradients g = tape.Backward(x + StopGrad(x));
  EXPECT_EQ(g.Of(x)[0], 1.0);
}

TEST(StopGradTest, Idempotent) {
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Vector({1.0, -2.0}));
  Tensor once = StopGrad(x);
  Tensor twice = StopGrad(StopGrad(x));
  EXPECT_EQ(once.ToVector(), twice.ToVector());
  Gradients g1 = tape.Backward(Sum(once * x));
  Gradients g2 = tape.Backward(Sum(twice * x));
  EXPECT_EQ(g1.Of(x), g2.Of(x));
}

// Two-step scalar rollout in the shape of the hybrid estimator loop: the
// state depends on kappa; the discrete score is evaluated on either the live
// or the detached state.
TEST(StopGradTest, DetachingStateInsideScoreRemovesOnlyKappaCrossTerm) {
  auto run = [](bool drop_cross) {
    Tape tape;
    Tensor kappa = tape.Leaf(Tensor::Scalar(0.7));
    Tensor phi = tape.Leaf(Tensor::Scalar(-0.4));
    Tensor s = Tensor::Scalar(1.0);
    Tensor loss = Tensor::Scalar(0.0);
    for (int t = 0; t < 2; ++t) {
      Tensor s_score = drop_cross ? StopGrad(s) : s;
      Tensor logits = Reshape(
          ConcatCols({Tensor::Zeros({1, 1}), Reshape(phi * s_score, {1, 1})}),
          {1, 2});
      Tensor logp = Sum(GatherBlocks(LogSoftmaxRows(logits),
                                     std::vector<int>{1}, 1));
      Tensor b = kappa * s;
      Tensor cost = Square(s) + 0.5 * Square(b);
      const double advantage = 1.3 - 0.2 * t;  // detached weight
      loss = loss + cost + advantage * logp;
      s = s + b - 0.3;
    }
    Gradients g = tape.Backward(loss);
    return std::pair(g.Of(kappa)[0], g.Of(phi)[0]);
  };
  const auto [kappa_full, phi_full] = run(false);
  const auto [kappa_drop, phi_drop] = run(true);
  EXPECT_DOUBLE_EQ(phi_full, phi_drop);
  EXPECT_GT(std::abs(kappa_full - kappa_drop), 1e-3);

  // The removed piece is exactly d/dkappa of sum_t A_t logp_t through s.
  Tape tape;
  Tensor kappa = tape.Leaf(Tensor::Scalar(0.7));
  Tensor s = Tensor::Scalar(1.0);
  Tensor cross = Tensor::Scalar(0.0);
  for (int t = 0; t < 2; ++t) {
    Tensor logits = ConcatCols(
        {Tensor::Zeros({1, 1}), Reshape(Tensor::Scalar(-0.4) * s, {1, 1})});
    Tensor logp =
        Sum(GatherBlocks(LogSoftmaxRows(logits), std::vector<int>{1}, 1));
    cross = cross + (1.3 - 0.2 * t) * logp;
    s = s + kappa * s - 0.3;
  }
  EXPECT_NEAR(kappa_full - kappa_drop, tape.Backward(cross).Of(kappa)[0],
              1e-12);
}

TEST(BackwardTest, ConstantRootGivesZeroAdjoints) {
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Vector({1.0, 2.0}));
  Tensor root = Sum(StopGrad(x));
  Gradients g = tape.Backward(root);
  EXPECT_EQ(g.Of(x), (std::vector<double>{0.0, 0.0}));
}

TEST(BackwardTest, SumOfSquares) {
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Vector({1.0, 2.0, 3.0}));
  Tensor root = Sum(Square(x));
  EXPECT_EQ(tape.Backward(root).Of(x), (std::vector<double>{2.0, 4.0, 6.0}));
}

TEST(BackwardTest, RootAdjointIsOne) {
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Scalar(3.0));
  Tensor root = Exp(x);
  EXPECT_EQ(tape.Backward(root).Of(root)[0], 1.0);
}

TEST(BackwardTest, NonScalarRootThrows) {
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Vector({1.0, 2.0}));
  EXPECT_THROW(tape.Backward(x * 2.0), ShapeError);
}

TEST(BackwardTest, MixingTapesThrows) {
  Tape t1;
  Tape t2;
  Tensor a = t1.Leaf(Tensor::Scalar(1.0));
  Tensor b = t2.Leaf(Tensor::Scalar(1.0));
  EXPECT_THROW(a + b, std::logic_error);
}

TEST(BackwardTest, LinearInTheRoot) {
  // adjoints(a f + b g) = a adjoints(f) + b adjoints(g)
  Tape tape;
  Tensor x = tape.Leaf(Tensor::Vector({0.3, -1.2, 2.0}));
  Tensor f = Sum(Tanh(x) * x);
  Tensor g = Sum(Exp(x * 0.5));
  const double ca = 2.5;
  const double cb = -0.75;
  const auto gf = tape.Backward(f).Of(x);
  const auto gg = tape.Backward(g).Of(x);
  const auto gc = tape.Backward(ca * f + cb * g).Of(x);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(gc[i], ca * gf[i] + cb * gg[i], 1e-12);
  }
}

// Random expression trees over the op set, compared with central
// differences. Arguments of log/sqrt/div are kept positive and exp inputs
// bounded; samples landing within 1e-3 of a max0 kink are redrawn.
class RandomExpression {
 public:
  RandomExpression(Rng& rng, int depth, int num_vars) {
    root_ = Build(rng, depth, num_vars);
  }

  Tensor Eval(const std::vector<Tensor>& vars, bool* near_kink) const {
    return EvalNode(root_, vars, near_kink);
  }

 private:
  struct Node {
    int kind;
    int var = -1;
    double constant = 0.0;
    std::vector<int> kids;
  };

  int Build(Rng& rng, int depth, int num_vars) {
    Node n;
    if (depth == 0 || rng.Uniform() < 0.15) {
      if (rng.Uniform() < 0.8) {
        n.kind = 0;
        n.var = static_cast<int>(rng.UniformInt(num_vars));
      } else {
        n.kind = 1;
        n.constant = rng.Uniform(-1.5, 1.5);
      }
    } else {
      n.kind = 2 + static_cast<int>(rng.UniformInt(13));
      const int arity = n.kind <= 5 ? 2 : 1;
      for (int k = 0; k < arity; ++k) {
        n.kids.push_back(Build(rng, depth - 1, num_vars));
      }
    }
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  Tensor EvalNode(int id, const std::vector<Tensor>& vars,
                  bool* near_kink) const {
    const Node& n = nodes_[id];
    if (n.kind == 0) return vars[n.var];
    if (n.kind == 1) return Tensor::Scalar(n.constant);
    const Tensor a = EvalNode(n.kids[0], vars, near_kink);
    const Tensor b =
        n.kids.size() > 1 ? EvalNode(n.kids[1], vars, near_kink) : Tensor();
    switch (n.kind) {
      case 2: return a + b;
      case 3: return a - b;
      case 4: return Tanh(a) * b;
      case 5: return a / (1.0 + Square(b));
      case 6: return -a;
      case 7: return Exp(Tanh(a));
      case 8: return Log(Softplus(a) + 0.1);
      case 9: return Tanh(a);
      case 10: return Softplus(a);
      case 11:
        for (double v : a.data()) {
          if (std::abs(v) < 1e-3) *near_kink = true;
        }
        return Max0(a);
      case 12: return Square(Tanh(a)) * 2.0;
      case 13: return Sqrt(Square(a) + 0.25);
      default: return Log(Square(a) + 1.0);
    }
  }

  std::vector<Node> nodes_;
  int root_;
};

TEST(PropertyTest, RandomExpressionTreesMatchFiniteDifferences) {
  Rng rng(20240611);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int depth = 1 + static_cast<int>(rng.UniformInt(6));
    const RandomExpression expr(rng, depth, 3);
    std::vector<double> x = {rng.Uniform(-2, 2), rng.Uniform(-2, 2),
                             rng.Uniform(-2, 2)};
    auto eval = [&expr](const std::vector<double>& v, bool* kink) {
      std::vector<Tensor> vars;
      for (double e : v) vars.push_back(Tensor::Scalar(e));
      return Sum(expr.Eval(vars, kink)).item();
    };
    bool kink = false;
    eval(x, &kink);
    if (kink) continue;

    Tape tape;
    std::vector<Tensor> leaves;
    for (double e : x) leaves.push_back(tape.Leaf(Tensor::Scalar(e)));
    bool unused = false;
    Tensor root = Sum(expr.Eval(leaves, &unused));
    std::vector<double> ad;
    for (const Tensor& l : leaves) ad.push_back(tape.Backward(root).Of(l)[0]);
    bool fd_kink = false;
    const std::vector<double> fd = CentralDiff(
        [&](const std::vector<double>& v) { return eval(v, &fd_kink); }, x,
        1e-6);
    if (fd_kink) continue;
    EXPECT_LT(MaxRelErr(ad, fd), 1e-5) << "trial " << trial;
    ++checked;
  }
  EXPECT_GT(checked, 200);
}

}  // namespace
}  // namespace hpo::ad
