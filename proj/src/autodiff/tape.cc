#include "hpo/autodiff/tape.h"

#include <cblas.h>

#include <cmath>
#include <string>

#include "broadcast.h"

namespace hpo::ad {

const char* OpName(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kTanh: return "tanh";
    case Op::kSoftplus: return "softplus";
    case Op::kMax0: return "max0";
    case Op::kSquare: return "square";
    case Op::kSqrt: return "sqrt";
    case Op::kMaximum: return "maximum";
    case Op::kMinimum: return "minimum";
    case Op::kClamp: return "clamp";
    case Op::kCustomUnary: return "custom_unary";
    case Op::kSum: return "sum";
    case Op::kSumCols: return "sum_cols";
    case Op::kSumRows: return "sum_rows";
    case Op::kMatMul: return "matmul";
    case Op::kLinear: return "linear";
    case Op::kTranspose: return "transpose";
    case Op::kReshape: return "reshape";
    case Op::kSliceCols: return "slice_cols";
    case Op::kConcatCols: return "concat_cols";
    case Op::kGatherBlocks: return "gather_blocks";
    case Op::kLogSoftmaxRows: return "log_softmax_rows";
  }
  return "unknown";
}

std::vector<double> Gradients::Of(const Tensor& t) const {
  if (!t.tracked() || t.tape() != tape_ ||
      t.node() >= static_cast<int>(adjoints_.size()) ||
      adjoints_[t.node()].empty()) {
    return std::vector<double>(t.size(), 0.0);
  }
  return adjoints_[t.node()];
}

std::vector<double> Gradients::Flat(std::span<const Tensor> ts) const {
  std::vector<double> flat;
  for (const Tensor& t : ts) {
    const std::vector<double> g = Of(t);
    flat.insert(flat.end(), g.begin(), g.end());
  }
  return flat;
}

Tensor Tape::Leaf(const Tensor& value) {
  detail::Node node;
  node.op = Op::kLeaf;
  node.shape = value.shape();
  node.value = value.buffer();
  return Record(std::move(node));
}

Tensor Tape::Record(detail::Node node) {
  Tensor t(node.shape, node.value);
  t.tape_ = this;
  t.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(node));
  return t;
}

Gradients Tape::Backward(const Tensor& root) const {
  if (root.size() != 1) {
    throw ShapeError("Backward: root must be scalar, got shape " +
                     ShapeToString(root.shape()));
  }
  Gradients grads;
  grads.tape_ = this;
  if (!root.tracked()) return grads;
  if (root.tape() != this) {
    throw std::logic_error("Backward: root was recorded on another tape");
  }
  grads.adjoints_.resize(root.node() + 1);
  grads.adjoints_[root.node()] = {1.0};
  for (int id = root.node(); id >= 0; --id) {
    if (grads.adjoints_[id].empty()) continue;
    Propagate(id, grads.adjoints_);
  }
  return grads;
}

namespace {

std::vector<double>& Slot(std::vector<std::vector<double>>& adj, int id,
                          std::size_t size) {
  std::vector<double>& a = adj[id];
  if (a.empty()) a.assign(size, 0.0);
  return a;
}

// Accumulates contribution[i] (laid out over the broadcast output shape)
// into the adjoint of input k, summing over broadcast axes.
void AccumulateBroadcast(std::vector<std::vector<double>>& adj,
                         const detail::Node& node, int k,
                         const std::vector<double>& contribution) {
  const int id = node.inputs[k];
  if (id < 0) return;
  const Shape& in_shape = node.input_shapes[k];
  std::vector<double>& a = Slot(adj, id, NumElements(in_shape));
  const internal::BroadcastMap map(in_shape, node.shape);
  if (map.identity()) {
    for (std::size_t i = 0; i < contribution.size(); ++i) a[i] += contribution[i];
  } else {
    for (std::size_t i = 0; i < contribution.size(); ++i) {
      a[map[i]] += contribution[i];
    }
  }
}

}  // namespace

namespace {
Op fault_op = Op::kLeaf;
double fault_scale = 1.0;
}  // namespace

void SetBackwardFault(Op op, double scale) {
  fault_op = op;
  fault_scale = scale;
}

void Tape::Propagate(int id, std::vector<std::vector<double>>& adj) const {
  const detail::Node& node = nodes_[id];
  // adj is sized once in Backward and inputs have smaller ids, so this
  // reference stays valid while input slots are written.
  std::vector<double> faulty;
  if (node.op == fault_op && fault_scale != 1.0) {
    faulty = adj[id];
    for (double& v : faulty) v *= fault_scale;
  }
  const std::vector<double>& g = faulty.empty() ? adj[id] : faulty;
  const std::vector<double>& y = *node.value;
  const std::size_t n = g.size();

  auto input = [&](int k) -> const std::vector<double>& {
    return *node.input_values[k];
  };
  // Elementwise unary rule: adj_x += g * d(x, y).
  auto unary = [&](auto deriv) {
    const int in = node.inputs[0];
    if (in < 0) return;
    const std::vector<double>& x = input(0);
    std::vector<double>& a = Slot(adj, in, x.size());
    for (std::size_t i = 0; i < n; ++i) a[i] += g[i] * deriv(x[i], y[i]);
  };
  // Binary rule with broadcasting: per-output partials da, db.
  auto binary = [&](auto da, auto db) {
    const std::vector<double>& xa = input(0);
    const std::vector<double>& xb = input(1);
    const internal::BroadcastMap ma(node.input_shapes[0], node.shape);
    const internal::BroadcastMap mb(node.input_shapes[1], node.shape);
    if (node.inputs[0] >= 0) {
      std::vector<double> c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = g[i] * da(xa[ma[i]], xb[mb[i]]);
      AccumulateBroadcast(adj, node, 0, c);
    }
    if (node.inputs[1] >= 0) {
      std::vector<double> c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = g[i] * db(xa[ma[i]], xb[mb[i]]);
      AccumulateBroadcast(adj, node, 1, c);
    }
  };

  switch (node.op) {
    case Op::kLeaf:
      return;
    case Op::kAdd:
      binary([](double, double) { return 1.0; },
             [](double, double) { return 1.0; });
      return;
    case Op::kSub:
      binary([](double, double) { return 1.0; },
             [](double, double) { return -1.0; });
      return;
    case Op::kMul:
      binary([](double, double b) { return b; },
             [](double a, double) { return a; });
      return;
    case Op::kDiv:
      binary([](double, double b) { return 1.0 / b; },
             [](double a, double b) { return -a / (b * b); });
      return;
    case Op::kMaximum:
      binary([](double a, double b) { return a >= b ? 1.0 : 0.0; },
             [](double a, double b) { return a >= b ? 0.0 : 1.0; });
      return;
    case Op::kMinimum:
      binary([](double a, double b) { return a <= b ? 1.0 : 0.0; },
             [](double a, double b) { return a <= b ? 0.0 : 1.0; });
      return;
    case Op::kNeg:
      unary([](double, double) { return -1.0; });
      return;
    case Op::kExp:
      unary([](double, double out) { return out; });
      return;
    case Op::kLog:
      unary([](double x, double) { return 1.0 / x; });
      return;
    case Op::kTanh:
      unary([](double, double out) { return 1.0 - out * out; });
      return;
    case Op::kSoftplus:
      unary([](double x, double) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      });
      return;
    case Op::kMax0:
      unary([](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
      return;
    case Op::kSquare:
      unary([](double x, double) { return 2.0 * x; });
      return;
    case Op::kSqrt:
      unary([](double, double out) { return 0.5 / out; });
      return;
    case Op::kClamp: {
      const double lo = node.lo;
      const double hi = node.hi;
      unary([lo, hi](double x, double) {
        return (x >= lo && x <= hi) ? 1.0 : 0.0;
      });
      return;
    }
    case Op::kCustomUnary: {
      const auto& df = node.derivative;
      unary([&df](double x, double) { return df(x); });
      return;
    }
    case Op::kSum: {
      const int in = node.inputs[0];
      if (in < 0) return;
      std::vector<double>& a = Slot(adj, in, input(0).size());
      for (double& v : a) v += g[0];
      return;
    }
    case Op::kSumCols: {
      const int in = node.inputs[0];
      if (in < 0) return;
      const std::size_t cols = node.input_shapes[0][1];
      std::vector<double>& a = Slot(adj, in, input(0).size());
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < cols; ++c) a[r * cols + c] += g[r];
      }
      return;
    }
    case Op::kSumRows: {
      const int in = node.inputs[0];
      if (in < 0) return;
      const std::size_t rows = node.input_shapes[0][0];
      std::vector<double>& a = Slot(adj, in, input(0).size());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < n; ++c) a[r * n + c] += g[c];
      }
      return;
    }
    case Op::kMatMul: {
      const int m = static_cast<int>(node.input_shapes[0][0]);
      const int k = static_cast<int>(node.input_shapes[0][1]);
      const int cols = static_cast<int>(node.input_shapes[1][1]);
      if (m == 0 || k == 0 || cols == 0) return;
      if (node.inputs[0] >= 0) {
        // dA += G * B^T
        std::vector<double>& a = Slot(adj, node.inputs[0], input(0).size());
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, k, cols, 1.0,
                    g.data(), cols, input(1).data(), cols, 1.0, a.data(), k);
      }
      if (node.inputs[1] >= 0) {
        // dB += A^T * G
        std::vector<double>& b = Slot(adj, node.inputs[1], input(1).size());
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, cols, m, 1.0,
                    input(0).data(), k, g.data(), cols, 1.0, b.data(), cols);
      }
      return;
    }
    case Op::kLinear: {
      const int batch = static_cast<int>(node.input_shapes[0][0]);
      const int in = static_cast<int>(node.input_shapes[0][1]);
      const int out = static_cast<int>(node.input_shapes[1][0]);
      if (batch == 0 || in == 0 || out == 0) return;
      if (node.inputs[0] >= 0) {
        // dX += G * W
        std::vector<double>& a = Slot(adj, node.inputs[0], input(0).size());
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, batch, in, out,
                    1.0, g.data(), out, input(1).data(), in, 1.0, a.data(),
                    in);
      }
      if (node.inputs[1] >= 0) {
        // dW += G^T * X
        std::vector<double>& w = Slot(adj, node.inputs[1], input(1).size());
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, out, in, batch,
                    1.0, g.data(), out, input(0).data(), in, 1.0, w.data(),
                    in);
      }
      if (node.inputs[2] >= 0) {
        std::vector<double>& b = Slot(adj, node.inputs[2], input(2).size());
        for (int r = 0; r < batch; ++r) {
          for (int c = 0; c < out; ++c) b[c] += g[r * out + c];
        }
      }
      return;
    }
    case Op::kTranspose: {
      const int in = node.inputs[0];
      if (in < 0) return;
      const std::size_t rows = node.input_shapes[0][0];
      const std::size_t cols = node.input_shapes[0][1];
      std::vector<double>& a = Slot(adj, in, input(0).size());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) a[r * cols + c] += g[c * rows + r];
      }
      return;
    }
    case Op::kReshape: {
      const int in = node.inputs[0];
      if (in < 0) return;
      std::vector<double>& a = Slot(adj, in, n);
      for (std::size_t i = 0; i < n; ++i) a[i] += g[i];
      return;
    }
    case Op::kSliceCols: {
      const int in = node.inputs[0];
      if (in < 0) return;
      const std::size_t rows = node.shape[0];
      const std::size_t width = node.shape[1];
      const std::size_t cols = node.input_shapes[0][1];
      const std::size_t begin = static_cast<std::size_t>(node.index[0]);
      std::vector<double>& a = Slot(adj, in, input(0).size());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
          a[r * cols + begin + c] += g[r * width + c];
        }
      }
      return;
    }
    case Op::kConcatCols: {
      const std::size_t rows = node.shape[0];
      const std::size_t cols = node.shape[1];
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const std::size_t w = node.input_shapes[k][1];
        if (node.inputs[k] >= 0) {
          std::vector<double>& a = Slot(adj, node.inputs[k], rows * w);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
              a[r * w + c] += g[r * cols + offset + c];
            }
          }
        }
        offset += w;
      }
      return;
    }
    case Op::kGatherBlocks: {
      const int in = node.inputs[0];
      if (in < 0) return;
      const std::size_t rows = node.shape[0];
      const std::size_t width = node.shape[1];
      const std::size_t cols = node.input_shapes[0][1];
      std::vector<double>& a = Slot(adj, in, input(0).size());
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t start = r * cols + node.index[r] * width;
        for (std::size_t c = 0; c < width; ++c) a[start + c] += g[r * width + c];
      }
      return;
    }
    case Op::kLogSoftmaxRows: {
      const int in = node.inputs[0];
      if (in < 0) return;
      const std::size_t rows = node.shape[0];
      const std::size_t cols = node.shape[1];
      std::vector<double>& a = Slot(adj, in, n);
      for (std::size_t r = 0; r < rows; ++r) {
        double gsum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gsum += g[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          a[r * cols + c] += g[r * cols + c] - std::exp(y[r * cols + c]) * gsum;
        }
      }
      return;
    }
  }
}

}  // namespace hpo::ad
