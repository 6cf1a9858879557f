#include "hpo/autodiff/ops.h"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "broadcast.h"

namespace hpo::ad {
namespace internal {

BroadcastMap::BroadcastMap(const Shape& in, const Shape& out) {
  if (in == out) {
    kind_ = Kind::kIdentity;
    return;
  }
  if (NumElements(in) == 1) {
    kind_ = Kind::kScalar;
    return;
  }
  kind_ = Kind::kGeneral;
  const std::size_t rank = out.size();
  const std::size_t pad = rank - in.size();
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t k = rank; k-- > pad;) {
    const std::size_t d = in[k - pad];
    in_stride[k] = d == 1 ? 0 : stride;
    stride *= d;
  }
  const std::size_t n = NumElements(out);
  offsets_.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    offsets_[i] = offset;
    // Odometer increment over the output multi-index.
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      offset += in_stride[k];
      if (idx[k] < out[k]) break;
      offset -= in_stride[k] * idx[k];
      idx[k] = 0;
    }
  }
}

}  // namespace internal

namespace {

using detail::Node;
using Buffer = std::shared_ptr<const std::vector<double>>;

Tape* CommonTape(std::initializer_list<const Tensor*> operands,
                 const char* op) {
  Tape* tape = nullptr;
  for (const Tensor* t : operands) {
    if (!t->tracked()) continue;
    if (tape != nullptr && tape != t->tape()) {
      throw std::logic_error(std::string(op) +
                             ": operands recorded on different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

Tape* CommonTape(std::span<const Tensor> operands, const char* op) {
  Tape* tape = nullptr;
  for (const Tensor& t : operands) {
    if (!t.tracked()) continue;
    if (tape != nullptr && tape != t.tape()) {
      throw std::logic_error(std::string(op) +
                             ": operands recorded on different tapes");
    }
    tape = t.tape();
  }
  return tape;
}

// Records the result when a tape is present; otherwise returns a constant.
Tensor Finish(Tape* tape, Node node, std::vector<double> out) {
  node.value = std::make_shared<const std::vector<double>>(std::move(out));
  if (tape == nullptr) return Tensor(node.shape, node.value);
  return tape->Record(std::move(node));
}

void AddInput(Node& node, const Tensor& t) {
  node.inputs.push_back(t.tracked() ? t.node() : -1);
  node.input_shapes.push_back(t.shape());
  node.input_values.push_back(t.buffer());
}

void RequireRank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got shape " +
                     ShapeToString(t.shape()));
  }
}

template <typename F>
Tensor Binary(Op op, const Tensor& a, const Tensor& b, F f) {
  Shape shape = BroadcastShape(a.shape(), b.shape(), OpName(op));
  Tape* tape = CommonTape({&a, &b}, OpName(op));
  const std::size_t n = NumElements(shape);
  std::vector<double> out(n);
  const auto av = a.data();
  const auto bv = b.data();
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else {
    const internal::BroadcastMap ma(a.shape(), shape);
    const internal::BroadcastMap mb(b.shape(), shape);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[ma[i]], bv[mb[i]]);
  }
  Node node;
  node.op = op;
  node.shape = std::move(shape);
  AddInput(node, a);
  AddInput(node, b);
  return Finish(tape, std::move(node), std::move(out));
}

template <typename F>
Tensor Unary(Op op, const Tensor& x, F f) {
  Tape* tape = CommonTape({&x}, OpName(op));
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  std::transform(xv.begin(), xv.end(), out.begin(), f);
  Node node;
  node.op = op;
  node.shape = x.shape();
  AddInput(node, x);
  return Finish(tape, std::move(node), std::move(out));
}

double SoftplusValue(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

Shape BroadcastShape(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return a;
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
    const std::size_t db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + ShapeToString(a) +
                       " and " + ShapeToString(b) +
                       " are not broadcast-compatible");
    }
    out[k] = da == 1 ? db : da;
  }
  return out;
}

Tensor Elementwise(ElementwiseKind kind, std::span<const Tensor> operands) {
  const bool binary = kind == ElementwiseKind::kAdd ||
                      kind == ElementwiseKind::kSub ||
                      kind == ElementwiseKind::kMul ||
                      kind == ElementwiseKind::kDiv;
  const std::size_t arity = binary ? 2 : 1;
  if (operands.size() != arity) {
    throw std::invalid_argument("Elementwise: expected " +
                                std::to_string(arity) + " operands, got " +
                                std::to_string(operands.size()));
  }
  switch (kind) {
    case ElementwiseKind::kAdd:
      return Add(operands[0], operands[1]);
    case ElementwiseKind::kSub:
      return Sub(operands[0], operands[1]);
    case ElementwiseKind::kMul:
      return Mul(operands[0], operands[1]);
    case ElementwiseKind::kDiv:
      return Div(operands[0], operands[1]);
    case ElementwiseKind::kNeg:
      return Neg(operands[0]);
    case ElementwiseKind::kExp:
      return Exp(operands[0]);
    case ElementwiseKind::kLog:
      return Log(operands[0]);
    case ElementwiseKind::kTanh:
      return Tanh(operands[0]);
    case ElementwiseKind::kSoftplus:
      return Softplus(operands[0]);
    case ElementwiseKind::kMax0:
      return Max0(operands[0]);
    case ElementwiseKind::kSquare:
      return Square(operands[0]);
    case ElementwiseKind::kSqrt:
      return Sqrt(operands[0]);
  }
  throw std::invalid_argument("Elementwise: unknown kind");
}

Tensor Add(const Tensor& a, const Tensor& b) {
  return Binary(Op::kAdd, a, b, [](double x, double y) { return x + y; });
}
Tensor Sub(const Tensor& a, const Tensor& b) {
  return Binary(Op::kSub, a, b, [](double x, double y) { return x - y; });
}
Tensor Mul(const Tensor& a, const Tensor& b) {
  return Binary(Op::kMul, a, b, [](double x, double y) { return x * y; });
}
Tensor Div(const Tensor& a, const Tensor& b) {
  return Binary(Op::kDiv, a, b, [](double x, double y) { return x / y; });
}
Tensor Maximum(const Tensor& a, const Tensor& b) {
  return Binary(Op::kMaximum, a, b,
                [](double x, double y) { return x >= y ? x : y; });
}
Tensor Minimum(const Tensor& a, const Tensor& b) {
  return Binary(Op::kMinimum, a, b,
                [](double x, double y) { return x <= y ? x : y; });
}

Tensor Neg(const Tensor& x) {
  return Unary(Op::kNeg, x, [](double v) { return -v; });
}
Tensor Exp(const Tensor& x) {
  return Unary(Op::kExp, x, [](double v) { return std::exp(v); });
}
Tensor Log(const Tensor& x) {
  return Unary(Op::kLog, x, [](double v) { return std::log(v); });
}
namespace {
// libm tanh goes through expm1 and dominated training profiles. This form
// is within a couple of ulps in absolute terms, which is all the nets need.
double TanhValue(double v) {
  const double e = std::exp(-2.0 * std::fabs(v));
  return std::copysign((1.0 - e) / (1.0 + e), v);
}
}  // namespace

Tensor Tanh(const Tensor& x) { return Unary(Op::kTanh, x, TanhValue); }
Tensor Softplus(const Tensor& x) {
  return Unary(Op::kSoftplus, x, SoftplusValue);
}
Tensor Max0(const Tensor& x) {
  return Unary(Op::kMax0, x, [](double v) { return v > 0.0 ? v : 0.0; });
}
Tensor Square(const Tensor& x) {
  return Unary(Op::kSquare, x, [](double v) { return v * v; });
}
Tensor Sqrt(const Tensor& x) {
  return Unary(Op::kSqrt, x, [](double v) { return std::sqrt(v); });
}

Tensor Clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("Clamp: lo > hi");
  Tape* tape = CommonTape({&x}, "Clamp");
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = std::clamp(xv[i], lo, hi);
  }
  Node node;
  node.op = Op::kClamp;
  node.shape = x.shape();
  node.lo = lo;
  node.hi = hi;
  AddInput(node, x);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor MapUnary(const Tensor& x, const std::function<double(double)>& f,
                std::function<double(double)> df) {
  Tape* tape = CommonTape({&x}, "MapUnary");
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  std::transform(xv.begin(), xv.end(), out.begin(), f);
  Node node;
  node.op = Op::kCustomUnary;
  node.shape = x.shape();
  node.derivative = std::move(df);
  AddInput(node, x);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor Sum(const Tensor& x) {
  Tape* tape = CommonTape({&x}, "Sum");
  const auto xv = x.data();
  double total = 0.0;
  for (double v : xv) total += v;
  Node node;
  node.op = Op::kSum;
  node.shape = {};
  AddInput(node, x);
  return Finish(tape, std::move(node), {total});
}

Tensor Mean(const Tensor& x) {
  return Sum(x) * (1.0 / static_cast<double>(x.size()));
}

Tensor SumCols(const Tensor& x) {
  RequireRank(x, 2, "SumCols");
  Tape* tape = CommonTape({&x}, "SumCols");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const auto xv = x.data();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += xv[r * cols + c];
    out[r] = acc;
  }
  Node node;
  node.op = Op::kSumCols;
  node.shape = {rows};
  AddInput(node, x);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor SumRows(const Tensor& x) {
  RequireRank(x, 2, "SumRows");
  Tape* tape = CommonTape({&x}, "SumRows");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const auto xv = x.data();
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += xv[r * cols + c];
  }
  Node node;
  node.op = Op::kSumRows;
  node.shape = {cols};
  AddInput(node, x);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank(a, 2, "MatMul");
  RequireRank(b, 2, "MatMul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("MatMul: inner dimensions differ, shapes " +
                     ShapeToString(a.shape()) + " and " +
                     ShapeToString(b.shape()));
  }
  Tape* tape = CommonTape({&a, &b}, "MatMul");
  const int m = static_cast<int>(a.dim(0));
  const int k = static_cast<int>(a.dim(1));
  const int n = static_cast<int>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  if (m > 0 && n > 0 && k > 0) {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0,
                a.data().data(), k, b.data().data(), n, 0.0, out.data(), n);
  }
  Node node;
  node.op = Op::kMatMul;
  node.shape = {a.dim(0), b.dim(1)};
  AddInput(node, a);
  AddInput(node, b);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  RequireRank(x, 2, "Linear");
  RequireRank(weight, 2, "Linear");
  RequireRank(bias, 1, "Linear");
  if (x.dim(1) != weight.dim(1) || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("Linear: input " + ShapeToString(x.shape()) +
                     ", weight " + ShapeToString(weight.shape()) +
                     ", bias " + ShapeToString(bias.shape()) +
                     " are incompatible");
  }
  Tape* tape = CommonTape({&x, &weight, &bias}, "Linear");
  const int batch = static_cast<int>(x.dim(0));
  const int in = static_cast<int>(x.dim(1));
  const int out_dim = static_cast<int>(weight.dim(0));
  std::vector<double> out(static_cast<std::size_t>(batch) * out_dim);
  const auto bv = bias.data();
  for (int r = 0; r < batch; ++r) {
    std::copy(bv.begin(), bv.end(), out.begin() + r * out_dim);
  }
  if (batch > 0 && out_dim > 0 && in > 0) {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, batch, out_dim, in,
                1.0, x.data().data(), in, weight.data().data(), in, 1.0,
                out.data(), out_dim);
  }
  Node node;
  node.op = Op::kLinear;
  node.shape = {x.dim(0), weight.dim(0)};
  AddInput(node, x);
  AddInput(node, weight);
  AddInput(node, bias);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor Transpose(const Tensor& a) {
  RequireRank(a, 2, "Transpose");
  Tape* tape = CommonTape({&a}, "Transpose");
  const std::size_t rows = a.dim(0);
  const std::size_t cols = a.dim(1);
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = av[r * cols + c];
  }
  Node node;
  node.op = Op::kTranspose;
  node.shape = {cols, rows};
  AddInput(node, a);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    throw ShapeError("Reshape: cannot view " + ShapeToString(x.shape()) +
                     " as " + ShapeToString(shape));
  }
  if (!x.tracked()) return Tensor(std::move(shape), x.buffer());
  Node node;
  node.op = Op::kReshape;
  node.shape = std::move(shape);
  node.value = x.buffer();
  AddInput(node, x);
  return x.tape()->Record(std::move(node));
}

Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t end) {
  RequireRank(x, 2, "SliceCols");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  if (begin > end || end > cols) {
    throw ShapeError("SliceCols: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for shape " +
                     ShapeToString(x.shape()));
  }
  Tape* tape = CommonTape({&x}, "SliceCols");
  const std::size_t width = end - begin;
  const auto xv = x.data();
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(xv.begin() + r * cols + begin, xv.begin() + r * cols + end,
              out.begin() + r * width);
  }
  Node node;
  node.op = Op::kSliceCols;
  node.shape = {rows, width};
  node.index = {static_cast<int>(begin), static_cast<int>(end)};
  AddInput(node, x);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor ConcatCols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("ConcatCols: no operands");
  const std::size_t rows = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t cols = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows) {
      std::string shapes;
      for (const Tensor& q : parts) shapes += ShapeToString(q.shape()) + " ";
      throw ShapeError("ConcatCols: incompatible shapes " + shapes);
    }
    cols += p.dim(1);
  }
  Tape* tape = CommonTape(parts, "ConcatCols");
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  Node node;
  node.op = Op::kConcatCols;
  node.shape = {rows, cols};
  for (const Tensor& p : parts) {
    const std::size_t w = p.dim(1);
    const auto pv = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.begin() + r * w, pv.begin() + (r + 1) * w,
                out.begin() + r * cols + offset);
    }
    offset += w;
    AddInput(node, p);
  }
  return Finish(tape, std::move(node), std::move(out));
}

Tensor ConcatCols(std::initializer_list<Tensor> parts) {
  return ConcatCols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor GatherBlocks(const Tensor& x, std::span<const int> index,
                    std::size_t width) {
  RequireRank(x, 2, "GatherBlocks");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  if (index.size() != rows || width == 0 || cols % width != 0) {
    throw ShapeError("GatherBlocks: " + std::to_string(index.size()) +
                     " indices, block width " + std::to_string(width) +
                     ", shape " + ShapeToString(x.shape()));
  }
  const int blocks = static_cast<int>(cols / width);
  Tape* tape = CommonTape({&x}, "GatherBlocks");
  const auto xv = x.data();
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] < 0 || index[r] >= blocks) {
      throw std::out_of_range("GatherBlocks: block index " +
                              std::to_string(index[r]) + " not in [0, " +
                              std::to_string(blocks) + ")");
    }
    const std::size_t start = r * cols + index[r] * width;
    std::copy(xv.begin() + start, xv.begin() + start + width,
              out.begin() + r * width);
  }
  Node node;
  node.op = Op::kGatherBlocks;
  node.shape = {rows, width};
  node.index.assign(index.begin(), index.end());
  node.lo = static_cast<double>(width);
  AddInput(node, x);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor LogSoftmaxRows(const Tensor& x) {
  RequireRank(x, 2, "LogSoftmaxRows");
  Tape* tape = CommonTape({&x}, "LogSoftmaxRows");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = row[c] - lse;
  }
  Node node;
  node.op = Op::kLogSoftmaxRows;
  node.shape = x.shape();
  AddInput(node, x);
  return Finish(tape, std::move(node), std::move(out));
}

Tensor StopGrad(const Tensor& x) { return Tensor(x.shape(), x.buffer()); }

Tensor operator+(const Tensor& a, const Tensor& b) { return Add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return Sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return Mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return Div(a, b); }
Tensor operator-(const Tensor& x) { return Neg(x); }
Tensor operator+(const Tensor& a, double b) { return Add(a, Tensor::Scalar(b)); }
Tensor operator+(double a, const Tensor& b) { return Add(Tensor::Scalar(a), b); }
Tensor operator-(const Tensor& a, double b) { return Sub(a, Tensor::Scalar(b)); }
Tensor operator-(double a, const Tensor& b) { return Sub(Tensor::Scalar(a), b); }
Tensor operator*(const Tensor& a, double b) { return Mul(a, Tensor::Scalar(b)); }
Tensor operator*(double a, const Tensor& b) { return Mul(Tensor::Scalar(a), b); }
Tensor operator/(const Tensor& a, double b) { return Div(a, Tensor::Scalar(b)); }

}  // namespace hpo::ad
