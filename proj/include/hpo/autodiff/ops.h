#ifndef HPO_AUTODIFF_OPS_H_
#define HPO_AUTODIFF_OPS_H_

#include <functional>
#include <initializer_list>
#include <span>

#include "hpo/autodiff/tape.h"
#include "hpo/autodiff/tensor.h"

namespace hpo::ad {

// Operations record a node when any operand is tracked and return a plain
// constant otherwise. Binary elementwise ops broadcast numpy-style.

enum class ElementwiseKind {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kTanh,
  kSoftplus,  // log(1 + e^x), the smooth positive part
  kMax0,      // (x)^+; subgradient 0 at the kink
  kSquare,
  kSqrt,
};

// Generic entry point: unary kinds take one operand, binary kinds two.
Tensor Elementwise(ElementwiseKind kind, std::span<const Tensor> operands);

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Div(const Tensor& a, const Tensor& b);
// Elementwise max/min; ties route the adjoint to a.
Tensor Maximum(const Tensor& a, const Tensor& b);
Tensor Minimum(const Tensor& a, const Tensor& b);

Tensor Neg(const Tensor& x);
Tensor Exp(const Tensor& x);
Tensor Log(const Tensor& x);
Tensor Tanh(const Tensor& x);
Tensor Softplus(const Tensor& x);
Tensor Max0(const Tensor& x);
Tensor Square(const Tensor& x);
Tensor Sqrt(const Tensor& x);
// Pass-through derivative on [lo, hi], zero outside.
Tensor Clamp(const Tensor& x, double lo, double hi);
// Elementwise f with caller-supplied derivative df.
Tensor MapUnary(const Tensor& x, const std::function<double(double)>& f,
                std::function<double(double)> df);

// Sum of all elements, shape [].
Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);
// [rows x cols] -> [rows]: sum over each row.
Tensor SumCols(const Tensor& x);
// [rows x cols] -> [cols]: sum over each column.
Tensor SumRows(const Tensor& x);

// [m x k] * [k x n] -> [m x n].
Tensor MatMul(const Tensor& a, const Tensor& b);
// x [batch x in], weight [out x in], bias [out] -> x * weight^T + bias.
Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor Transpose(const Tensor& a);

Tensor Reshape(const Tensor& x, Shape shape);
// Columns [begin, end) of a rank-2 tensor.
Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor ConcatCols(std::span<const Tensor> parts);
Tensor ConcatCols(std::initializer_list<Tensor> parts);
// x [rows x (blocks * width)] -> [rows x width]; row r takes block index[r].
Tensor GatherBlocks(const Tensor& x, std::span<const int> index,
                    std::size_t width);
// Row-wise log-softmax of a rank-2 tensor.
Tensor LogSoftmaxRows(const Tensor& x);

// Same value, no tape node: nothing downstream reaches x's ancestors.
Tensor StopGrad(const Tensor& x);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& x);
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);

// Shape that a and b broadcast to; throws ShapeError naming both shapes.
Shape BroadcastShape(const Shape& a, const Shape& b, const char* op);

}  // namespace hpo::ad

#endif  // HPO_AUTODIFF_OPS_H_
