#ifndef HPO_AUTODIFF_TAPE_H_
#define HPO_AUTODIFF_TAPE_H_

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hpo/autodiff/tensor.h"

namespace hpo::ad {

enum class Op {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kTanh,
  kSoftplus,
  kMax0,
  kSquare,
  kSqrt,
  kMaximum,
  kMinimum,
  kClamp,
  kCustomUnary,
  kSum,
  kSumCols,
  kSumRows,
  kMatMul,
  kLinear,
  kTranspose,
  kReshape,
  kSliceCols,
  kConcatCols,
  kGatherBlocks,
  kLogSoftmaxRows,
};

const char* OpName(Op op);

// Fault injection for negative-control checks: scales every backward
// contribution of nodes of kind op. Process-wide; scale 1 disables it.
void SetBackwardFault(Op op, double scale);

namespace detail {

// One recorded operation. Inputs that are constants are stored with id -1
// but keep their values, since backward rules may need them.
struct Node {
  Op op = Op::kLeaf;
  Shape shape;
  std::shared_ptr<const std::vector<double>> value;
  std::vector<int> inputs;
  std::vector<Shape> input_shapes;
  std::vector<std::shared_ptr<const std::vector<double>>> input_values;
  std::vector<int> index;  // gather indices, slice bounds
  double lo = 0.0;
  double hi = 0.0;
  std::function<double(double)> derivative;  // kCustomUnary only
};

}  // namespace detail

// Adjoint table produced by one backward sweep.
class Gradients {
 public:
  // Adjoint of a tensor recorded on the swept tape; all zeros for constants
  // and for nodes the root does not depend on.
  std::vector<double> Of(const Tensor& t) const;
  // Concatenation of Of(t) over ts.
  std::vector<double> Flat(std::span<const Tensor> ts) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<std::vector<double>> adjoints_;
};

// Append-only record of operations. Every node's inputs precede it, so
// backward is a single reverse sweep. A tape is confined to the thread that
// built it; it is rebuilt (or Clear()ed) for each rollout batch.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers value as a differentiable input.
  Tensor Leaf(const Tensor& value);

  // Reverse sweep from a one-element root. Can be called repeatedly with
  // different roots; each call returns an independent adjoint table.
  Gradients Backward(const Tensor& root) const;

  std::size_t size() const { return nodes_.size(); }
  void Clear() { nodes_.clear(); }

  // Internal recording API used by the op implementations.
  Tensor Record(detail::Node node);
  const detail::Node& node(int id) const { return nodes_[id]; }

 private:
  void Propagate(int id, std::vector<std::vector<double>>& adj) const;

  std::vector<detail::Node> nodes_;
};

}  // namespace hpo::ad

#endif  // HPO_AUTODIFF_TAPE_H_
