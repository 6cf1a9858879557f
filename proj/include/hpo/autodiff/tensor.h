#ifndef HPO_AUTODIFF_TENSOR_H_
#define HPO_AUTODIFF_TENSOR_H_

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpo::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Raised for any operand shape incompatibility; the message names the
// operation and every offending shape.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tape;

// Dense row-major float64 array. A tensor is either a constant (no tape) or
// a value recorded on a Tape, in which case node() indexes its tape entry.
// Tensors are cheap to copy: the data buffer is shared and immutable.
//
// A tracked tensor must not outlive its tape.
class Tensor {
 public:
  // Scalar zero constant.
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value);
  static Tensor Zeros(Shape shape);
  static Tensor Full(Shape shape, double value);
  static Tensor Vector(std::vector<double> values);
  static Tensor Matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_->size(); }

  std::span<const double> data() const { return *data_; }
  std::vector<double> ToVector() const { return *data_; }
  double item() const;
  double at(std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  // Internal: buffer sharing for ops that do not copy data.
  const std::shared_ptr<const std::vector<double>>& buffer() const {
    return data_;
  }
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data);

 private:
  friend class Tape;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

}  // namespace hpo::ad

#endif  // HPO_AUTODIFF_TENSOR_H_
