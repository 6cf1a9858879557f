#include "hpo/autodiff/tensor.h"

#include <functional>
#include <numeric>
#include <sstream>

namespace hpo::ad {

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor()
    : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)),
      data_(std::make_shared<const std::vector<double>>(std::move(data))) {
  if (NumElements(shape_) != data_->size()) {
    throw ShapeError("Tensor: shape " + ShapeToString(shape_) + " needs " +
                     std::to_string(NumElements(shape_)) +
                     " elements, got " + std::to_string(data_->size()));
  }
}

Tensor::Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (NumElements(shape_) != data_->size()) {
    throw ShapeError("Tensor: shape " + ShapeToString(shape_) + " needs " +
                     std::to_string(NumElements(shape_)) +
                     " elements, got " + std::to_string(data_->size()));
  }
}

Tensor Tensor::Scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::Zeros(Shape shape) { return Full(std::move(shape), 0.0); }

Tensor Tensor::Full(Shape shape, double value) {
  const std::size_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::Vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::Matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("Tensor::dim: axis " + std::to_string(axis) +
                     " out of range for shape " + ShapeToString(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("Tensor::item: expected one element, shape is " +
                     ShapeToString(shape_));
  }
  return (*data_)[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return (*data_)[row * shape_.back() + col];
}

}  // namespace hpo::ad
