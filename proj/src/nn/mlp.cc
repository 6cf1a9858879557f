#include "hpo/nn/mlp.h"

#include <Eigen/Dense>
#include <stdexcept>

#include "hpo/autodiff/ops.h"
#include "hpo/util/rng.h"

namespace hpo::nn {

using ad::Tensor;

Mlp::Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) {
    throw std::invalid_argument("Mlp needs at least input and output sizes");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    params_.push_back(Tensor::Zeros({sizes_[l + 1], sizes_[l]}));
    params_.push_back(Tensor::Zeros({sizes_[l + 1]}));
  }
}

std::size_t Mlp::NumParameters() const {
  std::size_t n = 0;
  for (const Tensor& t : params_) n += t.size();
  return n;
}

std::vector<double> Mlp::FlatParameters() const {
  std::vector<double> flat;
  flat.reserve(NumParameters());
  for (const Tensor& t : params_) {
    flat.insert(flat.end(), t.data().begin(), t.data().end());
  }
  return flat;
}

void Mlp::SetLayer(std::size_t layer, Tensor weight, Tensor bias) {
  if (layer >= num_layers() ||
      weight.shape() != ad::Shape{sizes_[layer + 1], sizes_[layer]} ||
      bias.shape() != ad::Shape{sizes_[layer + 1]}) {
    throw ad::ShapeError("Mlp::SetLayer: layer " + std::to_string(layer) +
                         " expects weight " +
                         ad::ShapeToString({sizes_[layer + 1], sizes_[layer]}) +
                         ", got " + ad::ShapeToString(weight.shape()) +
                         " and bias " + ad::ShapeToString(bias.shape()));
  }
  params_[2 * layer] = StopGrad(weight);
  params_[2 * layer + 1] = StopGrad(bias);
}

std::vector<Tensor> Mlp::Bind(ad::Tape& tape) const {
  std::vector<Tensor> bound;
  bound.reserve(params_.size());
  for (const Tensor& t : params_) bound.push_back(tape.Leaf(t));
  return bound;
}

Tensor Mlp::Forward(std::span<const Tensor> params, const Tensor& input) const {
  if (params.size() != params_.size()) {
    throw std::invalid_argument("Mlp::Forward: expected " +
                                std::to_string(params_.size()) +
                                " parameter tensors, got " +
                                std::to_string(params.size()));
  }
  const bool vector_input = input.rank() == 1;
  Tensor h = vector_input ? ad::Reshape(input, {1, input.dim(0)}) : input;
  if (h.rank() != 2 || h.dim(1) != in_dim()) {
    throw ad::ShapeError("Mlp::Forward: input " +
                         ad::ShapeToString(input.shape()) +
                         " does not match input width " +
                         std::to_string(in_dim()));
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    h = ad::Linear(h, params[2 * l], params[2 * l + 1]);
    if (l + 1 < num_layers()) h = ad::Tanh(h);
  }
  return vector_input ? ad::Reshape(h, {out_dim()}) : h;
}

void Mlp::InitOrthogonal(double hidden_gain, double output_gain,
                         std::uint64_t seed) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double gain = l + 1 == num_layers() ? output_gain : hidden_gain;
    params_[2 * l] =
        OrthogonalMatrix(sizes_[l + 1], sizes_[l], gain, SplitMix64(seed + l));
    params_[2 * l + 1] = Tensor::Zeros({sizes_[l + 1]});
  }
}

Tensor OrthogonalMatrix(std::size_t rows, std::size_t cols, double gain,
                        std::uint64_t seed) {
  const bool tall = rows >= cols;
  const Eigen::Index n = static_cast<Eigen::Index>(tall ? rows : cols);
  const Eigen::Index k = static_cast<Eigen::Index>(tall ? cols : rows);
  Rng rng(seed);
  Eigen::MatrixXd g(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) g(i, j) = rng.Normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  q *= gain;
  std::vector<double> data(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      data[i * cols + j] = tall ? q(static_cast<Eigen::Index>(i),
                                    static_cast<Eigen::Index>(j))
                                : q(static_cast<Eigen::Index>(j),
                                    static_cast<Eigen::Index>(i));
    }
  }
  return Tensor({rows, cols}, std::move(data));
}

}  // namespace hpo::nn
