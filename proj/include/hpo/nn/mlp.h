#ifndef HPO_NN_MLP_H_
#define HPO_NN_MLP_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hpo/autodiff/tape.h"
#include "hpo/autodiff/tensor.h"

namespace hpo::nn {

// Fully connected network with tanh between layers and a linear output.
// Parameters are stored as constants [W0, b0, W1, b1, ...] with W of shape
// [out x in]; Bind() registers a copy on a tape for one differentiable
// forward pass.
class Mlp {
 public:
  Mlp() = default;
  // sizes = {in, hidden..., out}; at least two entries.
  explicit Mlp(std::vector<std::size_t> sizes);

  std::size_t in_dim() const { return sizes_.front(); }
  std::size_t out_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  const std::vector<ad::Tensor>& params() const { return params_; }
  std::vector<ad::Tensor>& mutable_params() { return params_; }
  std::size_t NumParameters() const;
  std::vector<double> FlatParameters() const;

  const ad::Tensor& weight(std::size_t layer) const {
    return params_[2 * layer];
  }
  const ad::Tensor& bias(std::size_t layer) const {
    return params_[2 * layer + 1];
  }
  void SetLayer(std::size_t layer, ad::Tensor weight, ad::Tensor bias);

  std::vector<ad::Tensor> Bind(ad::Tape& tape) const;

  // input: [batch x in_dim] or [in_dim]. Returns [batch x out_dim] (or
  // [out_dim] for vector input).
  ad::Tensor Forward(std::span<const ad::Tensor> params,
                     const ad::Tensor& input) const;
  ad::Tensor Forward(const ad::Tensor& input) const {
    return Forward(params_, input);
  }

  // Hidden weights get hidden_gain, the last layer output_gain. Biases 0.
  void InitOrthogonal(double hidden_gain, double output_gain,
                      std::uint64_t seed);

 private:
  std::vector<std::size_t> sizes_;
  std::vector<ad::Tensor> params_;
};

// rows x cols matrix with orthonormal rows or columns (whichever are
// fewer), scaled by gain. QR of a Gaussian matrix with the signs of R's
// diagonal folded into Q.
ad::Tensor OrthogonalMatrix(std::size_t rows, std::size_t cols, double gain,
                            std::uint64_t seed);

}  // namespace hpo::nn

#endif  // HPO_NN_MLP_H_
