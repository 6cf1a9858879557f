#include "hpo/nn/optim.h"

#include <cmath>

namespace hpo::nn {

Adam::Adam(std::string group, AdamOptions options)
    : group_(std::move(group)), options_(options) {}

void Adam::Step(std::vector<ad::Tensor>& params, std::span<const double> grad) {
  std::size_t total = 0;
  for (const ad::Tensor& p : params) total += p.size();
  if (grad.size() != total) {
    throw ad::ShapeError("Adam[" + group_ + "]: gradient has " +
                         std::to_string(grad.size()) + " entries, parameters " +
                         std::to_string(total));
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NonFiniteGradientError("Adam[" + group_ +
                                   "]: non-finite gradient at flat index " +
                                   std::to_string(i));
    }
  }
  if (m_.empty()) {
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  } else if (m_.size() != total) {
    throw ad::ShapeError("Adam[" + group_ + "]: parameter layout changed");
  }
  ++steps_;
  const auto& o = options_;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(steps_));
  const double step_size = o.learning_rate / c1;
  const double sqrt_c2 = std::sqrt(c2);
  std::size_t offset = 0;
  for (ad::Tensor& p : params) {
    std::vector<double> data = p.ToVector();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t f = offset + i;
      m_[f] = o.beta1 * m_[f] + (1.0 - o.beta1) * grad[f];
      v_[f] = o.beta2 * v_[f] + (1.0 - o.beta2) * grad[f] * grad[f];
      data[i] -= step_size * m_[f] / (std::sqrt(v_[f]) / sqrt_c2 + o.epsilon);
    }
    offset += data.size();
    p = ad::Tensor(p.shape(), std::move(data));
  }
}

double GlobalNorm(std::span<const double> grad) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  return std::sqrt(sq);
}

double ClipGlobalNorm(std::span<double> grad, double max_norm) {
  const double norm = GlobalNorm(grad);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

}  // namespace hpo::nn
