#ifndef HPO_NN_OPTIM_H_
#define HPO_NN_OPTIM_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpo/autodiff/tensor.h"

namespace hpo::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double epsilon = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

class NonFiniteGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Adam over one parameter group. Moment buffers are created lazily on the
// first step and must keep matching the group's layout afterwards.
class Adam {
 public:
  Adam(std::string group, AdamOptions options);

  // grad is the flat concatenation of the gradients of params, in order.
  // Throws NonFiniteGradientError (naming the group) on NaN/inf.
  void Step(std::vector<ad::Tensor>& params, std::span<const double> grad);

  const std::string& group() const { return group_; }
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::int64_t step_count() const { return steps_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  std::string group_;
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

double GlobalNorm(std::span<const double> grad);

// Rescales grad in place to norm max_norm if it is larger. Returns the norm
// before clipping.
double ClipGlobalNorm(std::span<double> grad, double max_norm);

}  // namespace hpo::nn

#endif  // HPO_NN_OPTIM_H_
