#ifndef HPO_ENVS_TOY_H_
#define HPO_ENVS_TOY_H_

#include <array>
#include <cstdint>

#include "hpo/envs/environment.h"

namespace hpo::envs {

// Scalar two-mode hybrid MDP small enough to enumerate:
//   s' = a_x s + g_x b + xi,  cost = s^2 + r b^2 + k_x,
// xi on a three-point grid.
struct ToyParams {
  std::size_t T = 2;
  double s0 = 1.5;
  std::array<double, 2> a = {1.0, 0.5};
  std::array<double, 2> g = {1.0, 0.6};
  std::array<double, 2> k = {0.0, 0.4};
  double r = 0.3;
  std::array<double, 3> xi_values = {-1.0, 0.0, 1.0};
  std::array<double, 3> xi_probs = {0.25, 0.5, 0.25};
};

class ToyEnv : public Environment {
 public:
  explicit ToyEnv(ToyParams params = {}) : params_(params) {}

  const ToyParams& params() const { return params_; }

  EnvKind kind() const override { return EnvKind::kToy; }
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  std::size_t num_modes() const override { return 2; }
  std::size_t disturbance_dim() const override { return 1; }
  std::size_t horizon() const override { return params_.T; }

  StepOutput Step(const ad::Tensor& state, std::span<const int> modes,
                  const ad::Tensor& b, const ad::Tensor& xi) const override;

  std::vector<Scenario> GenerateScenarios(std::size_t count,
                                          std::uint64_t seed) const override;

 private:
  ToyParams params_;
};

}  // namespace hpo::envs

#endif  // HPO_ENVS_TOY_H_
