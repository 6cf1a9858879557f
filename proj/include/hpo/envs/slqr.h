#ifndef HPO_ENVS_SLQR_H_
#define HPO_ENVS_SLQR_H_

#include <cstdint>
#include <vector>

#include "hpo/envs/environment.h"

namespace hpo::envs {

struct SlqrParams {
  std::size_t p = 1;
  std::size_t J = 1;
  ad::Tensor A;                    // [p x p]
  std::vector<ad::Tensor> B;       // J diagonal [p x p] matrices
  ad::Tensor Q;                    // [p x p]
  ad::Tensor R;                    // [p x p]
  std::size_t T = 20;
  std::vector<std::vector<std::size_t>> groups;  // coordinates per mode
  double noise_std = 0.0;          // W_t ~ N(0, noise_std^2 I)
};

// A = 1.1 I + 0.05 N with N Gaussian, symmetrized, max-abs normalized;
// B_j = diag(1 on group j, 0.15 elsewhere); Q = I, R = 0.1 I.
SlqrParams SlqrBuild(std::size_t p, std::size_t J, std::uint64_t seed);

// J contiguous groups; the first p mod J groups get one extra coordinate.
std::vector<std::vector<std::size_t>> ContiguousGroups(std::size_t p,
                                                       std::size_t J);

class Slqr : public Environment {
 public:
  explicit Slqr(SlqrParams params);

  const SlqrParams& params() const { return params_; }

  EnvKind kind() const override { return EnvKind::kSlqr; }
  std::size_t state_dim() const override { return params_.p; }
  std::size_t action_dim() const override { return params_.p; }
  std::size_t num_modes() const override { return params_.J; }
  std::size_t disturbance_dim() const override { return params_.p; }
  std::size_t horizon() const override { return params_.T; }

  // s' = A s + B_x b + w; cost s'Qs + b'Rb.
  StepOutput Step(const ad::Tensor& state, std::span<const int> modes,
                  const ad::Tensor& b, const ad::Tensor& xi) const override;

  // s0 ~ U[-10/sqrt(p), 10/sqrt(p)]^p; W_t = 0 unless noise_std > 0.
  std::vector<Scenario> GenerateScenarios(std::size_t count,
                                          std::uint64_t seed) const override;

 private:
  SlqrParams params_;
  ad::Tensor a_transpose_;
  ad::Tensor b_diag_;  // [J x p]
};

}  // namespace hpo::envs

#endif  // HPO_ENVS_SLQR_H_
