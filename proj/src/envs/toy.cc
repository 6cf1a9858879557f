#include "hpo/envs/toy.h"

#include "hpo/autodiff/ops.h"
#include "hpo/util/rng.h"

namespace hpo::envs {

using ad::Tensor;

StepOutput ToyEnv::Step(const Tensor& state, std::span<const int> modes,
                        const Tensor& b, const Tensor& xi) const {
  CheckStepShapes(state, modes, b, xi);
  const Tensor next = state * ModeColumn(modes, params_.a) +
                      b * ModeColumn(modes, params_.g) + xi;
  const Tensor cost =
      ad::SumCols(ad::Square(state) + params_.r * ad::Square(b) +
                  ModeColumn(modes, params_.k));
  return {next, cost};
}

std::vector<Scenario> ToyEnv::GenerateScenarios(std::size_t count,
                                                std::uint64_t seed) const {
  std::vector<Scenario> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, i);
    std::vector<double> xi(params_.T);
    for (double& v : xi) v = params_.xi_values[rng.Categorical(params_.xi_probs)];
    out.push_back({Tensor::Vector({params_.s0}),
                   Tensor({params_.T, 1}, std::move(xi)), Tensor::Zeros({0})});
  }
  return out;
}

}  // namespace hpo::envs
