#ifndef HPO_ENVS_ENVIRONMENT_H_
#define HPO_ENVS_ENVIRONMENT_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hpo/autodiff/tensor.h"

namespace hpo::envs {

enum class EnvKind { kJrp, kSlqr, kToy };

std::string EnvKindName(EnvKind kind);
EnvKind ParseEnvKind(const std::string& name);

// One exogenous realization: initial state, per-period disturbances and,
// optionally, Gaussian noise for a reparameterized continuous head. Never
// modified after generation.
struct Scenario {
  ad::Tensor initial_state;  // [state_dim]
  ad::Tensor disturbances;   // [T x disturbance_dim]
  ad::Tensor reparam_noise;  // [T x action_dim], or empty

  bool has_reparam_noise() const { return reparam_noise.size() > 0; }
};

struct StepOutput {
  ad::Tensor next_state;  // [n x state_dim]
  ad::Tensor cost;        // [n]
};

// A hybrid MDP with exogenous randomness. Step is batched over n rows and
// smooth in (state, b) for fixed (modes, xi).
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvKind kind() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::size_t num_modes() const = 0;
  virtual std::size_t disturbance_dim() const = 0;
  virtual std::size_t horizon() const = 0;

  // state [n x state_dim], modes [n], b [n x action_dim],
  // xi [n x disturbance_dim].
  virtual StepOutput Step(const ad::Tensor& state, std::span<const int> modes,
                          const ad::Tensor& b, const ad::Tensor& xi) const = 0;

  // The figure of merit for one trajectory's per-period costs. Defaults to
  // the total.
  virtual double ReportedCost(std::span<const double> costs) const;

  virtual std::vector<Scenario> GenerateScenarios(std::size_t count,
                                                  std::uint64_t seed) const = 0;

 protected:
  void CheckStepShapes(const ad::Tensor& state, std::span<const int> modes,
                       const ad::Tensor& b, const ad::Tensor& xi) const;
};

// Seeds for the train / validation / test scenario sets of one instance.
enum class Split { kTrain = 0, kValidation = 1, kTest = 2 };
std::uint64_t SplitSeed(std::uint64_t base_seed, Split split);

// Adds N(0, I) noise of shape [T x action_dim] to every scenario.
void AttachReparamNoise(std::vector<Scenario>& scenarios,
                        std::size_t action_dim, std::uint64_t seed);

// Row-stacking helpers for batched rollouts.
ad::Tensor StackInitialStates(const std::vector<Scenario>& scenarios,
                              std::span<const std::size_t> rows);
ad::Tensor StackDisturbances(const std::vector<Scenario>& scenarios,
                             std::span<const std::size_t> rows, std::size_t t);
ad::Tensor StackReparamNoise(const std::vector<Scenario>& scenarios,
                             std::span<const std::size_t> rows, std::size_t t);

// [n x 1] column holding one value per mode index; used to make per-row
// mode-dependent coefficients.
ad::Tensor ModeColumn(std::span<const int> modes,
                      std::span<const double> per_mode);

}  // namespace hpo::envs

#endif  // HPO_ENVS_ENVIRONMENT_H_
