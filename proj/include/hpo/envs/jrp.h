#ifndef HPO_ENVS_JRP_H_
#define HPO_ENVS_JRP_H_

#include <cstdint>
#include <vector>

#include "hpo/envs/environment.h"

namespace hpo::envs {

struct JrpParams {
  std::size_t p = 1;
  std::vector<double> u;   // underage cost per product
  std::vector<double> h;   // holding cost per product
  std::vector<double> mu;  // mean demand per product
  std::size_t L = 2;       // lead time
  double K = 64.0;         // shared fixed ordering cost
  std::size_t T = 100;
  std::size_t warmup = 20;
  std::size_t cooldown = 20;
};

// Heterogeneous products: u ~ U[6.3, 11.7], h ~ U[0.7, 1.3],
// mu ~ U[6, 14]; K = 64 p.
JrpParams JrpSampleParams(std::size_t p, std::uint64_t seed);
// u = 9, h = 1, mu = 10 for every product; K = 64 p.
JrpParams JrpIdenticalParams(std::size_t p);
void ValidateJrpParams(const JrpParams& params);

// Mode 0 orders nothing (b ignored), mode 1 orders b >= 0.
struct JrpActionSpace {
  std::size_t num_modes = 2;
  // Mode 0 executes exactly zero, i.e. the degenerate hypercube [0, 0]^p.
  double mode0_width = 0.0;
  bool mode1_nonnegative = true;
};

// State row layout: [I (p) | Q slot 1 (p) | ... | Q slot L-1 (p)], where
// slot 1 arrives next period.
class Jrp : public Environment {
 public:
  struct Options {
    // Executed order max(x b, 0) instead of rejecting negative orders;
    // needed when Gaussian noise is added to the candidates.
    bool clamp_orders = false;
  };

  explicit Jrp(JrpParams params) : Jrp(std::move(params), Options{}) {}
  Jrp(JrpParams params, Options options);

  const JrpParams& params() const { return params_; }
  const Options& options() const { return options_; }
  JrpActionSpace ActionSpace() const { return {}; }

  EnvKind kind() const override { return EnvKind::kJrp; }
  std::size_t state_dim() const override { return params_.p * params_.L; }
  std::size_t action_dim() const override { return params_.p; }
  std::size_t num_modes() const override { return 2; }
  std::size_t disturbance_dim() const override { return params_.p; }
  std::size_t horizon() const override { return params_.T; }

  StepOutput Step(const ad::Tensor& state, std::span<const int> modes,
                  const ad::Tensor& b, const ad::Tensor& xi) const override;

  // Mean per-product per-period cost over [warmup, T - cooldown); the whole
  // trajectory if that window is empty.
  double ReportedCost(std::span<const double> costs) const override;

  // Zero initial state, Poisson(mu_k) demands.
  std::vector<Scenario> GenerateScenarios(std::size_t count,
                                          std::uint64_t seed) const override;

  // Step of the original piecewise-smooth problem with a flat order vector;
  // the fixed cost is charged when any order is positive.
  StepOutput FlatStep(const ad::Tensor& state, const ad::Tensor& orders,
                      const ad::Tensor& xi) const;

 private:
  StepOutput Advance(const ad::Tensor& state, const ad::Tensor& executed,
                     const ad::Tensor& xi, std::vector<double> fixed) const;

  JrpParams params_;
  Options options_;
};

// Flat order -> (x, b) with x = 1{sum > 0}, b = order.
std::vector<int> FlatOrdersToModes(const ad::Tensor& orders);

}  // namespace hpo::envs

#endif  // HPO_ENVS_JRP_H_
