#ifndef HPO_POLICY_POLICY_H_
#define HPO_POLICY_POLICY_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hpo/autodiff/tape.h"
#include "hpo/autodiff/tensor.h"
#include "hpo/envs/environment.h"
#include "hpo/nn/mlp.h"
#include "hpo/util/rng.h"
#include "json.hpp"

namespace hpo::policy {

struct PolicyConfig {
  envs::EnvKind kind = envs::EnvKind::kSlqr;
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  std::size_t num_modes = 2;
  // JRP only: fixed ordering cost, fed to the networks relative to the
  // demand estimate.
  double fixed_cost = 0.0;
  // Empty means linear networks.
  std::vector<std::size_t> hidden = {64, 64};
  double hidden_gain = 1.4142135623730951;
  double policy_output_gain = 0.01;
  double value_output_gain = 1.0;
  double initial_log_std = 0.0;
  std::uint64_t seed = 0;
};

// Single exponentially weighted estimate of mean demand shared by all
// products and trajectories. The first update initializes it.
class Normalizer {
 public:
  explicit Normalizer(bool enabled = false, double beta = 0.99)
      : enabled_(enabled), beta_(beta) {}

  bool enabled() const { return enabled_; }
  bool initialized() const { return initialized_; }
  double beta() const { return beta_; }
  // 1 when disabled or not yet initialized.
  double value() const { return initialized_ ? ewma_ : 1.0; }

  void Update(double batch_mean);
  // Mean over every entry of the disturbances at rows, all periods.
  static double BatchMean(const std::vector<envs::Scenario>& scenarios,
                          std::span<const std::size_t> rows);
  void Set(double ewma) {
    ewma_ = ewma;
    initialized_ = true;
  }

 private:
  bool enabled_;
  double beta_;
  bool initialized_ = false;
  double ewma_ = 0.0;
};

// Parameter tensors of the three networks (and the Gaussian log-std used by
// the PPO baseline), either constants or leaves bound to a tape.
struct ParamView {
  std::vector<ad::Tensor> phi;
  std::vector<ad::Tensor> kappa;
  std::vector<ad::Tensor> psi;
  ad::Tensor log_std;  // [action_dim]
};

// Gaussian perturbation of the selected candidate: b = mu + offset + sigma
// eps. Used for the stochastic-continuous gradient experiments.
struct ContinuousNoise {
  double sigma = 0.0;
  double offset = 0.0;
};

struct ActResult {
  std::vector<int> modes;   // [n]
  ad::Tensor b;             // [n x p], executed control
  ad::Tensor logp;          // [n], log pi^X(x | s)
  ad::Tensor logits;        // [n x J]
  ad::Tensor candidates;    // [n x (J p)], feasible candidates
  ad::Tensor mean;          // [n x p], selected candidate before noise
};

// Towered hybrid policy: discrete net phi (state -> J logits), continuous
// net kappa (state -> J candidates of size p), value net psi
// (state -> scalar). No parameters are shared.
class HybridPolicy {
 public:
  explicit HybridPolicy(PolicyConfig config);

  const PolicyConfig& config() const { return config_; }
  std::size_t action_dim() const { return config_.action_dim; }
  std::size_t num_modes() const { return config_.num_modes; }
  std::size_t input_dim() const;

  nn::Mlp& discrete() { return discrete_; }
  nn::Mlp& continuous() { return continuous_; }
  nn::Mlp& value() { return value_; }
  const nn::Mlp& discrete() const { return discrete_; }
  const nn::Mlp& continuous() const { return continuous_; }
  const nn::Mlp& value() const { return value_; }
  ad::Tensor& log_std() { return log_std_; }
  const ad::Tensor& log_std() const { return log_std_; }
  Normalizer& normalizer() { return normalizer_; }
  const Normalizer& normalizer() const { return normalizer_; }

  ParamView Constants() const;
  // Binds the selected groups to tape; the rest stay constant.
  ParamView Bind(ad::Tape& tape, bool phi, bool kappa, bool psi,
                 bool log_std = false) const;

  // Network input for raw states [n x state_dim]. JRP: state / ewma plus
  // log(ewma) and log(K / ewma) columns. Otherwise the state itself.
  ad::Tensor Features(const ad::Tensor& state) const;
  // JRP: softplus(raw) * ewma. Otherwise identity.
  ad::Tensor Transform(const ad::Tensor& raw) const;

  ad::Tensor Logits(const ParamView& v, const ad::Tensor& state) const;
  // Raw continuous-network output [n x (J p)], before Transform.
  ad::Tensor RawCandidates(const ParamView& v, const ad::Tensor& state) const;
  ad::Tensor Candidates(const ParamView& v, const ad::Tensor& state) const {
    return Transform(RawCandidates(v, state));
  }
  // [n]
  ad::Tensor Value(const ParamView& v, const ad::Tensor& state) const;

  // Samples x ~ softmax(logits(s)) per row and selects candidate x. With
  // drop_cross the state is detached inside the discrete score only. If
  // eps [n x p] is given, the selected candidate is perturbed per noise.
  ActResult Act(const ParamView& v, const ad::Tensor& state, Rng& rng,
                bool drop_cross = false, const ad::Tensor* eps = nullptr,
                ContinuousNoise noise = {}) const;

  // Same as Act with a prescribed mode per row.
  ActResult ActWithModes(const ParamView& v, const ad::Tensor& state,
                         std::span<const int> modes, bool drop_cross = false,
                         const ad::Tensor* eps = nullptr,
                         ContinuousNoise noise = {}) const;

  nlohmann::json ToJson() const;
  static HybridPolicy FromJson(const nlohmann::json& j);

 private:
  PolicyConfig config_;
  nn::Mlp discrete_;
  nn::Mlp continuous_;
  nn::Mlp value_;
  ad::Tensor log_std_;
  Normalizer normalizer_;
};

// b = candidate + offset + sigma * eps; candidate is [n x p].
ad::Tensor ActReparam(const ad::Tensor& candidate, double sigma,
                      const ad::Tensor& eps, double offset = 0.0);

// log softmax(logits)[x] per row -> [n]. Throws out_of_range for bad x.
ad::Tensor DiscreteLogProb(const ad::Tensor& logits, std::span<const int> modes);
// -sum_x pi log pi per row -> [n].
ad::Tensor DiscreteEntropy(const ad::Tensor& logits);
// Row-wise softmax probabilities (values only).
std::vector<double> Probabilities(const ad::Tensor& logits);

// Diagonal Gaussian log density per row -> [n]; log_std is [p].
ad::Tensor GaussianLogProb(const ad::Tensor& sample, const ad::Tensor& mean,
                           const ad::Tensor& log_std);

// Throws with a dump of the offending state row when logits are not finite.
void CheckFiniteLogits(const ad::Tensor& logits, const ad::Tensor& state);

}  // namespace hpo::policy

#endif  // HPO_POLICY_POLICY_H_
