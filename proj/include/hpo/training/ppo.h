#ifndef HPO_TRAINING_PPO_H_
#define HPO_TRAINING_PPO_H_

#include <vector>

#include "hpo/autodiff/tensor.h"
#include "hpo/estimators/rollout.h"
#include "hpo/nn/optim.h"
#include "hpo/policy/policy.h"
#include "hpo/util/rng.h"

namespace hpo::training {

// Flattened (state, action) samples for the clipped-surrogate epochs.
struct PpoBatch {
  std::size_t size = 0;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> states;       // size x state_dim
  std::vector<int> modes;           // size
  std::vector<double> raw_samples;  // size x action_dim (joint updates only)
  std::vector<double> old_logp;     // behavior log-probability
  std::vector<double> advantages;   // unnormalized
  std::vector<double> returns;
};

struct PpoOptions {
  double clip_coef = 0.15;
  double value_coef = 0.15;
  double entropy_coef = 0.5;
  int epochs = 5;
  int minibatches = 4;
  double kl_stop = 0.015;
  double grad_clip = 5.0;
  // Also update kappa and log_std through a Gaussian continuous head
  // (the PPO baseline). Otherwise only phi and psi move.
  bool joint = false;
  bool normalize_advantages = true;
};

struct PpoOptimizers {
  nn::Adam* phi = nullptr;
  nn::Adam* psi = nullptr;
  nn::Adam* kappa = nullptr;    // joint only
  nn::Adam* log_std = nullptr;  // joint only
};

struct PpoStats {
  int epochs_run = 0;
  int minibatch_updates = 0;
  double approx_kl = 0.0;  // mean over the last executed epoch
  double entropy = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double grad_norm_phi = 0.0;
  double grad_norm_psi = 0.0;
  double grad_norm_kappa = 0.0;
};

struct MinibatchLoss {
  ad::Tensor loss;
  ad::Tensor surrogate;
  ad::Tensor entropy;
  ad::Tensor value_loss;
  ad::Tensor log_ratio;  // [m]
};

// Loss of one minibatch on view. adv is used as given (normalize before).
// raw_samples is read only for joint options.
MinibatchLoss PpoMinibatchLoss(const policy::HybridPolicy& policy,
                               const policy::ParamView& view,
                               const ad::Tensor& states,
                               std::span<const int> modes,
                               const ad::Tensor& raw_samples,
                               std::span<const double> old_logp,
                               std::span<const double> adv,
                               std::span<const double> returns,
                               const PpoOptions& options);

// Cost-convention clipped surrogate:
//   L = mean(max(r A, clip(r, 1 - c, 1 + c) A)) - beta H + c_v mean((V - R)^2)
// over minibatches of a random permutation, for up to `epochs` epochs; stops
// after an epoch whose mean approximate KL exceeds kl_stop.
PpoStats PpoUpdate(policy::HybridPolicy& policy, const PpoBatch& batch,
                   const PpoOptions& options, const PpoOptimizers& optimizers,
                   Rng& rng);

// Visited states, modes and behavior log-probabilities (logp_x) flattened
// t-major, with the given per-sample targets.
PpoBatch FlattenTrajectories(const estimators::Trajectories& traj,
                             std::size_t d, std::size_t p,
                             const std::vector<double>& advantages,
                             const std::vector<double>& returns);

// Writes params back into the network after an optimizer step.
void StoreParams(nn::Mlp& net, const std::vector<ad::Tensor>& params);

}  // namespace hpo::training

#endif  // HPO_TRAINING_PPO_H_
