#include "hpo/training/ppo.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hpo/autodiff/ops.h"
#include "hpo/autodiff/tape.h"
#include "hpo/training/gae.h"

namespace hpo::training {

using ad::Tensor;

void StoreParams(nn::Mlp& net, const std::vector<Tensor>& params) {
  auto& dst = net.mutable_params();
  if (dst.size() != params.size()) {
    throw std::invalid_argument("StoreParams: layout mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    dst[i] = Tensor(params[i].shape(), params[i].ToVector());
  }
}

namespace {

std::vector<Tensor> Detach(const std::vector<Tensor>& ps) {
  std::vector<Tensor> out;
  out.reserve(ps.size());
  for (const Tensor& p : ps) out.emplace_back(p.shape(), p.ToVector());
  return out;
}

// Clips, steps and writes the group back. Returns the pre-clip norm.
double StepNet(nn::Adam& adam, nn::Mlp& net, const std::vector<Tensor>& view,
               std::vector<double> grad, double clip) {
  const double norm = nn::ClipGlobalNorm(grad, clip);
  std::vector<Tensor> params = Detach(view);
  adam.Step(params, grad);
  StoreParams(net, params);
  return norm;
}

}  // namespace

// Visited states, modes and targets flattened t-major.
PpoBatch FlattenTrajectories(const estimators::Trajectories& traj, std::size_t d, std::size_t p,
                 const std::vector<double>& advantages,
                 const std::vector<double>& returns) {
  PpoBatch b;
  b.size = traj.T * traj.n;
  b.state_dim = d;
  b.action_dim = p;
  b.states.reserve(b.size * d);
  for (std::size_t t = 0; t < traj.T; ++t) {
    auto s = traj.states[t].data();
    b.states.insert(b.states.end(), s.begin(), s.end());
    b.modes.insert(b.modes.end(), traj.modes[t].begin(), traj.modes[t].end());
    auto lp = traj.logp_x[t].data();
    b.old_logp.insert(b.old_logp.end(), lp.begin(), lp.end());
  }
  b.advantages = advantages;
  b.returns = returns;
  return b;
}

MinibatchLoss PpoMinibatchLoss(const policy::HybridPolicy& policy,
                               const policy::ParamView& v, const Tensor& S,
                               std::span<const int> modes,
                               const Tensor& raw_samples,
                               std::span<const double> old_logp,
                               std::span<const double> adv,
                               std::span<const double> returns,
                               const PpoOptions& options) {
  const std::size_t p = policy.action_dim();
  const Tensor logits = policy.Logits(v, S);
  policy::CheckFiniteLogits(logits, S);
  Tensor logp = policy::DiscreteLogProb(logits, modes);
  if (options.joint) {
    const Tensor mean = ad::GatherBlocks(policy.RawCandidates(v, S), modes, p);
    logp = logp + policy::GaussianLogProb(raw_samples, mean, v.log_std);
  }
  MinibatchLoss out;
  out.log_ratio =
      logp - Tensor::Vector({old_logp.begin(), old_logp.end()});
  const Tensor ratio = ad::Exp(out.log_ratio);
  for (double r : ratio.data()) {
    if (!std::isfinite(r)) {
      throw nn::NonFiniteGradientError("ppo: non-finite probability ratio");
    }
  }
  const Tensor A = Tensor::Vector({adv.begin(), adv.end()});
  out.surrogate = ad::Mean(ad::Maximum(
      ratio * A,
      ad::Clamp(ratio, 1.0 - options.clip_coef, 1.0 + options.clip_coef) * A));
  out.entropy = ad::Mean(policy::DiscreteEntropy(logits));
  out.value_loss = ad::Mean(ad::Square(
      policy.Value(v, S) - Tensor::Vector({returns.begin(), returns.end()})));
  out.loss = out.surrogate - options.entropy_coef * out.entropy +
             options.value_coef * out.value_loss;
  return out;
}

PpoStats PpoUpdate(policy::HybridPolicy& policy, const PpoBatch& batch,
                   const PpoOptions& options, const PpoOptimizers& optimizers,
                   Rng& rng) {
  const std::size_t N = batch.size;
  const std::size_t d = batch.state_dim;
  const std::size_t p = batch.action_dim;
  if (optimizers.phi == nullptr || optimizers.psi == nullptr ||
      (options.joint &&
       (optimizers.kappa == nullptr || optimizers.log_std == nullptr))) {
    throw std::invalid_argument("ppo: missing optimizer");
  }
  if (batch.states.size() != N * d || batch.modes.size() != N ||
      batch.old_logp.size() != N || batch.advantages.size() != N ||
      batch.returns.size() != N ||
      (options.joint && batch.raw_samples.size() != N * p)) {
    throw std::invalid_argument("ppo: inconsistent batch");
  }
  if (options.epochs < 1 || options.minibatches < 1 ||
      static_cast<std::size_t>(options.minibatches) > N) {
    throw std::invalid_argument("ppo: bad epoch / minibatch configuration");
  }
  PpoStats stats;
  const std::size_t mb = static_cast<std::size_t>(options.minibatches);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const std::vector<int> perm = rng.Permutation(static_cast<int>(N));
    double kl_sum = 0.0;
    double ent_sum = 0.0;
    double pg_sum = 0.0;
    double v_sum = 0.0;
    for (std::size_t k = 0; k < mb; ++k) {
      const std::size_t lo = k * N / mb;
      const std::size_t hi = (k + 1) * N / mb;
      const std::size_t m = hi - lo;
      std::vector<double> s(m * d), z(options.joint ? m * p : 0), old(m),
          adv(m), ret(m);
      std::vector<int> modes(m);
      for (std::size_t r = 0; r < m; ++r) {
        const std::size_t j = static_cast<std::size_t>(perm[lo + r]);
        std::copy_n(batch.states.begin() + j * d, d, s.begin() + r * d);
        if (options.joint) {
          std::copy_n(batch.raw_samples.begin() + j * p, p, z.begin() + r * p);
        }
        modes[r] = batch.modes[j];
        old[r] = batch.old_logp[j];
        adv[r] = batch.advantages[j];
        ret[r] = batch.returns[j];
      }
      if (options.normalize_advantages) Standardize(adv);

      ad::Tape tape;
      const policy::ParamView v =
          policy.Bind(tape, true, options.joint, true, options.joint);
      const Tensor Z = options.joint ? Tensor::Matrix(m, p, std::move(z))
                                     : Tensor::Zeros({0});
      const MinibatchLoss L =
          PpoMinibatchLoss(policy, v, Tensor::Matrix(m, d, std::move(s)),
                           modes, Z, old, adv, ret, options);
      const Tensor& log_ratio = L.log_ratio;
      const Tensor& loss = L.loss;
      const Tensor& surr = L.surrogate;
      const Tensor& entropy = L.entropy;
      const Tensor& vloss = L.value_loss;

      double kl = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        const double lr = log_ratio.at(r);
        kl += std::exp(lr) - 1.0 - lr;
      }
      kl_sum += kl / static_cast<double>(m);
      ent_sum += entropy.item();
      pg_sum += surr.item();
      v_sum += vloss.item();

      const ad::Gradients g = tape.Backward(loss);
      stats.grad_norm_phi = StepNet(*optimizers.phi, policy.discrete(), v.phi,
                                    g.Flat(v.phi), options.grad_clip);
      stats.grad_norm_psi = StepNet(*optimizers.psi, policy.value(), v.psi,
                                    g.Flat(v.psi), options.grad_clip);
      if (options.joint) {
        stats.grad_norm_kappa =
            StepNet(*optimizers.kappa, policy.continuous(), v.kappa,
                    g.Flat(v.kappa), options.grad_clip);
        std::vector<double> gls = g.Of(v.log_std);
        nn::ClipGlobalNorm(gls, options.grad_clip);
        std::vector<Tensor> ls = {
            Tensor(v.log_std.shape(), v.log_std.ToVector())};
        optimizers.log_std->Step(ls, gls);
        policy.log_std() = ls[0];
      }
      ++stats.minibatch_updates;
    }
    ++stats.epochs_run;
    stats.approx_kl = kl_sum / static_cast<double>(mb);
    stats.entropy = ent_sum / static_cast<double>(mb);
    stats.policy_loss = pg_sum / static_cast<double>(mb);
    stats.value_loss = v_sum / static_cast<double>(mb);
    if (stats.approx_kl > options.kl_stop) break;
  }
  return stats;
}

}  // namespace hpo::training
