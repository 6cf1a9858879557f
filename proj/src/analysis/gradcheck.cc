#include "hpo/analysis/gradcheck.h"

#include <cmath>
#include <stdexcept>

#include "hpo/autodiff/ops.h"
#include "hpo/autodiff/tape.h"
#include "hpo/envs/jrp.h"
#include "hpo/envs/slqr.h"
#include "hpo/estimators/losses.h"
#include "hpo/estimators/rollout.h"

namespace hpo::analysis {

using ad::Tensor;

namespace {

std::vector<Tensor> Unflatten(const std::vector<Tensor>& like,
                              const std::vector<double>& flat) {
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (const Tensor& t : like) {
    out.emplace_back(t.shape(),
                     std::vector<double>(flat.begin() + offset,
                                         flat.begin() + offset + t.size()));
    offset += t.size();
  }
  return out;
}

}  // namespace

policy::PolicyConfig GradCheckPolicyConfig(const envs::Environment& env,
                                           double fixed_cost,
                                           std::uint64_t seed,
                                           std::size_t width) {
  policy::PolicyConfig c;
  c.kind = env.kind();
  c.state_dim = env.state_dim();
  c.action_dim = env.action_dim();
  c.num_modes = env.num_modes();
  c.fixed_cost = fixed_cost;
  c.hidden = {width, width};
  c.policy_output_gain = 1.0;
  c.seed = seed;
  return c;
}

FdCheckResult PathwiseFdCheck(const std::string& name,
                              const envs::Environment& env,
                              const policy::HybridPolicy& policy,
                              const envs::Scenario& scenario,
                              std::uint64_t mode_seed, double h,
                              double tolerance, double kink_tol) {
  const std::vector<envs::Scenario> scen = {scenario};
  const std::vector<std::size_t> rows = {0};
  Rng rng(mode_seed);
  const estimators::Trajectories base = estimators::Rollout(
      policy, policy.Constants(), env, scen, rows, rng);
  estimators::RolloutOptions opts;
  opts.forced_modes = &base.modes;
  const auto total = [&](const policy::ParamView& v) {
    Rng unused(0);
    return estimators::CostLoss(
        estimators::Rollout(policy, v, env, scen, rows, unused, opts), 1.0);
  };
  ad::Tape tape;
  const policy::ParamView view = policy.Bind(tape, false, true, false);
  const std::vector<double> grad =
      tape.Backward(total(view)).Flat(view.kappa);

  std::vector<double> x = policy.continuous().FlatParameters();
  policy::ParamView v = policy.Constants();
  const std::vector<Tensor> like = v.kappa;
  auto f = [&](const std::vector<double>& k) {
    v.kappa = Unflatten(like, k);
    return total(v).item();
  };
  auto diff = [&](std::size_t i, double step) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    return (up - down) / (2.0 * step);
  };
  FdCheckResult r;
  r.name = name;
  r.tolerance = tolerance;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fd = diff(i, h);
    const double fd_half = diff(i, 0.5 * h);
    if (std::abs(fd - fd_half) > kink_tol * (1.0 + std::abs(fd))) {
      ++r.skipped_kinks;
      continue;
    }
    r.max_rel_err =
        std::max(r.max_rel_err, std::abs(grad[i] - fd) / (1.0 + std::abs(fd)));
    ++r.checked;
  }
  // Refuse to pass vacuously.
  r.passed = r.checked > r.skipped_kinks && r.max_rel_err < tolerance;
  return r;
}

std::vector<FdCheckResult> StandardPathwiseChecks(std::uint64_t seed, double h,
                                                  double tolerance) {
  std::vector<FdCheckResult> out;
  for (std::size_t p : {1u, 5u}) {
    envs::JrpParams jp = envs::JrpSampleParams(p, seed);
    jp.T = 20;
    const envs::Jrp env(jp);
    policy::HybridPolicy pol(GradCheckPolicyConfig(env, jp.K, seed + p));
    double mean = 0.0;
    for (double m : jp.mu) mean += m;
    pol.normalizer().Set(mean / static_cast<double>(p));
    const auto scen = env.GenerateScenarios(1, seed + 100 + p);
    out.push_back(PathwiseFdCheck("jrp p=" + std::to_string(p) + " T=20", env,
                                  pol, scen[0], seed + 7, h, tolerance));
  }
  for (std::size_t p : {2u, 8u}) {
    envs::SlqrParams sp = envs::SlqrBuild(p, 2, seed);
    sp.T = 10;
    const envs::Slqr env(sp);
    const policy::HybridPolicy pol(GradCheckPolicyConfig(env, 0.0, seed + p));
    const auto scen = env.GenerateScenarios(1, seed + 200 + p);
    out.push_back(PathwiseFdCheck("slqr p=" + std::to_string(p) + " T=10",
                                  env, pol, scen[0], seed + 7, h, tolerance));
  }
  return out;
}

oracles::ToyLinearPolicy DefaultToyPolicy() {
  oracles::ToyLinearPolicy lin;
  lin.phi = {0.4, -0.3, 0.2, -0.1};
  lin.kappa = {-0.5, -0.3, 0.1, 0.2};
  return lin;
}

policy::HybridPolicy ToyPolicy(const oracles::ToyLinearPolicy& lin) {
  policy::PolicyConfig c;
  c.kind = envs::EnvKind::kToy;
  c.state_dim = 1;
  c.action_dim = 1;
  c.num_modes = 2;
  c.hidden = {};
  policy::HybridPolicy pol(c);
  pol.discrete().SetLayer(0, Tensor::Matrix(2, 1, {lin.phi[0], lin.phi[1]}),
                          Tensor::Vector({lin.phi[2], lin.phi[3]}));
  pol.continuous().SetLayer(
      0, Tensor::Matrix(2, 1, {lin.kappa[0], lin.kappa[1]}),
      Tensor::Vector({lin.kappa[2], lin.kappa[3]}));
  return pol;
}

namespace {

struct Moments {
  std::vector<double> sum, sum_sq;
  std::size_t n = 0;
  void Add(const std::vector<double>& x) {
    if (sum.empty()) {
      sum.assign(x.size(), 0.0);
      sum_sq.assign(x.size(), 0.0);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum[i] += x[i];
      sum_sq[i] += x[i] * x[i];
    }
    ++n;
  }
  std::vector<double> Mean() const {
    std::vector<double> m(sum.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = sum[i] / n;
    return m;
  }
  // Standard error of the mean of the chunk means.
  std::vector<double> Se() const {
    std::vector<double> se(sum.size());
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < se.size(); ++i) {
      const double mean = sum[i] / dn;
      const double var = (sum_sq[i] - dn * mean * mean) / (dn - 1.0);
      se[i] = std::sqrt(std::max(var, 0.0) / dn);
    }
    return se;
  }
};

double MaxZ(const std::vector<double>& mean, const std::vector<double>& se,
            const std::vector<double>& target) {
  double z = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double d = std::abs(mean[i] - target[i]);
    z = std::max(z, se[i] > 0 ? d / se[i] : (d > 1e-12 ? INFINITY : 0.0));
  }
  return z;
}

}  // namespace

ToyMcResult ToyMonteCarloCheck(const envs::ToyParams& params, double gamma,
                               const oracles::ToyLinearPolicy& lin,
                               std::size_t samples, std::size_t chunk,
                               std::uint64_t seed, double z_tolerance) {
  if (chunk == 0 || samples < 2 * chunk) {
    throw std::invalid_argument("toy check: need at least two chunks");
  }
  const envs::ToyEnv env(params);
  const policy::HybridPolicy pol = ToyPolicy(lin);
  Moments phi, kappa, nocross;
  const std::size_t chunks = samples / chunk;
  std::vector<std::size_t> rows(chunk);
  for (std::size_t i = 0; i < chunk; ++i) rows[i] = i;
  for (std::size_t c = 0; c < chunks; ++c) {
    const auto scen = env.GenerateScenarios(chunk, SplitMix64(seed + c));
    Rng rng(seed, 1 + c);
    ad::Tape tape;
    const policy::ParamView v = pol.Bind(tape, true, true, false);
    estimators::Trajectories traj =
        estimators::Rollout(pol, v, env, scen, rows, rng);
    // Reward-to-go advantages (lambda = 1, no baseline).
    traj.advantages.assign(traj.T * traj.n, 0.0);
    for (std::size_t i = 0; i < traj.n; ++i) {
      double acc = 0.0;
      for (std::size_t t = traj.T; t-- > 0;) {
        acc = traj.cost(t, i) + gamma * acc;
        traj.advantages[t * traj.n + i] = acc;
      }
    }
    const Tensor loss = estimators::MixedLoss(traj, gamma);
    const ad::Gradients g = tape.Backward(loss);
    phi.Add(g.Flat(v.phi));
    kappa.Add(g.Flat(v.kappa));
    nocross.Add(
        tape.Backward(estimators::CostLoss(traj, gamma)).Flat(v.kappa));
  }
  ToyMcResult r;
  r.samples = chunks * chunk;
  r.z_tolerance = z_tolerance;
  r.oracle = oracles::ToyOracle(params, gamma, lin);
  r.phi_mean = phi.Mean();
  r.phi_se = phi.Se();
  r.kappa_mean = kappa.Mean();
  r.kappa_se = kappa.Se();
  r.nocross_mean = nocross.Mean();
  r.nocross_se = nocross.Se();
  r.max_z_phi = MaxZ(r.phi_mean, r.phi_se, r.oracle.phi);
  r.max_z_kappa = MaxZ(r.kappa_mean, r.kappa_se, r.oracle.kappa);
  std::vector<double> target(r.oracle.kappa.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = r.oracle.kappa[i] - r.oracle.kappa_cross[i];
  }
  r.max_z_nocross = MaxZ(r.nocross_mean, r.nocross_se, target);
  r.passed = r.max_z_phi <= z_tolerance && r.max_z_kappa <= z_tolerance &&
             r.max_z_nocross <= z_tolerance;
  return r;
}

}  // namespace hpo::analysis
