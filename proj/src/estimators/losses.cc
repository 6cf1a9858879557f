#include "hpo/estimators/losses.h"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hpo/autodiff/ops.h"

namespace hpo::estimators {

using ad::Tensor;

namespace {

Tensor AdvantageColumn(const Trajectories& traj, std::size_t t) {
  return Tensor({traj.n},
                std::vector<double>(traj.advantages.begin() + t * traj.n,
                                    traj.advantages.begin() + (t + 1) * traj.n));
}

void RequireAdvantages(const Trajectories& traj) {
  if (traj.advantages.size() != traj.T * traj.n) {
    throw std::logic_error("loss: advantages missing or of wrong length");
  }
}

}  // namespace

Tensor CostLoss(const Trajectories& traj, double gamma, double cost_scale) {
  Tensor total = Tensor::Scalar(0.0);
  double discount = 1.0;
  for (std::size_t t = 0; t < traj.T; ++t) {
    total = total + ad::Sum(traj.costs[t]) * discount;
    discount *= gamma;
  }
  return total * (cost_scale / static_cast<double>(traj.n));
}

Tensor ScoreLoss(const Trajectories& traj, double gamma) {
  RequireAdvantages(traj);
  Tensor total = Tensor::Scalar(0.0);
  double discount = 1.0;
  for (std::size_t t = 0; t < traj.T; ++t) {
    total = total + ad::Sum(traj.logp_x[t] * AdvantageColumn(traj, t)) * discount;
    discount *= gamma;
  }
  return total * (1.0 / static_cast<double>(traj.n));
}

Tensor MixedLoss(const Trajectories& traj, double gamma, double cost_scale) {
  RequireAdvantages(traj);
  return CostLoss(traj, gamma, cost_scale) + ScoreLoss(traj, gamma);
}

Tensor SfLoss(const policy::HybridPolicy& policy,
              const policy::ParamView& view, const Trajectories& traj,
              double gamma) {
  RequireAdvantages(traj);
  const std::size_t p = policy.action_dim();
  if (traj.continuous == ContinuousMode::kDeterministic ||
      (traj.continuous == ContinuousMode::kReparam && !(traj.noise.sigma > 0))) {
    throw std::invalid_argument(
        "SfLoss: continuous head is deterministic (sigma = 0), no density");
  }
  const Tensor reparam_log_std =
      Tensor::Full({p}, std::log(std::max(traj.noise.sigma, 1e-300)));
  Tensor total = Tensor::Scalar(0.0);
  double discount = 1.0;
  for (std::size_t t = 0; t < traj.T; ++t) {
    const Tensor s = ad::StopGrad(traj.states[t]);
    const Tensor logp_x = policy::DiscreteLogProb(policy.Logits(view, s),
                                                  traj.modes[t]);
    Tensor logp_b;
    if (traj.continuous == ContinuousMode::kReparam) {
      const Tensor mean =
          ad::GatherBlocks(policy.Candidates(view, s), traj.modes[t], p) +
          traj.noise.offset;
      logp_b = policy::GaussianLogProb(ad::StopGrad(traj.b[t]), mean,
                                       reparam_log_std);
    } else {
      const Tensor mean =
          ad::GatherBlocks(policy.RawCandidates(view, s), traj.modes[t], p);
      logp_b = policy::GaussianLogProb(ad::StopGrad(traj.raw_samples[t]), mean,
                                       view.log_std);
    }
    total = total +
            ad::Sum((logp_x + logp_b) * AdvantageColumn(traj, t)) * discount;
    discount *= gamma;
  }
  return total * (1.0 / static_cast<double>(traj.n));
}

std::string EstimatorKindName(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kMixedFull:
      return "mixed_full";
    case EstimatorKind::kMixedNoCross:
      return "mixed_nocross";
    case EstimatorKind::kPathwiseOnly:
      return "pathwise_only";
    case EstimatorKind::kCrossOnly:
      return "cross_only";
    case EstimatorKind::kSf:
      return "sf";
  }
  return "unknown";
}

EstimatorKind ParseEstimatorKind(const std::string& name) {
  for (EstimatorKind k :
       {EstimatorKind::kMixedFull, EstimatorKind::kMixedNoCross,
        EstimatorKind::kPathwiseOnly, EstimatorKind::kCrossOnly,
        EstimatorKind::kSf}) {
    if (EstimatorKindName(k) == name) return k;
  }
  throw std::invalid_argument("unknown estimator kind '" + name + "'");
}

SplitTerms SplitGradTerms(const ad::Tape& tape, const policy::ParamView& view,
                          const Trajectories& traj, double gamma,
                          double cost_scale) {
  if (view.kappa.empty() || !view.kappa.front().tracked()) {
    throw std::logic_error("SplitGradTerms: kappa is not bound to the tape");
  }
  SplitTerms out;
  out.pathwise =
      tape.Backward(CostLoss(traj, gamma, cost_scale)).Flat(view.kappa);
  out.cross = tape.Backward(ScoreLoss(traj, gamma)).Flat(view.kappa);
  out.mixed =
      tape.Backward(MixedLoss(traj, gamma, cost_scale)).Flat(view.kappa);
  return out;
}

void WriteGradEstimates(std::ostream& out,
                        const std::vector<GradEstimate>& estimates) {
  out << "format=hpo-gradients,version=1\n";
  char buf[32];
  for (const GradEstimate& g : estimates) {
    out << g.batch_id << ',' << EstimatorKindName(g.kind) << ',' << g.group
        << ',' << g.batch_size;
    for (double v : g.values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::vector<GradEstimate> ReadGradEstimates(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("format=hpo-gradients,version=1", 0) != 0) {
    throw std::runtime_error("gradient CSV: missing or unsupported header");
  }
  std::vector<GradEstimate> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    GradEstimate g;
    std::getline(ss, field, ',');
    g.batch_id = std::stoll(field);
    std::getline(ss, field, ',');
    g.kind = ParseEstimatorKind(field);
    std::getline(ss, g.group, ',');
    std::getline(ss, field, ',');
    g.batch_size = std::stoul(field);
    while (std::getline(ss, field, ',')) g.values.push_back(std::stod(field));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace hpo::estimators
