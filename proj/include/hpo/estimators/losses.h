#ifndef HPO_ESTIMATORS_LOSSES_H_
#define HPO_ESTIMATORS_LOSSES_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hpo/autodiff/tape.h"
#include "hpo/estimators/rollout.h"

namespace hpo::estimators {

// All losses average over the n trajectories of the batch. cost_scale
// multiplies every cost (standardization by the batch std).

// (1/n) sum_i sum_t gamma^t c_t
ad::Tensor CostLoss(const Trajectories& traj, double gamma,
                    double cost_scale = 1.0);
// (1/n) sum_i sum_t gamma^t A_t logp_x_t with A_t a constant.
ad::Tensor ScoreLoss(const Trajectories& traj, double gamma);
// CostLoss + ScoreLoss. Throws if advantages are missing.
ad::Tensor MixedLoss(const Trajectories& traj, double gamma,
                     double cost_scale = 1.0);

// Pure score-function surrogate: (1/n) sum gamma^t A_t (log pi^X(x|s) +
// log pi^B(b|s,x)) with states and samples detached. Requires a stochastic
// continuous head.
ad::Tensor SfLoss(const policy::HybridPolicy& policy,
                  const policy::ParamView& view, const Trajectories& traj,
                  double gamma);

enum class EstimatorKind {
  kMixedFull,
  kMixedNoCross,
  kPathwiseOnly,
  kCrossOnly,
  kSf,
};
std::string EstimatorKindName(EstimatorKind kind);
EstimatorKind ParseEstimatorKind(const std::string& name);

struct GradEstimate {
  EstimatorKind kind = EstimatorKind::kMixedFull;
  std::string group;  // "phi" or "kappa"
  std::size_t batch_size = 0;
  std::int64_t batch_id = 0;
  std::vector<double> values;
};

struct SplitTerms {
  std::vector<double> pathwise;
  std::vector<double> cross;
  std::vector<double> mixed;
};

// Separate backward passes of CostLoss and ScoreLoss over the kappa leaves
// of view, plus the mixed loss itself. traj must come from a rollout on
// tape with drop_cross off.
SplitTerms SplitGradTerms(const ad::Tape& tape, const policy::ParamView& view,
                          const Trajectories& traj, double gamma,
                          double cost_scale = 1.0);

// CSV: header line "format=hpo-gradients,version=1", then one row per
// estimate: batch_id,kind,group,batch_size,g0,g1,...
void WriteGradEstimates(std::ostream& out,
                        const std::vector<GradEstimate>& estimates);
std::vector<GradEstimate> ReadGradEstimates(std::istream& in);

}  // namespace hpo::estimators

#endif  // HPO_ESTIMATORS_LOSSES_H_
