#ifndef HPO_ORACLES_TOY_ORACLE_H_
#define HPO_ORACLES_TOY_ORACLE_H_

#include <array>
#include <vector>

#include "hpo/envs/toy.h"

namespace hpo::oracles {

// Linear toy policy in the flat layout of a one-layer Mlp {1 -> 2}:
// [W(0), W(1), c(0), c(1)] giving out_j = W(j) s + c(j).
// phi gives the two logits, kappa the two candidates.
struct ToyLinearPolicy {
  std::array<double, 4> phi{};
  std::array<double, 4> kappa{};
};

// J = E[sum_t gamma^t c_t] by exhaustive enumeration of modes and the xi
// grid.
double ToyExpectedCost(const envs::ToyParams& params, double gamma,
                       const ToyLinearPolicy& policy);

// Same, except that mode probabilities are evaluated along the trajectory
// generated by kappa_prob (and its own candidates), while costs follow
// kappa. Its kappa-gradient at kappa = kappa_prob is the pathwise term.
double ToyFrozenProbabilityCost(const envs::ToyParams& params, double gamma,
                                const ToyLinearPolicy& policy,
                                const std::array<double, 4>& kappa_prob);

struct ToyOracleGradient {
  double value = 0.0;
  std::vector<double> phi;
  std::vector<double> kappa;
  std::vector<double> kappa_pathwise;
  std::vector<double> kappa_cross;  // kappa - kappa_pathwise
};

// Central differences (step h) of the enumerated objectives.
ToyOracleGradient ToyOracle(const envs::ToyParams& params, double gamma,
                            const ToyLinearPolicy& policy, double h = 1e-5);

}  // namespace hpo::oracles

#endif  // HPO_ORACLES_TOY_ORACLE_H_
