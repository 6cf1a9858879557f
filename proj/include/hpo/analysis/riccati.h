#ifndef HPO_ANALYSIS_RICCATI_H_
#define HPO_ANALYSIS_RICCATI_H_

#include <cstddef>
#include <vector>

#include "hpo/autodiff/tensor.h"
#include "hpo/envs/environment.h"
#include "hpo/envs/slqr.h"

namespace hpo::analysis {

struct RiccatiSolution {
  std::vector<ad::Tensor> K;  // steps entries, [p x p]
  std::vector<ad::Tensor> P;  // steps + 1 entries; P[steps] = Q
};

// Backward recursion over `steps` periods with terminal P = Q:
//   K_t = (R + B'P_{t+1}B)^{-1} B'P_{t+1}A,  P_t = Q + A'P_{t+1}(A - B K_t).
// Throws std::domain_error if the inner matrix is singular.
RiccatiSolution RiccatiSolve(const ad::Tensor& A, const ad::Tensor& B,
                             const ad::Tensor& Q, const ad::Tensor& R,
                             std::size_t steps);

// Optimal controller of the S-LQR environment restricted to mode j. The
// environment charges stage costs for t < T only, so the last control is 0
// and the recursion runs over T - 1 steps: P[0] is the optimal cost-to-go.
RiccatiSolution SlqrRiccati(const envs::SlqrParams& params, std::size_t mode);

// s0' P0 s0
double QuadraticCost(const ad::Tensor& P, std::span<const double> s0);

// Mean over scenarios of s0' P0 s0 for mode j.
double RiccatiExpectedCost(const envs::SlqrParams& params, std::size_t mode,
                           const std::vector<envs::Scenario>& scenarios);

// Simulated mean reported cost of the mode-j Riccati controller
// b_t = -K_t s_t (0 in the final period) on the environment.
double SimulateRiccati(const envs::Slqr& env, std::size_t mode,
                       const std::vector<envs::Scenario>& scenarios);

struct SingleModeBaseline {
  std::size_t mode = 0;
  double cost = 0.0;
  std::vector<double> per_mode;
};

// Lowest simulated cost over modes; ties go to the lowest index.
SingleModeBaseline BestSingleModeBaseline(
    const envs::Slqr& env, const std::vector<envs::Scenario>& scenarios);

}  // namespace hpo::analysis

#endif  // HPO_ANALYSIS_RICCATI_H_
