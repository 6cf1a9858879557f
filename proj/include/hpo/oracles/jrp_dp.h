#ifndef HPO_ORACLES_JRP_DP_H_
#define HPO_ORACLES_JRP_DP_H_

#include <cstddef>

#include "hpo/envs/jrp.h"

namespace hpo::oracles {

struct JrpDpResult {
  double average_cost = 0.0;  // optimal long-run cost per period
  int reorder_point = 0;      // order when position <= s
  int order_up_to = 0;        // S
  int iterations = 0;
};

// Single-product JRP with Poisson demand and backlog solved by relative
// value iteration on the inventory position (on hand plus pipeline). An
// order placed in period t is on hand from period t + L, so the period's
// expected holding / underage cost is a function of the position and a
// Poisson((L + 1) mu) demand. Integer positions suffice for integer demand.
JrpDpResult JrpSingleProductOptimum(double u, double h, double mu, double K,
                                    std::size_t L = 2, double tol = 1e-9);

// Convenience for p = 1 parameter sets; throws if p != 1.
JrpDpResult JrpSingleProductOptimum(const envs::JrpParams& params);

}  // namespace hpo::oracles

#endif  // HPO_ORACLES_JRP_DP_H_
