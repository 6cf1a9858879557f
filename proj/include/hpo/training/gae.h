#ifndef HPO_TRAINING_GAE_H_
#define HPO_TRAINING_GAE_H_

#include <span>
#include <vector>

namespace hpo::training {

struct GaeResult {
  std::vector<double> advantages;  // T x n
  std::vector<double> returns;     // advantages + values
};

// Cost convention: delta_t = c_t + gamma v_{t+1} - v_t and
// A_t = sum_l (gamma lambda)^l delta_{t+l}, truncated at T. costs are T x n
// (t-major), values (T + 1) x n including the bootstrap row. Costs are
// multiplied by cost_scale first.
GaeResult ComputeGae(std::span<const double> costs,
                     std::span<const double> values, std::size_t T,
                     std::size_t n, double gamma, double lambda,
                     double cost_scale = 1.0);

// Zero mean, unit variance (population std, floored at 1e-8).
void Standardize(std::span<double> x);

// Standard deviation of all entries (used to scale costs without
// centering them); 1 if degenerate.
double CostScaleStd(std::span<const double> costs);

}  // namespace hpo::training

#endif  // HPO_TRAINING_GAE_H_
