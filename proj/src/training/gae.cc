#include "hpo/training/gae.h"

#include <cmath>
#include <stdexcept>

namespace hpo::training {

GaeResult ComputeGae(std::span<const double> costs,
                     std::span<const double> values, std::size_t T,
                     std::size_t n, double gamma, double lambda,
                     double cost_scale) {
  if (costs.size() != T * n || values.size() != (T + 1) * n) {
    throw std::invalid_argument("gae: expected " + std::to_string(T * n) +
                                " costs and " + std::to_string((T + 1) * n) +
                                " values");
  }
  GaeResult out;
  out.advantages.assign(T * n, 0.0);
  out.returns.assign(T * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double running = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      const double delta = cost_scale * costs[t * n + i] +
                           gamma * values[(t + 1) * n + i] - values[t * n + i];
      running = delta + gamma * lambda * running;
      out.advantages[t * n + i] = running;
      out.returns[t * n + i] = running + values[t * n + i];
    }
  }
  return out;
}

void Standardize(std::span<double> x) {
  if (x.empty()) return;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd =
      std::max(std::sqrt(var / static_cast<double>(x.size())), 1e-8);
  for (double& v : x) v = (v - mean) / sd;
}

double CostScaleStd(std::span<const double> costs) {
  if (costs.size() < 2) return 1.0;
  double mean = 0.0;
  for (double v : costs) mean += v;
  mean /= static_cast<double>(costs.size());
  double var = 0.0;
  for (double v : costs) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(costs.size()));
  return (sd > 1e-12 && std::isfinite(sd)) ? sd : 1.0;
}

}  // namespace hpo::training
