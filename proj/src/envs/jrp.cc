#include "hpo/envs/jrp.h"

#include <stdexcept>

#include "hpo/autodiff/ops.h"
#include "hpo/util/rng.h"

namespace hpo::envs {

using ad::Tensor;

JrpParams JrpSampleParams(std::size_t p, std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("JRP needs p >= 1");
  JrpParams params;
  params.p = p;
  params.K = 64.0 * static_cast<double>(p);
  Rng rng(seed);
  for (std::size_t k = 0; k < p; ++k) {
    params.u.push_back(rng.Uniform(6.3, 11.7));
    params.h.push_back(rng.Uniform(0.7, 1.3));
    params.mu.push_back(rng.Uniform(6.0, 14.0));
  }
  return params;
}

JrpParams JrpIdenticalParams(std::size_t p) {
  if (p < 1) throw std::invalid_argument("JRP needs p >= 1");
  JrpParams params;
  params.p = p;
  params.K = 64.0 * static_cast<double>(p);
  params.u.assign(p, 9.0);
  params.h.assign(p, 1.0);
  params.mu.assign(p, 10.0);
  return params;
}

void ValidateJrpParams(const JrpParams& params) {
  if (params.u.size() != params.p || params.h.size() != params.p ||
      params.mu.size() != params.p) {
    throw std::invalid_argument("JRP: u, h, mu must have p entries");
  }
  for (std::size_t k = 0; k < params.p; ++k) {
    if (!(params.u[k] > params.h[k] && params.h[k] > 0.0)) {
      throw std::invalid_argument("JRP: need u > h > 0 for product " +
                                  std::to_string(k));
    }
    if (params.mu[k] < 0.0) {
      throw std::invalid_argument("JRP: negative mean demand");
    }
  }
  if (params.L < 2) throw std::invalid_argument("JRP: lead time L must be >= 2");
  if (params.K < 0.0) throw std::invalid_argument("JRP: K must be >= 0");
}

Jrp::Jrp(JrpParams params, Options options)
    : params_(std::move(params)), options_(options) {
  ValidateJrpParams(params_);
}

StepOutput Jrp::Step(const Tensor& state, std::span<const int> modes,
                     const Tensor& b, const Tensor& xi) const {
  CheckStepShapes(state, modes, b, xi);
  const std::size_t p = params_.p;
  if (!options_.clamp_orders) {
    for (std::size_t r = 0; r < modes.size(); ++r) {
      if (modes[r] == 0) continue;
      for (std::size_t k = 0; k < p; ++k) {
        if (b.at(r, k) < 0.0) {
          throw std::domain_error("JRP: negative order quantity " +
                                  std::to_string(b.at(r, k)) + " in row " +
                                  std::to_string(r));
        }
      }
    }
  }
  const double ordering[] = {0.0, 1.0};
  Tensor executed = b * ModeColumn(modes, ordering);
  if (options_.clamp_orders) executed = ad::Max0(executed);
  std::vector<double> fixed(modes.size());
  for (std::size_t r = 0; r < modes.size(); ++r) {
    fixed[r] = modes[r] == 1 ? params_.K : 0.0;
  }
  return Advance(state, executed, xi, std::move(fixed));
}

StepOutput Jrp::FlatStep(const Tensor& state, const Tensor& orders,
                         const Tensor& xi) const {
  const std::vector<int> modes = FlatOrdersToModes(orders);
  CheckStepShapes(state, modes, orders, xi);
  for (double v : orders.data()) {
    if (v < 0.0) throw std::domain_error("JRP: negative order quantity");
  }
  std::vector<double> fixed(modes.size());
  for (std::size_t r = 0; r < modes.size(); ++r) {
    fixed[r] = modes[r] == 1 ? params_.K : 0.0;
  }
  return Advance(state, orders, xi, std::move(fixed));
}

StepOutput Jrp::Advance(const Tensor& state, const Tensor& executed,
                        const Tensor& xi, std::vector<double> fixed) const {
  const std::size_t p = params_.p;
  const std::size_t n = fixed.size();
  const Tensor inventory = ad::SliceCols(state, 0, p);
  const Tensor arriving = ad::SliceCols(state, p, 2 * p);
  const Tensor shortfall = ad::Max0(xi - inventory);
  const Tensor excess = ad::Max0(inventory - xi);
  const Tensor cost =
      ad::SumCols(shortfall * Tensor::Vector(params_.u) +
                  excess * Tensor::Vector(params_.h)) +
      Tensor({n}, std::move(fixed));

  std::vector<Tensor> parts;
  parts.push_back(inventory - xi + arriving);
  for (std::size_t slot = 2; slot < params_.L; ++slot) {
    parts.push_back(ad::SliceCols(state, slot * p, (slot + 1) * p));
  }
  parts.push_back(executed);
  return {ad::ConcatCols(parts), cost};
}

double Jrp::ReportedCost(std::span<const double> costs) const {
  std::size_t begin = params_.warmup;
  std::size_t end =
      costs.size() > params_.cooldown ? costs.size() - params_.cooldown : 0;
  if (begin >= end) {
    begin = 0;
    end = costs.size();
  }
  double total = 0.0;
  for (std::size_t t = begin; t < end; ++t) total += costs[t];
  return total / (static_cast<double>(end - begin) *
                  static_cast<double>(params_.p));
}

std::vector<Scenario> Jrp::GenerateScenarios(std::size_t count,
                                             std::uint64_t seed) const {
  const std::size_t p = params_.p;
  std::vector<Scenario> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, i);
    std::vector<double> demand(params_.T * p);
    for (std::size_t t = 0; t < params_.T; ++t) {
      for (std::size_t k = 0; k < p; ++k) {
        demand[t * p + k] = rng.Poisson(params_.mu[k]);
      }
    }
    out.push_back({Tensor::Zeros({state_dim()}),
                   Tensor({params_.T, p}, std::move(demand)), Tensor::Zeros({0})});
  }
  return out;
}

std::vector<int> FlatOrdersToModes(const Tensor& orders) {
  std::vector<int> modes(orders.dim(0));
  const std::size_t p = orders.dim(1);
  for (std::size_t r = 0; r < modes.size(); ++r) {
    double total = 0.0;
    for (std::size_t k = 0; k < p; ++k) total += orders.at(r, k);
    modes[r] = total > 0.0 ? 1 : 0;
  }
  return modes;
}

}  // namespace hpo::envs
