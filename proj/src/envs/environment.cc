#include "hpo/envs/environment.h"

#include <numeric>
#include <stdexcept>

#include "hpo/util/rng.h"

namespace hpo::envs {

using ad::Tensor;

std::string EnvKindName(EnvKind kind) {
  switch (kind) {
    case EnvKind::kJrp:
      return "jrp";
    case EnvKind::kSlqr:
      return "slqr";
    case EnvKind::kToy:
      return "toy";
  }
  return "unknown";
}

EnvKind ParseEnvKind(const std::string& name) {
  if (name == "jrp") return EnvKind::kJrp;
  if (name == "slqr") return EnvKind::kSlqr;
  if (name == "toy") return EnvKind::kToy;
  throw std::invalid_argument("unknown env kind '" + name +
                              "' (expected jrp, slqr or toy)");
}

double Environment::ReportedCost(std::span<const double> costs) const {
  return std::accumulate(costs.begin(), costs.end(), 0.0);
}

void Environment::CheckStepShapes(const Tensor& state,
                                  std::span<const int> modes, const Tensor& b,
                                  const Tensor& xi) const {
  const std::size_t n = modes.size();
  const auto expect = [n](const Tensor& t, std::size_t cols, const char* what) {
    if (t.rank() != 2 || t.dim(0) != n || t.dim(1) != cols) {
      throw ad::ShapeError(std::string("Step: ") + what + " has shape " +
                           ad::ShapeToString(t.shape()) + ", expected " +
                           ad::ShapeToString({n, cols}));
    }
  };
  expect(state, state_dim(), "state");
  expect(b, action_dim(), "b");
  expect(xi, disturbance_dim(), "xi");
  for (int x : modes) {
    if (x < 0 || static_cast<std::size_t>(x) >= num_modes()) {
      throw std::out_of_range("Step: mode " + std::to_string(x) +
                              " outside [0, " + std::to_string(num_modes()) +
                              ")");
    }
  }
}

std::uint64_t SplitSeed(std::uint64_t base_seed, Split split) {
  return SplitMix64(base_seed * 4 + static_cast<std::uint64_t>(split) + 1);
}

void AttachReparamNoise(std::vector<Scenario>& scenarios,
                        std::size_t action_dim, std::uint64_t seed) {
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    Rng rng(seed, i);
    const std::size_t T = scenarios[i].disturbances.dim(0);
    std::vector<double> eps(T * action_dim);
    for (double& e : eps) e = rng.Normal();
    scenarios[i].reparam_noise = Tensor({T, action_dim}, std::move(eps));
  }
}

namespace {

Tensor StackRows(std::span<const std::size_t> rows, std::size_t width,
                 const auto& row_data) {
  std::vector<double> out;
  out.reserve(rows.size() * width);
  for (std::size_t r : rows) {
    std::span<const double> src = row_data(r);
    if (src.size() != width) {
      throw ad::ShapeError("scenario row width " + std::to_string(src.size()) +
                           " != " + std::to_string(width));
    }
    out.insert(out.end(), src.begin(), src.end());
  }
  return Tensor({rows.size(), width}, std::move(out));
}

}  // namespace

Tensor StackInitialStates(const std::vector<Scenario>& scenarios,
                          std::span<const std::size_t> rows) {
  const std::size_t width = scenarios.at(rows[0]).initial_state.size();
  return StackRows(rows, width, [&](std::size_t r) {
    return scenarios[r].initial_state.data();
  });
}

Tensor StackDisturbances(const std::vector<Scenario>& scenarios,
                         std::span<const std::size_t> rows, std::size_t t) {
  const std::size_t width = scenarios.at(rows[0]).disturbances.dim(1);
  return StackRows(rows, width, [&](std::size_t r) {
    return scenarios[r].disturbances.data().subspan(t * width, width);
  });
}

Tensor StackReparamNoise(const std::vector<Scenario>& scenarios,
                         std::span<const std::size_t> rows, std::size_t t) {
  const Scenario& first = scenarios.at(rows[0]);
  if (!first.has_reparam_noise()) {
    throw std::logic_error("scenario set carries no reparameterization noise");
  }
  const std::size_t width = first.reparam_noise.dim(1);
  return StackRows(rows, width, [&](std::size_t r) {
    return scenarios[r].reparam_noise.data().subspan(t * width, width);
  });
}

Tensor ModeColumn(std::span<const int> modes,
                  std::span<const double> per_mode) {
  std::vector<double> col(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i) col[i] = per_mode[modes[i]];
  return Tensor({modes.size(), 1}, std::move(col));
}

}  // namespace hpo::envs
