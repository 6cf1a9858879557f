#include "hpo/envs/slqr.h"

#include <cmath>
#include <stdexcept>

#include "hpo/autodiff/ops.h"
#include "hpo/util/rng.h"

namespace hpo::envs {

using ad::Tensor;

std::vector<std::vector<std::size_t>> ContiguousGroups(std::size_t p,
                                                       std::size_t J) {
  std::vector<std::vector<std::size_t>> groups(J);
  const std::size_t base = p / J;
  const std::size_t extra = p % J;
  std::size_t next = 0;
  for (std::size_t j = 0; j < J; ++j) {
    const std::size_t size = base + (j < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) groups[j].push_back(next++);
  }
  return groups;
}

SlqrParams SlqrBuild(std::size_t p, std::size_t J, std::uint64_t seed) {
  if (p < 1 || J < 1) throw std::invalid_argument("S-LQR needs p, J >= 1");
  SlqrParams params;
  params.p = p;
  params.J = J;
  Rng rng(seed);
  std::vector<double> n(p * p);
  for (double& v : n) v = rng.Normal();
  std::vector<double> sym(p * p);
  double max_abs = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      sym[i * p + j] = 0.5 * (n[i * p + j] + n[j * p + i]);
      max_abs = std::max(max_abs, std::abs(sym[i * p + j]));
    }
  }
  std::vector<double> a(p * p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      a[i * p + j] = (i == j ? 1.10 : 0.0) + 0.05 * sym[i * p + j] / max_abs;
    }
  }
  params.A = Tensor({p, p}, std::move(a));
  params.groups = ContiguousGroups(p, J);
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<double> bj(p * p, 0.0);
    for (std::size_t k = 0; k < p; ++k) bj[k * p + k] = 0.15;
    for (std::size_t k : params.groups[j]) bj[k * p + k] = 1.0;
    params.B.push_back(Tensor({p, p}, std::move(bj)));
  }
  std::vector<double> q(p * p, 0.0);
  std::vector<double> r(p * p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    q[k * p + k] = 1.0;
    r[k * p + k] = 0.1;
  }
  params.Q = Tensor({p, p}, std::move(q));
  params.R = Tensor({p, p}, std::move(r));
  return params;
}

Slqr::Slqr(SlqrParams params) : params_(std::move(params)) {
  const std::size_t p = params_.p;
  if (params_.B.size() != params_.J) {
    throw std::invalid_argument("S-LQR: need one B matrix per mode");
  }
  a_transpose_ = ad::Transpose(params_.A);
  std::vector<double> diag(params_.J * p);
  for (std::size_t j = 0; j < params_.J; ++j) {
    for (std::size_t k = 0; k < p; ++k) {
      for (std::size_t c = 0; c < p; ++c) {
        if (c != k && params_.B[j].at(k, c) != 0.0) {
          throw std::invalid_argument("S-LQR: B matrices must be diagonal");
        }
      }
      diag[j * p + k] = params_.B[j].at(k, k);
    }
  }
  b_diag_ = Tensor({params_.J, p}, std::move(diag));
}

StepOutput Slqr::Step(const Tensor& state, std::span<const int> modes,
                      const Tensor& b, const Tensor& xi) const {
  CheckStepShapes(state, modes, b, xi);
  const std::size_t p = params_.p;
  std::vector<double> gains(modes.size() * p);
  for (std::size_t r = 0; r < modes.size(); ++r) {
    for (std::size_t k = 0; k < p; ++k) {
      gains[r * p + k] = b_diag_.at(static_cast<std::size_t>(modes[r]), k);
    }
  }
  const Tensor next = ad::MatMul(state, a_transpose_) +
                      b * Tensor({modes.size(), p}, std::move(gains)) + xi;
  const Tensor cost = ad::SumCols(ad::MatMul(state, params_.Q) * state) +
                      ad::SumCols(ad::MatMul(b, params_.R) * b);
  return {next, cost};
}

std::vector<Scenario> Slqr::GenerateScenarios(std::size_t count,
                                              std::uint64_t seed) const {
  const std::size_t p = params_.p;
  const double half_width = 10.0 / std::sqrt(static_cast<double>(p));
  std::vector<Scenario> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, i);
    std::vector<double> s0(p);
    for (double& v : s0) v = rng.Uniform(-half_width, half_width);
    std::vector<double> w(params_.T * p, 0.0);
    if (params_.noise_std > 0.0) {
      for (double& v : w) v = params_.noise_std * rng.Normal();
    }
    out.push_back({Tensor::Vector(std::move(s0)),
                   Tensor({params_.T, p}, std::move(w)), Tensor::Zeros({0})});
  }
  return out;
}

}  // namespace hpo::envs
