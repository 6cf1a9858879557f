#include "hpo/oracles/toy_oracle.h"

#include <cmath>

namespace hpo::oracles {

namespace {

double Out(const std::array<double, 4>& w, int j, double s) {
  return w[j] * s + w[2 + j];
}

double ProbMode1(const std::array<double, 4>& phi, double s) {
  const double l0 = Out(phi, 0, s);
  const double l1 = Out(phi, 1, s);
  return 1.0 / (1.0 + std::exp(l0 - l1));
}

// Expected discounted cost from period t with cost state s and probability
// state s_prob.
double Recurse(const envs::ToyParams& p, double gamma,
               const ToyLinearPolicy& policy,
               const std::array<double, 4>& kappa_prob, std::size_t t,
               double s, double s_prob) {
  if (t == p.T) return 0.0;
  const double p1 = ProbMode1(policy.phi, s_prob);
  double total = 0.0;
  for (int x = 0; x < 2; ++x) {
    const double prob = x == 1 ? p1 : 1.0 - p1;
    const double b = Out(policy.kappa, x, s);
    const double b_prob = Out(kappa_prob, x, s_prob);
    double future = 0.0;
    for (std::size_t k = 0; k < p.xi_values.size(); ++k) {
      const double xi = p.xi_values[k];
      future += p.xi_probs[k] *
                Recurse(p, gamma, policy, kappa_prob, t + 1,
                        p.a[x] * s + p.g[x] * b + xi,
                        p.a[x] * s_prob + p.g[x] * b_prob + xi);
    }
    const double cost = s * s + p.r * b * b + p.k[x];
    total += prob * (cost + gamma * future);
  }
  return total;
}

}  // namespace

double ToyExpectedCost(const envs::ToyParams& params, double gamma,
                       const ToyLinearPolicy& policy) {
  return Recurse(params, gamma, policy, policy.kappa, 0, params.s0, params.s0);
}

double ToyFrozenProbabilityCost(const envs::ToyParams& params, double gamma,
                                const ToyLinearPolicy& policy,
                                const std::array<double, 4>& kappa_prob) {
  return Recurse(params, gamma, policy, kappa_prob, 0, params.s0, params.s0);
}

ToyOracleGradient ToyOracle(const envs::ToyParams& params, double gamma,
                            const ToyLinearPolicy& policy, double h) {
  ToyOracleGradient out;
  out.value = ToyExpectedCost(params, gamma, policy);
  for (int i = 0; i < 4; ++i) {
    ToyLinearPolicy up = policy;
    ToyLinearPolicy down = policy;
    up.phi[i] += h;
    down.phi[i] -= h;
    out.phi.push_back((ToyExpectedCost(params, gamma, up) -
                       ToyExpectedCost(params, gamma, down)) /
                      (2 * h));
  }
  for (int i = 0; i < 4; ++i) {
    ToyLinearPolicy up = policy;
    ToyLinearPolicy down = policy;
    up.kappa[i] += h;
    down.kappa[i] -= h;
    out.kappa.push_back((ToyExpectedCost(params, gamma, up) -
                         ToyExpectedCost(params, gamma, down)) /
                        (2 * h));
    out.kappa_pathwise.push_back(
        (ToyFrozenProbabilityCost(params, gamma, up, policy.kappa) -
         ToyFrozenProbabilityCost(params, gamma, down, policy.kappa)) /
        (2 * h));
    out.kappa_cross.push_back(out.kappa.back() - out.kappa_pathwise.back());
  }
  return out;
}

}  // namespace hpo::oracles
