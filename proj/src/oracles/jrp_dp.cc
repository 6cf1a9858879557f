#include "hpo/oracles/jrp_dp.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hpo::oracles {

namespace {

std::vector<double> PoissonPmf(double mean, int n) {
  std::vector<double> pmf(n);
  for (int k = 0; k < n; ++k) {
    pmf[k] = mean == 0.0 ? (k == 0 ? 1.0 : 0.0)
                         : std::exp(k * std::log(mean) - mean -
                                    std::lgamma(k + 1.0));
  }
  return pmf;
}

}  // namespace

JrpDpResult JrpSingleProductOptimum(double u, double h, double mu, double K,
                                    std::size_t L, double tol) {
  if (!(u > 0 && h > 0 && mu >= 0 && K >= 0) || L < 1) {
    throw std::invalid_argument("jrp dp: bad parameters");
  }
  const double lead_mean = static_cast<double>(L + 1) * mu;
  const int dmax = static_cast<int>(lead_mean + 12.0 * std::sqrt(lead_mean + 1) + 20);
  const int one_max = static_cast<int>(mu + 12.0 * std::sqrt(mu + 1) + 20);
  const int lo = -dmax;
  const int hi = 2 * dmax + static_cast<int>(std::sqrt(2.0 * K * mu / h)) + 20;
  const int n = hi - lo + 1;
  const std::vector<double> lead_pmf = PoissonPmf(lead_mean, dmax + 1);
  const std::vector<double> one_pmf = PoissonPmf(mu, one_max + 1);

  std::vector<double> G(n);
  for (int i = 0; i < n; ++i) {
    const double y = lo + i;
    double g = 0.0;
    for (int d = 0; d <= dmax; ++d) {
      g += lead_pmf[d] * (u * std::max(d - y, 0.0) + h * std::max(y - d, 0.0));
    }
    G[i] = g;
  }
  std::vector<double> V(n, 0.0), W(n), suffix(n), next(n);
  const int anchor = -lo;  // position 0
  JrpDpResult res;
  for (int it = 1; it <= 100000; ++it) {
    for (int i = 0; i < n; ++i) {
      double ev = 0.0;
      for (int d = 0; d <= one_max; ++d) ev += one_pmf[d] * V[std::max(i - d, 0)];
      W[i] = G[i] + ev;
    }
    suffix[n - 1] = W[n - 1];
    for (int i = n - 2; i >= 0; --i) suffix[i] = std::min(W[i], suffix[i + 1]);
    for (int i = 0; i < n; ++i) next[i] = std::min(W[i], K + suffix[i]);
    const double ref = next[anchor];
    const double gain = ref - V[anchor];
    double diff = 0.0;
    for (int i = 0; i < n; ++i) {
      next[i] -= ref;
      diff = std::max(diff, std::abs(next[i] - V[i]));
    }
    V.swap(next);
    res.average_cost = gain;
    res.iterations = it;
    if (diff < tol) break;
  }
  // S = argmin W; s = largest position where ordering is strictly better.
  int best = 0;
  for (int i = 1; i < n; ++i) if (W[i] < W[best]) best = i;
  res.order_up_to = lo + best;
  res.reorder_point = lo;
  for (int i = 0; i < best; ++i) {
    if (K + W[best] < W[i]) res.reorder_point = lo + i;
  }
  return res;
}

JrpDpResult JrpSingleProductOptimum(const envs::JrpParams& params) {
  if (params.p != 1) throw std::invalid_argument("jrp dp: needs p = 1");
  return JrpSingleProductOptimum(params.u[0], params.h[0], params.mu[0],
                                 params.K, params.L);
}

}  // namespace hpo::oracles
