#include "hpo/analysis/metrics.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hpo::analysis {

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("metrics: estimate lengths differ (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Norm(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

double Cosine(std::span<const double> a, std::span<const double> b) {
  const double na = Norm(a), nb = Norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return Dot(a, b) / (na * nb);
}

std::vector<std::pair<std::size_t, std::size_t>> SamplePairs(
    std::size_t M, std::size_t R, Rng& rng, bool with_replacement) {
  if (M == 0 || (!with_replacement && M < 2)) {
    throw std::invalid_argument("metrics: not enough batches to pair");
  }
  std::vector<std::pair<std::size_t, std::size_t>> out(R);
  for (auto& [i, j] : out) {
    i = rng.UniformInt(M);
    if (with_replacement) {
      j = rng.UniformInt(M);
    } else {
      j = rng.UniformInt(M - 1);
      if (j >= i) ++j;
    }
  }
  return out;
}

std::vector<EstimatePair> MakePairs(
    const std::vector<std::vector<double>>& batches,
    const std::vector<std::pair<std::size_t, std::size_t>>& index) {
  std::vector<EstimatePair> out;
  out.reserve(index.size());
  for (auto [i, j] : index) out.push_back({batches.at(i), batches.at(j)});
  return out;
}

std::vector<double> InnerProducts(std::span<const EstimatePair> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(Dot(p.g, p.h));
  return out;
}

std::vector<double> HalfSquaredDistances(std::span<const EstimatePair> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.g.size() != p.h.size()) {
      throw std::invalid_argument("metrics: estimate lengths differ");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < p.g.size(); ++i) {
      s += (p.g[i] - p.h[i]) * (p.g[i] - p.h[i]);
    }
    out.push_back(0.5 * s);
  }
  return out;
}

namespace {

double Mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

void RequirePairs(std::span<const EstimatePair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("metrics: no estimate pairs");
}

}  // namespace

SignalResult MetricSignal(std::span<const EstimatePair> pairs) {
  RequirePairs(pairs);
  SignalResult r;
  r.mean_inner = Mean(InnerProducts(pairs));
  r.clamped = r.mean_inner < 0.0;
  r.value = r.clamped ? 0.0 : std::sqrt(r.mean_inner);
  return r;
}

double MetricRmse(std::span<const EstimatePair> pairs) {
  RequirePairs(pairs);
  return std::sqrt(Mean(HalfSquaredDistances(pairs)));
}

AlignResult MetricAlignment(std::span<const EstimatePair> pairs) {
  RequirePairs(pairs);
  AlignResult r;
  double s = 0.0;
  for (const auto& p : pairs) {
    if (Norm(p.g) == 0.0 || Norm(p.h) == 0.0) {
      ++r.skipped;
      continue;
    }
    s += Cosine(p.g, p.h);
    ++r.used;
  }
  if (r.used == 0) {
    throw std::invalid_argument("metrics: alignment of all-zero estimates");
  }
  r.value = s / static_cast<double>(r.used);
  return r;
}

double MetricSnr(double signal, double rmse) {
  if (signal == 0.0) return 0.0;
  if (rmse == 0.0) return std::numeric_limits<double>::infinity();
  return signal / rmse;
}

double MetricCrossAlign(const std::vector<std::vector<double>>& mixed,
                        const std::vector<std::vector<double>>& test,
                        std::size_t R, Rng& rng, bool leave_one_out) {
  const std::size_t M = mixed.size();
  if (M < 2) throw std::invalid_argument("crossalign: need at least 2 batches");
  if (test.size() != M) {
    throw std::invalid_argument("crossalign: mixed and test batch counts differ");
  }
  if (R == 0) throw std::invalid_argument("crossalign: R must be positive");
  const std::size_t d = mixed[0].size();
  std::vector<double> total(d, 0.0);
  for (const auto& g : mixed) {
    if (g.size() != d) throw std::invalid_argument("crossalign: ragged batches");
    for (std::size_t k = 0; k < d; ++k) total[k] += g[k];
  }
  std::vector<double> ref(d);
  double s = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t j = rng.UniformInt(M);
    for (std::size_t k = 0; k < d; ++k) {
      ref[k] = leave_one_out
                   ? (total[k] - mixed[j][k]) / static_cast<double>(M - 1)
                   : total[k] / static_cast<double>(M);
    }
    s += Cosine(ref, test[j]);
  }
  return s / static_cast<double>(R);
}

BatchMetrics ComputeBatchMetrics(
    const std::vector<std::vector<double>>& batches,
    const std::vector<std::vector<double>>& mixed, std::size_t R, Rng& rng,
    bool with_replacement) {
  BatchMetrics m;
  m.R = R;
  const auto index = SamplePairs(batches.size(), R, rng, with_replacement);
  const auto pairs = MakePairs(batches, index);
  const SignalResult sig = MetricSignal(pairs);
  m.signal = sig.value;
  m.signal_clamped = sig.clamped;
  m.signal_sq = sig.mean_inner;
  m.rmse = MetricRmse(pairs);
  m.rmse_sq = m.rmse * m.rmse;
  bool any_nonzero = false;
  for (const auto& b : batches) any_nonzero = any_nonzero || Norm(b) > 0.0;
  m.align = any_nonzero ? MetricAlignment(pairs).value : 0.0;
  m.snr = MetricSnr(m.signal, m.rmse);
  m.crossalign = MetricCrossAlign(mixed, batches, R, rng);
  return m;
}

}  // namespace hpo::analysis
