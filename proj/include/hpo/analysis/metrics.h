#ifndef HPO_ANALYSIS_METRICS_H_
#define HPO_ANALYSIS_METRICS_H_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hpo/util/rng.h"

namespace hpo::analysis {

// Two independent batch estimates of the same gradient.
struct EstimatePair {
  std::span<const double> g;
  std::span<const double> h;
};

// R index pairs over M batches. With replacement, i and j are independent
// uniform draws (i == j possible); otherwise i != j.
std::vector<std::pair<std::size_t, std::size_t>> SamplePairs(
    std::size_t M, std::size_t R, Rng& rng, bool with_replacement = true);

std::vector<EstimatePair> MakePairs(
    const std::vector<std::vector<double>>& batches,
    const std::vector<std::pair<std::size_t, std::size_t>>& index);

// Per-pair statistics, for standard errors.
std::vector<double> InnerProducts(std::span<const EstimatePair> pairs);
std::vector<double> HalfSquaredDistances(std::span<const EstimatePair> pairs);

struct SignalResult {
  double value = 0.0;       // sqrt(max(mean <g, h>, 0))
  double mean_inner = 0.0;  // raw mean, may be negative
  bool clamped = false;
};
SignalResult MetricSignal(std::span<const EstimatePair> pairs);

// sqrt(mean 1/2 |g - h|^2)
double MetricRmse(std::span<const EstimatePair> pairs);

struct AlignResult {
  double value = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // pairs with a zero-norm estimate
};
AlignResult MetricAlignment(std::span<const EstimatePair> pairs);

// signal / rmse; 0 for zero signal, +inf when only rmse is zero.
double MetricSnr(double signal, double rmse);

// Mean over R draws of j ~ U{0..M-1} of cos(G_{-j}, test[j]) where G_{-j}
// is the mean of the other mixed batches. leave_one_out=false includes
// batch j in the reference (only for sensitivity checks).
double MetricCrossAlign(const std::vector<std::vector<double>>& mixed,
                        const std::vector<std::vector<double>>& test,
                        std::size_t R, Rng& rng, bool leave_one_out = true);

double Cosine(std::span<const double> a, std::span<const double> b);
double Dot(std::span<const double> a, std::span<const double> b);
double Norm(std::span<const double> a);

// Summary of M batch estimates of one estimator.
struct BatchMetrics {
  double signal = 0.0;
  bool signal_clamped = false;
  double signal_sq = 0.0;  // mean <g, h>
  double rmse = 0.0;
  double rmse_sq = 0.0;
  double align = 0.0;
  double snr = 0.0;
  double crossalign = 0.0;  // vs the mixed batches
  std::size_t R = 0;
};

BatchMetrics ComputeBatchMetrics(
    const std::vector<std::vector<double>>& batches,
    const std::vector<std::vector<double>>& mixed, std::size_t R, Rng& rng,
    bool with_replacement = true);

}  // namespace hpo::analysis

#endif  // HPO_ANALYSIS_METRICS_H_
