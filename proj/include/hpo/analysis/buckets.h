#ifndef HPO_ANALYSIS_BUCKETS_H_
#define HPO_ANALYSIS_BUCKETS_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hpo::analysis {

// One estimator's metrics at one estimation epoch of one run.
struct MetricSample {
  std::size_t p = 0;
  int run = 0;
  int iteration = 0;
  double validation_loss = 0.0;
  double gap = 0.0;  // validation_loss / best_ref - 1, filled by SetGaps
  std::string estimator;
  double signal_sq = 0.0;
  double rmse_sq = 0.0;
  double align = 0.0;
  double crossalign = 0.0;
  std::size_t R = 100;
};

// Lowest validation loss over all samples.
double BestReference(const std::vector<MetricSample>& samples);
void SetGaps(std::vector<MetricSample>& samples, double best_ref);

// Index k with edges[k] <= gap < edges[k + 1]; nullopt when out of range.
std::optional<std::size_t> BucketOf(double gap, const std::vector<double>& edges);
std::string BucketLabel(const std::vector<double>& edges, std::size_t k);

// Uniform edges 0, width, ..., up to and including hi.
std::vector<double> UniformEdges(double width, double hi);

struct BucketRow {
  std::size_t p = 0;
  std::size_t bucket = 0;
  std::string label;
  std::string estimator;
  double signal = 0.0;  // sqrt of averaged signal^2 (0 if negative)
  bool signal_clamped = false;
  double rmse = 0.0;
  double align = 0.0;
  double snr = 0.0;
  double crossalign = 0.0;
  std::size_t n = 0;     // samples
  std::size_t runs = 0;
};

struct BucketTable {
  std::vector<BucketRow> rows;
  std::size_t out_of_range = 0;
};

// Average within (run, iteration), then over a run's iterations, then
// across runs, per (p, bucket, estimator). Empty cells produce no row.
BucketTable GapBucketize(const std::vector<MetricSample>& samples,
                         const std::vector<double>& edges);

const BucketRow* FindRow(const BucketTable& table, std::size_t p,
                         std::size_t bucket, const std::string& estimator);

// Columns p,gap_bucket,estimator,signal,rmse,align,snr,crossalign,n.
void WriteBucketCsv(std::ostream& out, const BucketTable& table);

// Raw samples, one per line, for later re-bucketing.
void WriteSamplesCsv(std::ostream& out, const std::vector<MetricSample>& s);
std::vector<MetricSample> ReadSamplesCsv(std::istream& in);

}  // namespace hpo::analysis

#endif  // HPO_ANALYSIS_BUCKETS_H_
