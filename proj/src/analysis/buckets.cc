#include "hpo/analysis/buckets.h"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "hpo/analysis/metrics.h"

namespace hpo::analysis {

double BestReference(const std::vector<MetricSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("buckets: no samples");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) best = std::min(best, s.validation_loss);
  return best;
}

void SetGaps(std::vector<MetricSample>& samples, double best_ref) {
  if (!(best_ref > 0)) {
    throw std::invalid_argument("buckets: best reference must be positive");
  }
  for (auto& s : samples) s.gap = s.validation_loss / best_ref - 1.0;
}

std::optional<std::size_t> BucketOf(double gap,
                                    const std::vector<double>& edges) {
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    if (gap >= edges[k] && gap < edges[k + 1]) return k;
  }
  return std::nullopt;
}

std::string BucketLabel(const std::vector<double>& edges, std::size_t k) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g-%g", 100.0 * edges.at(k),
                100.0 * edges.at(k + 1));
  return buf;
}

std::vector<double> UniformEdges(double width, double hi) {
  if (!(width > 0)) throw std::invalid_argument("buckets: width must be > 0");
  std::vector<double> e;
  for (int k = 0;; ++k) {
    // rounded so that 0.05 * 7 lands on 0.35
    const double v = std::round(width * k * 1e12) / 1e12;
    if (v > hi + 1e-12) break;
    e.push_back(v);
  }
  return e;
}

BucketTable GapBucketize(const std::vector<MetricSample>& samples,
                         const std::vector<double>& edges) {
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1])) {
      throw std::invalid_argument("buckets: edges must increase");
    }
  }
  struct Acc {
    double sig = 0, rmse = 0, align = 0, calign = 0;
    std::size_t n = 0;
    void Add(double a, double b, double c, double d, std::size_t w = 1) {
      sig += a;
      rmse += b;
      align += c;
      calign += d;
      n += w;
    }
  };
  using Cell = std::tuple<std::size_t, std::size_t, std::string>;
  // cell -> run -> iteration -> accumulated samples
  std::map<Cell, std::map<int, std::map<int, Acc>>> cells;
  BucketTable table;
  for (const auto& s : samples) {
    const auto k = BucketOf(s.gap, edges);
    if (!k) {
      ++table.out_of_range;
      continue;
    }
    cells[{s.p, *k, s.estimator}][s.run][s.iteration].Add(
        s.signal_sq, s.rmse_sq, s.align, s.crossalign);
  }
  for (const auto& [cell, runs] : cells) {
    Acc across;
    std::size_t n = 0;
    for (const auto& [run, iters] : runs) {
      Acc within;
      for (const auto& [it, acc] : iters) {
        const double w = static_cast<double>(acc.n);
        within.Add(acc.sig / w, acc.rmse / w, acc.align / w, acc.calign / w);
        n += acc.n;
      }
      const double w = static_cast<double>(within.n);
      across.Add(within.sig / w, within.rmse / w, within.align / w,
                 within.calign / w);
    }
    const double w = static_cast<double>(across.n);
    BucketRow row;
    row.p = std::get<0>(cell);
    row.bucket = std::get<1>(cell);
    row.label = BucketLabel(edges, row.bucket);
    row.estimator = std::get<2>(cell);
    const double sig_sq = across.sig / w;
    row.signal_clamped = sig_sq < 0;
    row.signal = row.signal_clamped ? 0.0 : std::sqrt(sig_sq);
    row.rmse = std::sqrt(std::max(across.rmse / w, 0.0));
    row.align = across.align / w;
    row.crossalign = across.calign / w;
    row.snr = MetricSnr(row.signal, row.rmse);
    row.n = n;
    row.runs = runs.size();
    table.rows.push_back(row);
  }
  return table;
}

const BucketRow* FindRow(const BucketTable& table, std::size_t p,
                         std::size_t bucket, const std::string& estimator) {
  for (const auto& r : table.rows) {
    if (r.p == p && r.bucket == bucket && r.estimator == estimator) return &r;
  }
  return nullptr;
}

void WriteBucketCsv(std::ostream& out, const BucketTable& table) {
  out << "# format=hpo-buckets,version=1\n"
      << "p,gap_bucket,estimator,signal,rmse,align,snr,crossalign,n\n";
  for (const auto& r : table.rows) {
    out << r.p << ',' << r.label << ',' << r.estimator << ',' << r.signal
        << ',' << r.rmse << ',' << r.align << ',' << r.snr << ','
        << r.crossalign << ',' << r.n << "\n";
  }
}

namespace {
constexpr const char* kSampleVersion = "# format=hpo-samples,version=1";
constexpr const char* kSampleHeader =
    "p,run,iteration,validation_loss,gap,estimator,signal_sq,rmse_sq,align,"
    "crossalign,R";
}

void WriteSamplesCsv(std::ostream& out, const std::vector<MetricSample>& s) {
  out << kSampleVersion << "\n" << kSampleHeader << "\n";
  char buf[512];
  for (const auto& m : s) {
    std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%.17g,%.17g,%s,%.17g,%.17g,"
                  "%.17g,%.17g,%zu\n",
                  m.p, m.run, m.iteration, m.validation_loss, m.gap,
                  m.estimator.c_str(), m.signal_sq, m.rmse_sq, m.align,
                  m.crossalign, m.R);
    out << buf;
  }
}

std::vector<MetricSample> ReadSamplesCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSampleVersion) {
    throw std::runtime_error("samples: missing or unknown version line");
  }
  if (!std::getline(in, line) || line != kSampleHeader) {
    throw std::runtime_error("samples: unexpected header");
  }
  std::vector<MetricSample> out;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    if (c.size() != 11) {
      throw std::runtime_error("samples: line " + std::to_string(lineno) +
                               " has " + std::to_string(c.size()) +
                               " fields, expected 11");
    }
    MetricSample m;
    m.p = std::stoull(c[0]);
    m.run = std::stoi(c[1]);
    m.iteration = std::stoi(c[2]);
    m.validation_loss = std::stod(c[3]);
    m.gap = std::stod(c[4]);
    m.estimator = c[5];
    m.signal_sq = std::stod(c[6]);
    m.rmse_sq = std::stod(c[7]);
    m.align = std::stod(c[8]);
    m.crossalign = std::stod(c[9]);
    m.R = std::stoull(c[10]);
    out.push_back(m);
  }
  return out;
}

}  // namespace hpo::analysis
