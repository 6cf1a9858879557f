#ifndef HPO_CLI_COMMANDS_H_
#define HPO_CLI_COMMANDS_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hpo/analysis/gradcheck.h"
#include "hpo/cli/config.h"
#include "json.hpp"

namespace hpo::cli {

// Exit codes of every command.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;  // tolerance breach or runtime error

// --- train ---------------------------------------------------------------

struct TrialOutcome {
  std::string directory;
  nlohmann::json summary;
};

// Runs every (p, trial) of the config; per trial writes runlog.csv,
// summary.json and checkpoint.json under output_dir, plus config.json at
// the top.
std::vector<TrialOutcome> RunTrain(const ExperimentConfig& config,
                                   std::ostream& log);

// --- gradcheck -----------------------------------------------------------

struct GradcheckOptions {
  std::uint64_t seed = 3;
  double h = 1e-5;
  double tolerance = 1e-5;
  std::size_t toy_samples = 100000;
  std::size_t toy_chunk = 1000;
  double toy_gamma = 0.9;
  // Negative control: scale the backward rule of this op (e.g. "tanh").
  std::string corrupt_op;
  double corrupt_scale = 1.5;
};

struct GradcheckReport {
  std::vector<analysis::FdCheckResult> fd;
  analysis::ToyMcResult toy;
  bool passed = false;
};

GradcheckReport RunGradcheck(const GradcheckOptions& options,
                             std::ostream& log);

// --- gradquality ---------------------------------------------------------

struct SignalRatioRow {
  std::size_t p = 0;
  int run = 0;
  int iteration = 0;
  double gap = 0.0;
  double signal_ratio = 0.0;  // Signal(cross) / Signal(pathwise)
  double crossalign_pathwise = 0.0;
  double crossalign_mixed = 0.0;
};

struct GradQualityOutput {
  std::vector<analysis::MetricSample> samples;  // gaps filled
  analysis::BucketTable table;
  std::vector<double> edges;
  std::vector<SignalRatioRow> ratios;
};

// checkpoint_path empty requires pretrain; otherwise the checkpoint is used
// for every p in the list (so the list must hold a single p).
GradQualityOutput RunGradQuality(const ExperimentConfig& config,
                                 const std::string& checkpoint_path,
                                 bool pretrain, std::ostream& log);

std::vector<SignalRatioRow> SignalRatios(
    const std::vector<analysis::MetricSample>& samples);
void WriteSignalRatioCsv(std::ostream& out,
                         const std::vector<SignalRatioRow>& rows);
// Pearson correlation; 0 when either side is constant.
double Correlation(const std::vector<double>& x, const std::vector<double>& y);

// --- riccati -------------------------------------------------------------

struct RiccatiRow {
  std::string label;  // mode index or "best" or "hpo"
  double simulated = 0.0;
  double closed_form = 0.0;  // s0'P0 s0 (meaningful without noise)
  double gap = 0.0;          // (cost - best) / best
};

std::vector<RiccatiRow> RunRiccati(const ExperimentConfig& config,
                                   const std::string& checkpoint_path,
                                   std::ostream& log);
void WriteRiccatiCsv(std::ostream& out, const std::vector<RiccatiRow>& rows);

// --- report --------------------------------------------------------------

// Median with nullopt as +infinity; even counts average the two middle
// values (infinite if either is).
std::optional<double> MedianUpdates(
    std::vector<std::optional<std::int64_t>> values);

struct ReportRow {
  std::string env;
  std::size_t p = 0;
  std::size_t J = 0;
  std::size_t B = 0;
  std::string algorithm;
  double target = 0.0;
  std::optional<double> median;
  std::size_t reached = 0;
  std::size_t trials = 0;
};

inline constexpr const char* kNotReached = "not_reached";

// Scans the directories recursively for trial summaries. The reference of
// each (env, p, J, instance) is the best validation loss of any run found
// on it, whatever the algorithm.
std::vector<ReportRow> RunReport(const std::vector<std::string>& directories,
                                 const std::vector<double>& targets);
void WriteReportCsv(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace hpo::cli

#endif  // HPO_CLI_COMMANDS_H_
