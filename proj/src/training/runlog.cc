#include "hpo/training/runlog.h"

#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hpo::training {

namespace {

constexpr const char* kVersionLine = "# format=hpo-runlog,version=1";
constexpr const char* kColumns =
    "update_idx,iteration,split,loss,surrogate,kl,entropy,entropy_coef,"
    "ppo_epochs,grad_norm_phi,grad_norm_kappa,grad_norm_psi";

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

const EvalRecord* RunLog::BestValidationRecord() const {
  const EvalRecord* best = nullptr;
  for (const EvalRecord& e : evals) {
    if (best == nullptr || e.validation_loss < best->validation_loss) best = &e;
  }
  return best;
}

double RunLog::BestValidation() const {
  const EvalRecord* best = BestValidationRecord();
  return best ? best->validation_loss
              : std::numeric_limits<double>::infinity();
}

std::optional<std::int64_t> UpdatesToTarget(const RunLog& log, double best_ref,
                                            double gap) {
  const double target = (1.0 + gap) * best_ref;
  for (const EvalRecord& e : log.evals) {
    if (e.validation_loss <= target) return e.update;
  }
  return std::nullopt;
}

void WriteRunLogCsv(std::ostream& out, const RunLog& log) {
  out << kVersionLine << "\n" << kColumns << "\n";
  for (const UpdateRecord& u : log.updates) {
    out << u.update << ',' << u.iteration << ",train," << Num(u.train_loss)
        << ',' << Num(u.surrogate) << ',' << Num(u.approx_kl) << ','
        << Num(u.entropy) << ',' << Num(u.entropy_coef) << ',' << u.ppo_epochs
        << ',' << Num(u.grad_norm_phi) << ',' << Num(u.grad_norm_kappa) << ','
        << Num(u.grad_norm_psi) << "\n";
  }
  for (const EvalRecord& e : log.evals) {
    out << e.update << ',' << e.iteration << ",validation,"
        << Num(e.validation_loss) << ",,,,,,,,\n";
    out << e.update << ',' << e.iteration << ",test," << Num(e.test_loss)
        << ",,,,,,,,\n";
  }
}

RunLog ReadRunLogCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kVersionLine) {
    throw std::runtime_error("runlog: missing or unsupported version line");
  }
  if (!std::getline(in, line) || line != kColumns) {
    throw std::runtime_error("runlog: unexpected column header");
  }
  RunLog log;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> c = SplitCsv(line);
    c.resize(12);
    try {
      const std::int64_t update = std::stoll(c[0]);
      const std::size_t iteration = std::stoull(c[1]);
      const double loss = std::stod(c[3]);
      if (c[2] == "train") {
        UpdateRecord u;
        u.update = update;
        u.iteration = iteration;
        u.train_loss = loss;
        u.surrogate = std::stod(c[4]);
        u.approx_kl = std::stod(c[5]);
        u.entropy = std::stod(c[6]);
        u.entropy_coef = std::stod(c[7]);
        u.ppo_epochs = std::stoi(c[8]);
        u.grad_norm_phi = std::stod(c[9]);
        u.grad_norm_kappa = std::stod(c[10]);
        u.grad_norm_psi = std::stod(c[11]);
        log.updates.push_back(u);
      } else if (c[2] == "validation") {
        log.evals.push_back({update, iteration, loss, 0.0});
      } else if (c[2] == "test") {
        if (log.evals.empty() || log.evals.back().update != update) {
          throw std::runtime_error("test row without validation row");
        }
        log.evals.back().test_loss = loss;
      } else {
        throw std::runtime_error("unknown split '" + c[2] + "'");
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("runlog: line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return log;
}

}  // namespace hpo::training
