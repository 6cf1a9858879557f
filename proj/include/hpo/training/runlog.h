#ifndef HPO_TRAINING_RUNLOG_H_
#define HPO_TRAINING_RUNLOG_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace hpo::training {

struct UpdateRecord {
  std::int64_t update = 0;  // 1-based policy update index
  std::size_t iteration = 0;
  double train_loss = 0.0;  // mean reported cost of the training batch
  double surrogate = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double entropy_coef = 0.0;
  int ppo_epochs = 0;
  double grad_norm_phi = 0.0;
  double grad_norm_kappa = 0.0;
  double grad_norm_psi = 0.0;
};

struct EvalRecord {
  std::int64_t update = 0;  // policy updates completed at evaluation time
  std::size_t iteration = 0;
  double validation_loss = 0.0;
  double test_loss = 0.0;
};

struct RunLog {
  std::vector<UpdateRecord> updates;
  std::vector<EvalRecord> evals;

  double BestValidation() const;
  const EvalRecord* BestValidationRecord() const;
};

// First evaluation whose validation loss is <= (1 + gap) best_ref; nullopt
// when never reached.
std::optional<std::int64_t> UpdatesToTarget(const RunLog& log, double best_ref,
                                            double gap);

// Rows: update_idx,iteration,split,loss,surrogate,kl,entropy,entropy_coef,
// ppo_epochs,grad_norm_phi,grad_norm_kappa,grad_norm_psi. split is train for
// policy updates and validation / test for evaluations. Preceded by the
// version line "# format=hpo-runlog,version=1".
void WriteRunLogCsv(std::ostream& out, const RunLog& log);
RunLog ReadRunLogCsv(std::istream& in);

}  // namespace hpo::training

#endif  // HPO_TRAINING_RUNLOG_H_
