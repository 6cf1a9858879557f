#ifndef HPO_ANALYSIS_GRADCHECK_H_
#define HPO_ANALYSIS_GRADCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

#include "hpo/envs/environment.h"
#include "hpo/envs/toy.h"
#include "hpo/oracles/toy_oracle.h"
#include "hpo/policy/policy.h"

namespace hpo::analysis {

struct FdCheckResult {
  std::string name;
  double max_rel_err = 0.0;  // max |ad - fd| / (1 + |fd|) over checked params
  std::size_t checked = 0;
  // Parameters whose central difference straddles a cost kink, detected by
  // disagreement between steps h and h / 2 (see PathwiseFdCheck).
  std::size_t skipped_kinks = 0;
  double tolerance = 1e-5;
  bool passed = false;
};

// kappa-gradient of the undiscounted total cost of a rollout with a fixed
// scenario and a fixed (previously sampled) mode sequence, against central
// differences with step h. A parameter is treated as sitting on a kink when
// the differences with steps h and h / 2 disagree by more than kink_tol
// relative; it is then excluded and counted.
FdCheckResult PathwiseFdCheck(const std::string& name,
                              const envs::Environment& env,
                              const policy::HybridPolicy& policy,
                              const envs::Scenario& scenario,
                              std::uint64_t mode_seed, double h = 1e-5,
                              double tolerance = 1e-5,
                              double kink_tol = 1e-4);

// Policy used by the standard checks: two hidden layers of `width`, unit
// output gain so the candidates actually move with kappa.
policy::PolicyConfig GradCheckPolicyConfig(const envs::Environment& env,
                                           double fixed_cost,
                                           std::uint64_t seed,
                                           std::size_t width = 32);

// The four acceptance configurations: JRP p in {1, 5} with T = 20 and S-LQR
// p in {2, 8} with T = 10.
std::vector<FdCheckResult> StandardPathwiseChecks(std::uint64_t seed,
                                                  double h = 1e-5,
                                                  double tolerance = 1e-5);

struct ToyMcResult {
  oracles::ToyOracleGradient oracle;
  std::vector<double> phi_mean, phi_se;
  std::vector<double> kappa_mean, kappa_se;
  // Mixed estimator with the cross term dropped (pathwise only).
  std::vector<double> nocross_mean, nocross_se;
  double max_z_phi = 0.0;
  double max_z_kappa = 0.0;
  // |nocross - (oracle - oracle cross)| / se
  double max_z_nocross = 0.0;
  std::size_t samples = 0;
  double z_tolerance = 3.0;
  bool passed = false;
};

// Monte-Carlo mean of the mixed estimator (reward-to-go advantages, no
// baseline) on the enumerable toy MDP versus the enumeration oracle.
// Standard errors from the spread of `chunk`-sized batch means.
ToyMcResult ToyMonteCarloCheck(const envs::ToyParams& params, double gamma,
                               const oracles::ToyLinearPolicy& lin,
                               std::size_t samples, std::size_t chunk,
                               std::uint64_t seed, double z_tolerance = 3.0);

// Toy policy with the flat layout of ToyLinearPolicy loaded into the nets.
policy::HybridPolicy ToyPolicy(const oracles::ToyLinearPolicy& lin);

// Default non-trivial linear policy for the toy checks.
oracles::ToyLinearPolicy DefaultToyPolicy();

}  // namespace hpo::analysis

#endif  // HPO_ANALYSIS_GRADCHECK_H_
