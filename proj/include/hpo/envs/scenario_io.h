#ifndef HPO_ENVS_SCENARIO_IO_H_
#define HPO_ENVS_SCENARIO_IO_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hpo/envs/environment.h"

namespace hpo::envs {

struct ScenarioSetHeader {
  EnvKind kind = EnvKind::kJrp;
  std::size_t p = 0;
  std::size_t T = 0;
  std::uint64_t seed = 0;
};

// CSV layout. Line 1 is a header of key=value fields:
//   format=hpo-scenarios,version=1,env=<kind>,p=..,T=..,seed=..,count=..,
//   state_dim=..,disturbance_dim=..,noise=<0|1>
// followed by one line per tensor: scenario index, tag (s = initial state,
// d = disturbances, e = reparameterization noise), then row-major values
// printed with 17 significant digits.
void WriteScenarios(std::ostream& out, const ScenarioSetHeader& header,
                    const std::vector<Scenario>& scenarios);
std::vector<Scenario> ReadScenarios(std::istream& in,
                                    ScenarioSetHeader* header = nullptr);

}  // namespace hpo::envs

#endif  // HPO_ENVS_SCENARIO_IO_H_
