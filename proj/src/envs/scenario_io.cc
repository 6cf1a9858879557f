#include "hpo/envs/scenario_io.h"

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hpo::envs {

namespace {

constexpr int kVersion = 1;

void WriteRow(std::ostream& out, std::size_t index, char tag,
              const ad::Tensor& t) {
  out << index << ',' << tag;
  char buf[32];
  for (double v : t.data()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  }
  out << '\n';
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

void WriteScenarios(std::ostream& out, const ScenarioSetHeader& header,
                    const std::vector<Scenario>& scenarios) {
  const bool noise = !scenarios.empty() && scenarios[0].has_reparam_noise();
  const std::size_t state_dim =
      scenarios.empty() ? 0 : scenarios[0].initial_state.size();
  const std::size_t dist_dim =
      scenarios.empty() ? 0 : scenarios[0].disturbances.dim(1);
  out << "format=hpo-scenarios,version=" << kVersion
      << ",env=" << EnvKindName(header.kind) << ",p=" << header.p
      << ",T=" << header.T << ",seed=" << header.seed
      << ",count=" << scenarios.size() << ",state_dim=" << state_dim
      << ",disturbance_dim=" << dist_dim << ",noise=" << (noise ? 1 : 0)
      << '\n';
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    WriteRow(out, i, 's', scenarios[i].initial_state);
    WriteRow(out, i, 'd', scenarios[i].disturbances);
    if (noise) WriteRow(out, i, 'e', scenarios[i].reparam_noise);
  }
}

std::vector<Scenario> ReadScenarios(std::istream& in,
                                    ScenarioSetHeader* header) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("scenario file: missing header");
  }
  std::map<std::string, std::string> kv;
  for (const std::string& field : SplitCsv(line)) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("scenario file: bad header field '" + field +
                               "'");
    }
    kv[field.substr(0, eq)] = field.substr(eq + 1);
  }
  const auto get = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::runtime_error("scenario file: header lacks '" + key + "'");
    }
    return it->second;
  };
  if (get("format") != "hpo-scenarios") {
    throw std::runtime_error("scenario file: unknown format");
  }
  if (std::stoi(get("version")) != kVersion) {
    throw std::runtime_error("scenario file: unsupported version " +
                             get("version"));
  }
  ScenarioSetHeader h;
  h.kind = ParseEnvKind(get("env"));
  h.p = std::stoul(get("p"));
  h.T = std::stoul(get("T"));
  h.seed = std::stoull(get("seed"));
  const std::size_t count = std::stoul(get("count"));
  const std::size_t state_dim = std::stoul(get("state_dim"));
  const std::size_t dist_dim = std::stoul(get("disturbance_dim"));
  const bool noise = get("noise") == "1";
  if (header != nullptr) *header = h;

  std::vector<Scenario> out(count);
  for (Scenario& s : out) s.reparam_noise = ad::Tensor::Zeros({0});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = SplitCsv(line);
    if (fields.size() < 2) throw std::runtime_error("scenario file: short row");
    const std::size_t index = std::stoul(fields[0]);
    if (index >= count) {
      throw std::runtime_error("scenario file: index out of range");
    }
    std::vector<double> values;
    values.reserve(fields.size() - 2);
    for (std::size_t f = 2; f < fields.size(); ++f) {
      values.push_back(std::stod(fields[f]));
    }
    const char tag = fields[1].empty() ? '?' : fields[1][0];
    const auto expect = [&](std::size_t n) {
      if (values.size() != n) {
        throw std::runtime_error("scenario file: row " + std::to_string(index) +
                                 fields[1] + " has " +
                                 std::to_string(values.size()) + " values, " +
                                 "expected " + std::to_string(n));
      }
    };
    if (tag == 's') {
      expect(state_dim);
      out[index].initial_state = ad::Tensor({state_dim}, std::move(values));
    } else if (tag == 'd') {
      expect(h.T * dist_dim);
      out[index].disturbances = ad::Tensor({h.T, dist_dim}, std::move(values));
    } else if (tag == 'e' && noise) {
      expect(h.T * h.p);
      out[index].reparam_noise = ad::Tensor({h.T, h.p}, std::move(values));
    } else {
      throw std::runtime_error("scenario file: unknown row tag '" + fields[1] +
                               "'");
    }
  }
  return out;
}

}  // namespace hpo::envs
