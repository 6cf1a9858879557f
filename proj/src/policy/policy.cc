#include "hpo/policy/policy.h"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hpo/autodiff/ops.h"
#include "hpo/nn/checkpoint.h"

namespace hpo::policy {

using ad::Tensor;

void Normalizer::Update(double batch_mean) {
  if (!enabled_) return;
  if (!(batch_mean > 0.0)) {
    throw std::domain_error("Normalizer: batch mean demand must be positive");
  }
  ewma_ = initialized_ ? beta_ * ewma_ + (1.0 - beta_) * batch_mean
                      : batch_mean;
  initialized_ = true;
}

double Normalizer::BatchMean(const std::vector<envs::Scenario>& scenarios,
                             std::span<const std::size_t> rows) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t r : rows) {
    for (double d : scenarios[r].disturbances.data()) total += d;
    n += scenarios[r].disturbances.size();
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

namespace {

std::vector<std::size_t> Sizes(std::size_t in,
                               const std::vector<std::size_t>& hidden,
                               std::size_t out) {
  std::vector<std::size_t> sizes = {in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

HybridPolicy::HybridPolicy(PolicyConfig config)
    : config_(std::move(config)),
      normalizer_(config_.kind == envs::EnvKind::kJrp) {
  if (config_.num_modes < 1 || config_.action_dim < 1) {
    throw std::invalid_argument("HybridPolicy: need J >= 1 and p >= 1");
  }
  const std::size_t in = input_dim();
  const std::size_t J = config_.num_modes;
  const std::size_t p = config_.action_dim;
  discrete_ = nn::Mlp(Sizes(in, config_.hidden, J));
  continuous_ = nn::Mlp(Sizes(in, config_.hidden, J * p));
  value_ = nn::Mlp(Sizes(in, config_.hidden, 1));
  discrete_.InitOrthogonal(config_.hidden_gain, config_.policy_output_gain,
                           SplitMix64(config_.seed * 3 + 0));
  continuous_.InitOrthogonal(config_.hidden_gain, config_.policy_output_gain,
                             SplitMix64(config_.seed * 3 + 1));
  value_.InitOrthogonal(config_.hidden_gain, config_.value_output_gain,
                        SplitMix64(config_.seed * 3 + 2));
  log_std_ = Tensor::Full({p}, config_.initial_log_std);
}

std::size_t HybridPolicy::input_dim() const {
  return config_.kind == envs::EnvKind::kJrp ? config_.state_dim + 2
                                             : config_.state_dim;
}

ParamView HybridPolicy::Constants() const {
  return {discrete_.params(), continuous_.params(), value_.params(), log_std_};
}

ParamView HybridPolicy::Bind(ad::Tape& tape, bool phi, bool kappa, bool psi,
                             bool log_std) const {
  ParamView v = Constants();
  if (phi) v.phi = discrete_.Bind(tape);
  if (kappa) v.kappa = continuous_.Bind(tape);
  if (psi) v.psi = value_.Bind(tape);
  if (log_std) v.log_std = tape.Leaf(log_std_);
  return v;
}

Tensor HybridPolicy::Features(const Tensor& state) const {
  if (config_.kind != envs::EnvKind::kJrp) return state;
  const double ewma = normalizer_.value();
  const std::size_t n = state.dim(0);
  std::vector<double> extra(2 * n);
  const double log_ewma = std::log(ewma);
  const double log_cost = std::log(std::max(config_.fixed_cost, 1e-12) / ewma);
  for (std::size_t r = 0; r < n; ++r) {
    extra[2 * r] = log_ewma;
    extra[2 * r + 1] = log_cost;
  }
  return ad::ConcatCols({state * (1.0 / ewma), Tensor({n, 2}, std::move(extra))});
}

Tensor HybridPolicy::Transform(const Tensor& raw) const {
  if (config_.kind != envs::EnvKind::kJrp) return raw;
  return ad::Softplus(raw) * normalizer_.value();
}

Tensor HybridPolicy::Logits(const ParamView& v, const Tensor& state) const {
  return discrete_.Forward(v.phi, Features(state));
}

Tensor HybridPolicy::RawCandidates(const ParamView& v,
                                   const Tensor& state) const {
  return continuous_.Forward(v.kappa, Features(state));
}

Tensor HybridPolicy::Value(const ParamView& v, const Tensor& state) const {
  const Tensor out = value_.Forward(v.psi, Features(state));
  return ad::Reshape(out, {out.dim(0)});
}

namespace {

ActResult Select(const HybridPolicy& policy, const ParamView& v,
                 const Tensor& state, Tensor logits, std::vector<int> modes,
                 const Tensor* eps, ContinuousNoise noise) {
  const std::size_t n = state.dim(0);
  ActResult out;
  out.logp = DiscreteLogProb(logits, modes);
  out.logits = std::move(logits);
  out.candidates = policy.Candidates(v, state);
  out.mean = ad::GatherBlocks(out.candidates, modes, policy.action_dim());
  out.b = out.mean;
  if (noise.offset != 0.0) out.b = out.b + noise.offset;
  if (eps != nullptr) {
    if (eps->shape() != ad::Shape{n, policy.action_dim()}) {
      throw ad::ShapeError("Act: noise shape " + ad::ShapeToString(eps->shape()) +
                           " does not match " +
                           ad::ShapeToString({n, policy.action_dim()}));
    }
    out.b = out.b + noise.sigma * *eps;
  }
  out.modes = std::move(modes);
  return out;
}

}  // namespace

ActResult HybridPolicy::Act(const ParamView& v, const Tensor& state, Rng& rng,
                            bool drop_cross, const Tensor* eps,
                            ContinuousNoise noise) const {
  Tensor logits = Logits(v, drop_cross ? ad::StopGrad(state) : state);
  CheckFiniteLogits(logits, state);
  const std::size_t n = state.dim(0);
  const std::size_t J = config_.num_modes;
  const std::vector<double> probs = Probabilities(logits);
  std::vector<int> modes(n);
  for (std::size_t r = 0; r < n; ++r) {
    modes[r] = rng.Categorical(std::span<const double>(probs).subspan(r * J, J));
  }
  return Select(*this, v, state, std::move(logits), std::move(modes), eps,
                noise);
}

ActResult HybridPolicy::ActWithModes(const ParamView& v, const Tensor& state,
                                     std::span<const int> modes,
                                     bool drop_cross, const Tensor* eps,
                                     ContinuousNoise noise) const {
  Tensor logits = Logits(v, drop_cross ? ad::StopGrad(state) : state);
  CheckFiniteLogits(logits, state);
  return Select(*this, v, state, std::move(logits),
                std::vector<int>(modes.begin(), modes.end()), eps, noise);
}

nlohmann::json HybridPolicy::ToJson() const {
  nlohmann::json j;
  j["format"] = "hpo-policy";
  j["version"] = 1;
  j["env"] = envs::EnvKindName(config_.kind);
  j["state_dim"] = config_.state_dim;
  j["p"] = config_.action_dim;
  j["J"] = config_.num_modes;
  j["fixed_cost"] = config_.fixed_cost;
  j["hidden"] = config_.hidden;
  j["hidden_gain"] = config_.hidden_gain;
  j["policy_output_gain"] = config_.policy_output_gain;
  j["value_output_gain"] = config_.value_output_gain;
  j["seed"] = config_.seed;
  j["normalizer"] = {{"enabled", normalizer_.enabled()},
                     {"initialized", normalizer_.initialized()},
                     {"beta", normalizer_.beta()},
                     {"ewma", normalizer_.value()}};
  std::vector<nn::NamedTensor> named;
  const auto add = [&named](const std::string& prefix, const nn::Mlp& net) {
    for (std::size_t i = 0; i < net.params().size(); ++i) {
      named.push_back({prefix + "." + std::to_string(i), net.params()[i]});
    }
  };
  add("phi", discrete_);
  add("kappa", continuous_);
  add("psi", value_);
  named.push_back({"log_std", log_std_});
  j["tensors"] = nn::TensorsToJson(named);
  return j;
}

HybridPolicy HybridPolicy::FromJson(const nlohmann::json& j) {
  if (j.at("format") != "hpo-policy" || j.at("version") != 1) {
    throw std::runtime_error("policy checkpoint: unsupported format/version");
  }
  PolicyConfig config;
  config.kind = envs::ParseEnvKind(j.at("env"));
  config.state_dim = j.at("state_dim");
  config.action_dim = j.at("p");
  config.num_modes = j.at("J");
  config.fixed_cost = j.at("fixed_cost");
  config.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  config.hidden_gain = j.at("hidden_gain");
  config.policy_output_gain = j.at("policy_output_gain");
  config.value_output_gain = j.at("value_output_gain");
  config.seed = j.at("seed");
  HybridPolicy policy(config);
  const auto& norm = j.at("normalizer");
  if (norm.at("initialized").get<bool>()) policy.normalizer_.Set(norm.at("ewma"));
  const auto tensors = nn::TensorsFromJson(j.at("tensors"));
  std::size_t next = 0;
  const auto load = [&](nn::Mlp& net, const std::string& prefix) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      if (next + 1 >= tensors.size() ||
          tensors[next].name != prefix + "." + std::to_string(2 * l)) {
        throw std::runtime_error("policy checkpoint: missing " + prefix +
                                 " tensors");
      }
      net.SetLayer(l, tensors[next].value, tensors[next + 1].value);
      next += 2;
    }
  };
  load(policy.discrete_, "phi");
  load(policy.continuous_, "kappa");
  load(policy.value_, "psi");
  if (next >= tensors.size() || tensors[next].name != "log_std" ||
      tensors[next].value.size() != config.action_dim) {
    throw std::runtime_error("policy checkpoint: missing log_std");
  }
  policy.log_std_ = tensors[next].value;
  return policy;
}

Tensor ActReparam(const Tensor& candidate, double sigma, const Tensor& eps,
                  double offset) {
  Tensor b = candidate;
  if (offset != 0.0) b = b + offset;
  if (sigma != 0.0) b = b + sigma * eps;
  return b;
}

Tensor DiscreteLogProb(const Tensor& logits, std::span<const int> modes) {
  const std::size_t J = logits.dim(1);
  for (int x : modes) {
    if (x < 0 || static_cast<std::size_t>(x) >= J) {
      throw std::out_of_range("DiscreteLogProb: mode " + std::to_string(x) +
                              " outside [0, " + std::to_string(J) + ")");
    }
  }
  const Tensor picked = ad::GatherBlocks(ad::LogSoftmaxRows(logits), modes, 1);
  return ad::Reshape(picked, {picked.dim(0)});
}

Tensor DiscreteEntropy(const Tensor& logits) {
  const Tensor lsm = ad::LogSoftmaxRows(logits);
  return -ad::SumCols(ad::Exp(lsm) * lsm);
}

std::vector<double> Probabilities(const Tensor& logits) {
  const std::size_t n = logits.dim(0);
  const std::size_t J = logits.dim(1);
  std::vector<double> probs(n * J);
  for (std::size_t r = 0; r < n; ++r) {
    double top = logits.at(r, 0);
    for (std::size_t j = 1; j < J; ++j) top = std::max(top, logits.at(r, j));
    double total = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      probs[r * J + j] = std::exp(logits.at(r, j) - top);
      total += probs[r * J + j];
    }
    for (std::size_t j = 0; j < J; ++j) probs[r * J + j] /= total;
  }
  return probs;
}

Tensor GaussianLogProb(const Tensor& sample, const Tensor& mean,
                       const Tensor& log_std) {
  const double p = static_cast<double>(sample.dim(1));
  const Tensor z = (sample - mean) * ad::Exp(-log_std);
  return -0.5 * ad::SumCols(ad::Square(z)) - ad::Sum(log_std) -
         0.5 * p * std::log(2.0 * std::numbers::pi);
}

void CheckFiniteLogits(const Tensor& logits, const Tensor& state) {
  const std::size_t J = logits.dim(1);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::isfinite(logits.at(i))) continue;
    const std::size_t row = i / J;
    std::ostringstream msg;
    msg << "non-finite logits in row " << row << "; state =";
    for (std::size_t c = 0; c < state.dim(1); ++c) {
      msg << ' ' << state.at(row, c);
    }
    throw std::runtime_error(msg.str());
  }
}

}  // namespace hpo::policy
