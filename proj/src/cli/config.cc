#include "hpo/cli/config.h"

#include <fstream>
#include <set>
#include <stdexcept>

#include "hpo/envs/slqr.h"

namespace hpo::cli {

using nlohmann::json;

namespace {

// One list of (key, member) pairs per section drives both directions.
template <class F>
void VisitTrain(training::TrainConfig& t, F&& f) {
  f("lr_continuous", t.lr_continuous);
  f("lr_ppo", t.lr_ppo);
  f("adam_eps", t.adam_eps);
  f("clip_coef", t.clip_coef);
  f("value_coef", t.value_coef);
  f("entropy_coef_init", t.entropy_coef_init);
  f("entropy_coef_final", t.entropy_coef_final);
  f("gae_gamma", t.gae_gamma);
  f("gae_lambda", t.gae_lambda);
  f("ppo_epochs", t.ppo_epochs);
  f("minibatches", t.minibatches);
  f("kl_stop", t.kl_stop);
  f("grad_clip", t.grad_clip);
  f("batch_size", t.batch_size);
  f("iterations", t.iterations);
  f("eval_every", t.eval_every);
  f("eval_seed", t.eval_seed);
}

template <class F>
void VisitGq(ExperimentConfig& c, F&& f) {
  f("p_list", c.gq_p);
  f("runs", c.gq_runs);
  f("T", c.gq_T);
  f("pretrain_updates", c.gq_pretrain_updates);
  f("bucket_width", c.gq_bucket_width);
  f("bucket_max", c.gq_bucket_max);
  analysis::GradQualityConfig& g = c.gq;
  f("offset", g.offset);
  f("sigma", g.sigma);
  f("estimation_batch", g.estimation_batch);
  f("batches_per_estimate", g.batches_per_estimate);
  f("repetitions", g.repetitions);
  f("with_replacement", g.with_replacement);
  f("train_batch", g.train_batch);
  f("train_batches_per_epoch", g.train_batches_per_epoch);
  f("epochs", g.epochs);
  f("value_pretrain_batches", g.value_pretrain_batches);
  f("learning_rate", g.learning_rate);
  f("entropy_coef_init", g.entropy_coef_init);
  f("entropy_coef_final", g.entropy_coef_final);
  f("gamma", g.gamma);
  f("lambda", g.lambda);
  f("validation_size", g.validation_size);
  f("estimate_at_start", g.estimate_at_start);
}

template <class F>
void VisitTop(ExperimentConfig& c, F&& f) {
  f("env", c.env);
  f("p", c.p);
  f("p_list", c.p_list);
  f("J", c.J);
  f("T", c.T);
  f("identical", c.identical);
  f("instance_seed", c.instance_seed);
  f("noise_std", c.noise_std);
  f("updates", c.updates);
  f("hidden", c.hidden);
  f("seed", c.seed);
  f("trials", c.trials);
  f("train_size", c.train_size);
  f("validation_size", c.validation_size);
  f("test_size", c.test_size);
  f("output_dir", c.output_dir);
  f("targets", c.targets);
}

// Reads the keys of one section into members, rejecting unknown keys.
template <class Visit>
void ReadSection(const json& j, const std::string& section, Visit&& visit,
                 std::set<std::string> extra = {}) {
  if (!j.is_object()) {
    throw std::invalid_argument("config: " + section + " must be an object");
  }
  std::set<std::string> known = std::move(extra);
  visit([&](const char* key, auto& member) {
    known.insert(key);
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(member);
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: " + section + key + ": " +
                                  e.what());
    }
  });
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw std::invalid_argument("config: unknown field " + section +
                                  item.key());
    }
  }
}

}  // namespace

void ExperimentConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("config: " + field + " " + why);
  };
  if (env != "jrp" && env != "slqr") fail("env", "must be jrp or slqr");
  if (p < 1) fail("p", "must be >= 1");
  for (std::size_t v : p_list) {
    if (v < 1) fail("p_list", "entries must be >= 1");
  }
  if (J < 1) fail("J", "must be >= 1");
  if (env == "slqr" && identical) fail("identical", "applies to jrp only");
  if (T == 1) fail("T", "must be 0 (default) or >= 2");
  if (noise_std < 0) fail("noise_std", "must be non-negative");
  if (updates < 0) fail("updates", "must be non-negative");
  for (std::size_t w : hidden) {
    if (w < 1) fail("hidden", "widths must be >= 1");
  }
  if (trials < 1) fail("trials", "must be >= 1");
  if (train_size < 1 || validation_size < 1 || test_size < 1) {
    fail("train_size/validation_size/test_size", "must be >= 1");
  }
  if (train.batch_size > train_size) {
    fail("train.batch_size", "must not exceed train_size");
  }
  train.Validate();
  if (updates > 0) {
    try {
      training::IterationsForUpdates(static_cast<std::size_t>(updates),
                                     train.batch_size, train_size);
    } catch (const std::invalid_argument& e) {
      fail("updates", e.what());
    }
  } else if (train.iterations < 1) {
    fail("train.iterations", "must be >= 1 when updates is 0");
  }
  for (double t : targets) {
    if (!(t >= 0)) fail("targets", "must be non-negative gaps");
  }
  if (gq_p.empty()) fail("gradquality.p_list", "must not be empty");
  if (gq_runs < 1) fail("gradquality.runs", "must be >= 1");
  if (gq_T < 2) fail("gradquality.T", "must be >= 2");
  if (gq_pretrain_updates < 0) {
    fail("gradquality.pretrain_updates", "must be non-negative");
  }
  if (!(gq_bucket_width > 0) || !(gq_bucket_max > gq_bucket_width)) {
    fail("gradquality.bucket_width", "must be positive and below bucket_max");
  }
  if (gq.batches_per_estimate < 2) {
    fail("gradquality.batches_per_estimate", "must be >= 2");
  }
  if (gq.estimation_batch < 1 || gq.train_batch < 1) {
    fail("gradquality.estimation_batch", "must be >= 1");
  }
  if (gq.repetitions < 1) fail("gradquality.repetitions", "must be >= 1");
  if (!(gq.sigma >= 0)) fail("gradquality.sigma", "must be non-negative");
}

std::size_t ExperimentConfig::Iterations() const {
  if (updates > 0) {
    return training::IterationsForUpdates(static_cast<std::size_t>(updates),
                                          train.batch_size, train_size);
  }
  return train.iterations;
}

json ToJson(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  json j;
  VisitTop(c, [&](const char* k, auto& v) { j[k] = v; });
  json t;
  t["algorithm"] = training::AlgorithmName(c.train.algorithm);
  VisitTrain(c.train, [&](const char* k, auto& v) { t[k] = v; });
  j["train"] = t;
  json g;
  VisitGq(c, [&](const char* k, auto& v) { g[k] = v; });
  j["gradquality"] = g;
  return j;
}

ExperimentConfig FromJson(const json& j) {
  ExperimentConfig c;
  ReadSection(j, "", [&](auto&& f) { VisitTop(c, f); },
              {"train", "gradquality", "preset"});
  if (j.contains("train")) {
    const json& t = j.at("train");
    ReadSection(t, "train.", [&](auto&& f) { VisitTrain(c.train, f); },
                {"algorithm"});
    if (t.contains("algorithm")) {
      try {
        c.train.algorithm =
            training::ParseAlgorithm(t.at("algorithm").get<std::string>());
      } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: train.algorithm: ") +
                                    e.what());
      }
    }
  }
  if (j.contains("gradquality")) {
    ReadSection(j.at("gradquality"), "gradquality.",
                [&](auto&& f) { VisitGq(c, f); });
  }
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  // A preset key seeds the defaults; the file's fields override it.
  if (j.contains("preset")) {
    json base = ToJson(Preset(j.at("preset").get<std::string>()));
    base.merge_patch(j);
    base.erase("preset");
    return FromJson(base);
  }
  return FromJson(j);
}

std::vector<std::string> PresetNames() {
  return {"desk-jrp",   "desk-slqr",  "desk-gradquality",
          "full-jrp",  "full-slqr", "full-gradquality"};
}

ExperimentConfig Preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "desk-jrp" || name == "full-jrp") {
    c.env = "jrp";
    c.p = 1;
    c.train.batch_size = 16;
    c.updates = 1600;
    if (name == "full-jrp") {
      c.p_list = {1, 3, 5, 10, 20, 30, 40, 50, 60};
      c.hidden = {512, 512};
      c.trials = 10;
    }
  } else if (name == "desk-slqr" || name == "full-slqr") {
    c.env = "slqr";
    c.p = 4;
    c.J = 1;
    c.train.batch_size = 128;
    c.updates = 4000;
    if (name == "full-slqr") {
      c.J = 2;
      c.p_list = {1, 3, 5, 7, 10, 13, 16, 20, 24, 32, 40, 48};
      c.hidden = {512, 512};
      c.trials = 10;
    }
  } else if (name == "desk-gradquality" || name == "full-gradquality") {
    c.env = "jrp";
    c.identical = true;
    c.train.batch_size = 16;
    c.gq_p = {20};
    c.gq_T = 50;
    c.train_size = 256;
    c.validation_size = 64;
    c.test_size = 64;
    c.gq_pretrain_updates = 320;
    c.gq.epochs = 30;
    c.gq.train_batches_per_epoch = 16;
    if (name == "full-gradquality") {
      c.gq_p = {1, 3, 5, 10, 20, 30, 50};
      c.gq_T = 100;
      c.gq_runs = 5;
      c.train_size = 1024;
      c.validation_size = 256;
      c.test_size = 256;
      c.gq_pretrain_updates = 1600;
      c.gq.epochs = 40;
      c.gq.batches_per_estimate = 16;
      c.hidden = {512, 512};
    }
  } else {
    throw std::invalid_argument("unknown preset " + name);
  }
  return c;
}

std::unique_ptr<envs::Environment> BuildEnv(const ExperimentConfig& c,
                                            std::size_t p,
                                            std::uint64_t trial_seed) {
  const std::uint64_t inst = c.instance_seed >= 0
                                 ? static_cast<std::uint64_t>(c.instance_seed)
                                 : trial_seed;
  if (c.env == "jrp") {
    envs::JrpParams jp =
        c.identical ? envs::JrpIdenticalParams(p) : envs::JrpSampleParams(p, inst);
    if (c.T > 0) {
      jp.T = c.T;
      jp.warmup = jp.cooldown = c.T / 5;
    }
    return std::make_unique<envs::Jrp>(jp);
  }
  if (c.env == "slqr") {
    envs::SlqrParams sp = envs::SlqrBuild(p, c.J, inst);
    if (c.T > 0) sp.T = c.T;
    sp.noise_std = c.noise_std;
    return std::make_unique<envs::Slqr>(sp);
  }
  throw std::invalid_argument("config: env must be jrp or slqr");
}

policy::PolicyConfig BuildPolicyConfig(const ExperimentConfig& c,
                                       const envs::Environment& env,
                                       std::uint64_t trial_seed) {
  policy::PolicyConfig pc;
  pc.kind = env.kind();
  pc.state_dim = env.state_dim();
  pc.action_dim = env.action_dim();
  pc.num_modes = env.num_modes();
  if (const auto* jrp = dynamic_cast<const envs::Jrp*>(&env)) {
    pc.fixed_cost = jrp->params().K;
  }
  pc.hidden = c.hidden;
  pc.seed = trial_seed;
  return pc;
}

envs::JrpParams GradQualityParams(const ExperimentConfig& c, std::size_t p) {
  envs::JrpParams jp = envs::JrpIdenticalParams(p);
  jp.T = c.gq_T;
  if (c.gq_T != 100) jp.warmup = jp.cooldown = c.gq_T / 5;
  return jp;
}

}  // namespace hpo::cli
