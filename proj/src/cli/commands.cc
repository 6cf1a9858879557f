#include "hpo/cli/commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

#include "hpo/analysis/buckets.h"
#include "hpo/analysis/riccati.h"
#include "hpo/autodiff/tape.h"
#include "hpo/envs/slqr.h"
#include "hpo/oracles/jrp_dp.h"
#include "hpo/training/runlog.h"

namespace hpo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string Fmt(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

policy::HybridPolicy LoadPolicy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  json j;
  in >> j;
  return policy::HybridPolicy::FromJson(j);
}

ad::Op ParseOp(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(ad::Op::kLogSoftmaxRows); ++k) {
    const auto op = static_cast<ad::Op>(k);
    if (name == ad::OpName(op)) return op;
  }
  throw std::invalid_argument("unknown op " + name);
}

}  // namespace

// ---------------------------------------------------------------- train

std::vector<TrialOutcome> RunTrain(const ExperimentConfig& config,
                                   std::ostream& log) {
  config.Validate();
  const fs::path root(config.output_dir);
  fs::create_directories(root);
  WriteText(root / "config.json", ToJson(config).dump(2) + "\n");

  std::vector<std::size_t> ps = config.p_list;
  if (ps.empty()) ps = {config.p};
  std::vector<TrialOutcome> out;
  for (std::size_t p : ps) {
    for (std::size_t trial = 0; trial < config.trials; ++trial) {
      const std::uint64_t seed = config.TrialSeed(trial);
      fs::path dir = root;
      if (!config.p_list.empty()) dir /= "p" + std::to_string(p);
      dir /= "trial_" + std::to_string(trial);
      fs::create_directories(dir);

      const auto env = BuildEnv(config, p, seed);
      const training::Dataset data =
          training::BuildDataset(*env, config.train_size,
                                 config.validation_size, config.test_size, seed);
      training::TrainConfig tc = config.train;
      tc.seed = seed;
      tc.iterations = config.Iterations();
      training::Trainer trainer(*env, tc, BuildPolicyConfig(config, *env, seed),
                                data);
      const auto t0 = std::chrono::steady_clock::now();
      log << "[train] " << config.env << " p=" << p << " trial=" << trial
          << " seed=" << seed << " algo=" << AlgorithmName(tc.algorithm)
          << " iterations=" << tc.iterations << "\n";
      const training::TrainResult r =
          trainer.Run([&](const training::EvalRecord& e) {
            log << "  update " << e.update << " val "
                << Fmt("%.4f", e.validation_loss) << " test "
                << Fmt("%.4f", e.test_loss) << " ("
                << Fmt("%.1f", Seconds(t0)) << "s)\n";
            log.flush();
          });

      {
        std::ofstream f(dir / "runlog.csv");
        training::WriteRunLogCsv(f, r.log);
      }
      WriteText(dir / "checkpoint.json", trainer.policy().ToJson().dump() + "\n");

      json s;
      s["format"] = "hpo-summary";
      s["version"] = 1;
      s["env"] = config.env;
      s["p"] = p;
      s["J"] = env->num_modes();
      s["B"] = tc.batch_size;
      s["algorithm"] = AlgorithmName(tc.algorithm);
      s["trial"] = trial;
      s["seed"] = seed;
      s["instance_seed"] =
          config.instance_seed >= 0 ? static_cast<std::uint64_t>(config.instance_seed)
                                    : seed;
      s["iterations"] = tc.iterations;
      s["policy_updates"] = r.policy_updates;
      s["final_validation_loss"] = r.final_validation_loss;
      s["final_test_loss"] = r.final_test_loss;
      s["best_validation_loss"] = r.best_validation_loss;
      s["test_at_best_validation"] = r.test_at_best_validation;
      s["diverged"] = r.diverged;
      if (r.diverged) s["error"] = r.error;
      if (const auto* slqr = dynamic_cast<const envs::Slqr*>(env.get())) {
        const auto base = analysis::BestSingleModeBaseline(*slqr, data.test);
        s["riccati_mode"] = base.mode;
        s["riccati_cost"] = base.cost;
        s["gap_to_riccati"] = (r.final_test_loss - base.cost) / base.cost;
        log << "  riccati best single mode " << base.mode << " cost "
            << Fmt("%.4f", base.cost) << ", gap "
            << Fmt("%+.3f%%", 100.0 * (r.final_test_loss - base.cost) / base.cost)
            << "\n";
      }
      if (const auto* jrp = dynamic_cast<const envs::Jrp*>(env.get());
          jrp && p == 1) {
        // Exact long-run optimum of the single-product instance.
        s["dp_optimum"] =
            oracles::JrpSingleProductOptimum(jrp->params()).average_cost;
      }
      WriteText(dir / "summary.json", s.dump(2) + "\n");
      log << "  final test " << Fmt("%.4f", r.final_test_loss) << " after "
          << r.policy_updates << " updates"
          << (r.diverged ? " (diverged: " + r.error + ")" : std::string())
          << "\n";
      out.push_back({dir.string(), s});
    }
  }
  return out;
}

// ------------------------------------------------------------ gradcheck

GradcheckReport RunGradcheck(const GradcheckOptions& o, std::ostream& log) {
  if (!o.corrupt_op.empty()) {
    ad::SetBackwardFault(ParseOp(o.corrupt_op), o.corrupt_scale);
    log << "[gradcheck] backward rule of " << o.corrupt_op << " scaled by "
        << o.corrupt_scale << "\n";
  }
  GradcheckReport rep;
  try {
    rep.fd = analysis::StandardPathwiseChecks(o.seed, o.h, o.tolerance);
    rep.toy = analysis::ToyMonteCarloCheck(envs::ToyParams{}, o.toy_gamma,
                                           analysis::DefaultToyPolicy(),
                                           o.toy_samples, o.toy_chunk, o.seed);
  } catch (...) {
    ad::SetBackwardFault(ad::Op::kLeaf, 1.0);
    throw;
  }
  ad::SetBackwardFault(ad::Op::kLeaf, 1.0);
  rep.passed = rep.toy.passed;
  for (const auto& r : rep.fd) {
    rep.passed = rep.passed && r.passed;
    log << "pathwise " << r.name << ": max rel err "
        << Fmt("%.3e", r.max_rel_err) << " over " << r.checked
        << " params, " << r.skipped_kinks << " at kinks -> "
        << (r.passed ? "ok" : "FAIL") << "\n";
  }
  const auto& t = rep.toy;
  log << "toy mdp (" << t.samples << " samples):\n";
  auto row = [&](const char* name, const std::vector<double>& mean,
                 const std::vector<double>& se,
                 const std::vector<double>& target) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      log << "  " << name << "[" << i << "] mc " << Fmt("%+.5f", mean[i])
          << " se " << Fmt("%.5f", se[i]) << " oracle "
          << Fmt("%+.5f", target[i]) << "\n";
    }
  };
  row("phi", t.phi_mean, t.phi_se, t.oracle.phi);
  row("kappa", t.kappa_mean, t.kappa_se, t.oracle.kappa);
  std::vector<double> pw(t.oracle.kappa.size());
  for (std::size_t i = 0; i < pw.size(); ++i) {
    pw[i] = t.oracle.kappa[i] - t.oracle.kappa_cross[i];
  }
  row("nocross", t.nocross_mean, t.nocross_se, pw);
  log << "  max |z|: phi " << Fmt("%.2f", t.max_z_phi) << ", kappa "
      << Fmt("%.2f", t.max_z_kappa) << ", nocross "
      << Fmt("%.2f", t.max_z_nocross) << " (limit " << t.z_tolerance
      << ") -> " << (t.passed ? "ok" : "FAIL") << "\n";
  log << (rep.passed ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return rep;
}

// ---------------------------------------------------------- gradquality

std::vector<SignalRatioRow> SignalRatios(
    const std::vector<analysis::MetricSample>& samples) {
  using Key = std::tuple<std::size_t, int, int>;
  std::map<Key, SignalRatioRow> rows;
  std::map<Key, std::pair<double, double>> sig;  // cross, pathwise
  for (const auto& s : samples) {
    const Key k{s.p, s.run, s.iteration};
    SignalRatioRow& r = rows[k];
    r.p = s.p;
    r.run = s.run;
    r.iteration = s.iteration;
    r.gap = s.gap;
    const double signal = std::sqrt(std::max(s.signal_sq, 0.0));
    if (s.estimator == "cross_only") sig[k].first = signal;
    if (s.estimator == "pathwise_only") {
      sig[k].second = signal;
      r.crossalign_pathwise = s.crossalign;
    }
    if (s.estimator == "mixed_full") r.crossalign_mixed = s.crossalign;
  }
  std::vector<SignalRatioRow> out;
  for (auto& [k, r] : rows) {
    const auto [cross, path] = sig[k];
    r.signal_ratio = path > 0 ? cross / path : 0.0;
    out.push_back(r);
  }
  return out;
}

void WriteSignalRatioCsv(std::ostream& out,
                         const std::vector<SignalRatioRow>& rows) {
  out << "# format=hpo-signal-ratio,version=1\n"
      << "p,run,iteration,gap,signal_ratio,crossalign_pathwise,"
         "crossalign_mixed\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%.10g,%.10g,%.10g,%.10g\n", r.p,
                  r.run, r.iteration, r.gap, r.signal_ratio,
                  r.crossalign_pathwise, r.crossalign_mixed);
    out << buf;
  }
}

double Correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

GradQualityOutput RunGradQuality(const ExperimentConfig& config,
                                 const std::string& checkpoint_path,
                                 bool pretrain, std::ostream& log) {
  config.Validate();
  if (checkpoint_path.empty() && !pretrain) {
    throw std::invalid_argument(
        "gradquality needs a checkpoint or --pretrain");
  }
  if (!checkpoint_path.empty() && config.gq_p.size() != 1) {
    throw std::invalid_argument(
        "a single checkpoint serves exactly one p; set gradquality.p_list");
  }
  const fs::path root(config.output_dir);
  fs::create_directories(root);
  GradQualityOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t p : config.gq_p) {
    const envs::JrpParams jp = GradQualityParams(config, p);
    std::optional<policy::HybridPolicy> checkpoint;
    if (!checkpoint_path.empty()) {
      checkpoint = LoadPolicy(checkpoint_path);
      if (checkpoint->action_dim() != p) {
        throw std::invalid_argument("checkpoint action dimension does not "
                                    "match p");
      }
    } else {
      // Near-optimal HPOFull policy on the same instance.
      const envs::Jrp env(jp);
      const std::uint64_t seed = config.TrialSeed(0);
      const training::Dataset data =
          training::BuildDataset(env, config.train_size, config.validation_size,
                                 config.test_size, seed);
      training::TrainConfig tc = config.train;
      tc.algorithm = training::Algorithm::kHpoFull;
      tc.seed = seed;
      tc.iterations = training::IterationsForUpdates(
          static_cast<std::size_t>(config.gq_pretrain_updates),
          tc.batch_size, config.train_size);
      ExperimentConfig pc = config;
      training::Trainer trainer(env, tc, BuildPolicyConfig(pc, env, seed),
                                data);
      log << "[gradquality] p=" << p << " pretraining " << tc.iterations
          << " iterations\n";
      const auto r = trainer.Run();
      if (r.diverged) throw std::runtime_error("pretraining diverged");
      log << "  checkpoint validation " << Fmt("%.4f", r.final_validation_loss)
          << " (" << Fmt("%.1f", Seconds(t0)) << "s)\n";
      WriteText(root / ("checkpoint_p" + std::to_string(p) + ".json"),
                trainer.policy().ToJson().dump() + "\n");
      checkpoint = trainer.policy();
    }
    const envs::Jrp noisy(jp, {.clamp_orders = true});
    std::vector<analysis::MetricSample> ps;
    for (std::size_t run = 0; run < config.gq_runs; ++run) {
      analysis::GradQualityConfig gc = config.gq;
      gc.seed = config.seed + run;
      gc.run = static_cast<int>(run);
      auto res = analysis::GradientQualityExperiment(
          noisy, *checkpoint, gc, [&](const analysis::EstimationEpoch& e) {
            log << "  p=" << p << " run " << run << " epoch " << e.iteration
                << " validation " << Fmt("%.4f", e.validation_loss) << " ("
                << Fmt("%.1f", Seconds(t0)) << "s)\n";
            log.flush();
          });
      ps.insert(ps.end(), res.samples.begin(), res.samples.end());
    }
    // Gaps relative to the best validation loss of any run at this p.
    analysis::SetGaps(ps, analysis::BestReference(ps));
    out.samples.insert(out.samples.end(), ps.begin(), ps.end());
  }
  out.edges =
      analysis::UniformEdges(config.gq_bucket_width, config.gq_bucket_max);
  out.table = analysis::GapBucketize(out.samples, out.edges);
  out.ratios = SignalRatios(out.samples);
  {
    std::ofstream f(root / "gradquality_samples.csv");
    analysis::WriteSamplesCsv(f, out.samples);
  }
  {
    std::ofstream f(root / "gradquality_buckets.csv");
    analysis::WriteBucketCsv(f, out.table);
  }
  {
    std::ofstream f(root / "gradquality_signal_ratio.csv");
    WriteSignalRatioCsv(f, out.ratios);
  }
  WriteText(root / "config.json", ToJson(config).dump(2) + "\n");
  for (std::size_t p : config.gq_p) {
    std::vector<double> x, y;
    for (const auto& r : out.ratios) {
      if (r.p == p) {
        x.push_back(r.signal_ratio);
        y.push_back(r.crossalign_pathwise);
      }
    }
    log << "p=" << p << ": corr(signal ratio, pathwise crossalign) = "
        << Fmt("%.3f", Correlation(x, y)) << " over " << x.size()
        << " epochs\n";
  }
  if (out.table.out_of_range > 0) {
    log << out.table.out_of_range << " samples outside the bucket range\n";
  }
  return out;
}

// -------------------------------------------------------------- riccati

std::vector<RiccatiRow> RunRiccati(const ExperimentConfig& config,
                                   const std::string& checkpoint_path,
                                   std::ostream& log) {
  config.Validate();
  if (config.env != "slqr") {
    throw std::invalid_argument("riccati needs env = slqr");
  }
  const std::uint64_t seed = config.TrialSeed(0);
  const auto env = BuildEnv(config, config.p, seed);
  const auto& slqr = dynamic_cast<const envs::Slqr&>(*env);
  const training::Dataset data = training::BuildDataset(
      *env, config.train_size, config.validation_size, config.test_size, seed);
  const auto base = analysis::BestSingleModeBaseline(slqr, data.test);
  std::vector<RiccatiRow> rows;
  for (std::size_t j = 0; j < base.per_mode.size(); ++j) {
    rows.push_back({std::to_string(j), base.per_mode[j],
                    analysis::RiccatiExpectedCost(slqr.params(), j, data.test),
                    (base.per_mode[j] - base.cost) / base.cost});
  }
  rows.push_back({"best", base.cost,
                  analysis::RiccatiExpectedCost(slqr.params(), base.mode,
                                                data.test),
                  0.0});
  if (!checkpoint_path.empty()) {
    const policy::HybridPolicy pol = LoadPolicy(checkpoint_path);
    // Same evaluation seed as the trainer's test split.
    const double cost = training::Evaluate(pol, *env, data.test,
                                           config.train.eval_seed + 1);
    rows.push_back({"hpo", cost, std::nan(""), (cost - base.cost) / base.cost});
  }
  if (config.noise_std > 0) {
    log << "note: closed_form ignores process noise\n";
  }
  return rows;
}

void WriteRiccatiCsv(std::ostream& out, const std::vector<RiccatiRow>& rows) {
  out << "# format=hpo-riccati,version=1\n"
      << "mode,simulated_cost,closed_form_cost,gap\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.6g\n", r.label.c_str(),
                  r.simulated, r.closed_form, r.gap);
    out << buf;
  }
}

// --------------------------------------------------------------- report

std::optional<double> MedianUpdates(
    std::vector<std::optional<std::int64_t>> values) {
  if (values.empty()) return std::nullopt;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> v;
  for (const auto& x : values) v.push_back(x ? static_cast<double>(*x) : kInf);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double m = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (std::isinf(m)) return std::nullopt;
  return m;
}

std::vector<ReportRow> RunReport(const std::vector<std::string>& directories,
                                 const std::vector<double>& targets) {
  struct Run {
    json summary;
    training::RunLog log;
  };
  std::vector<Run> runs;
  for (const auto& d : directories) {
    if (!fs::exists(d)) throw std::invalid_argument("no such directory " + d);
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(d)) {
      if (e.path().filename() == "summary.json") found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    for (const auto& path : found) {
      Run r;
      std::ifstream s(path);
      s >> r.summary;
      std::ifstream l(path.parent_path() / "runlog.csv");
      if (!l) throw std::runtime_error("missing runlog next to " + path.string());
      r.log = training::ReadRunLogCsv(l);
      runs.push_back(std::move(r));
    }
  }
  if (runs.empty()) throw std::invalid_argument("report: no runs found");

  // Instances are resampled per seed, so references are per instance.
  using Problem =
      std::tuple<std::string, std::size_t, std::size_t, std::uint64_t>;
  using Config = std::tuple<std::string, std::size_t, std::size_t, std::size_t,
                            std::string>;
  std::map<Problem, double> best;
  std::map<Config, std::vector<const Run*>> groups;
  for (const auto& r : runs) {
    const auto& s = r.summary;
    const Problem pk{s.at("env").get<std::string>(), s.at("p").get<std::size_t>(),
                     s.at("J").get<std::size_t>(),
                     s.at("instance_seed").get<std::uint64_t>()};
    const double b = r.log.BestValidation();
    auto it = best.find(pk);
    if (it == best.end() || b < it->second) best[pk] = b;
    groups[{std::get<0>(pk), std::get<1>(pk), std::get<2>(pk),
            s.at("B").get<std::size_t>(), s.at("algorithm").get<std::string>()}]
        .push_back(&r);
  }
  std::vector<ReportRow> rows;
  for (const auto& [key, members] : groups) {
    const auto& [env, p, J, B, algo] = key;
    for (double target : targets) {
      ReportRow row{env, p, J, B, algo, target, std::nullopt, 0,
                    members.size()};
      std::vector<std::optional<std::int64_t>> v;
      for (const Run* r : members) {
        const double ref =
            best.at({env, p, J,
                     r->summary.at("instance_seed").get<std::uint64_t>()});
        v.push_back(training::UpdatesToTarget(r->log, ref, target));
        if (v.back()) ++row.reached;
      }
      row.median = MedianUpdates(v);
      rows.push_back(row);
    }
  }
  return rows;
}

void WriteReportCsv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "# format=hpo-report,version=1\n"
      << "env,p,J,B,algorithm,target_gap,median_updates,reached,trials\n";
  for (const auto& r : rows) {
    out << r.env << ',' << r.p << ',' << r.J << ',' << r.B << ','
        << r.algorithm << ',' << r.target << ','
        << (r.median ? Fmt("%.1f", *r.median) : std::string(kNotReached))
        << ',' << r.reached << ',' << r.trials << "\n";
  }
}

}  // namespace hpo::cli
