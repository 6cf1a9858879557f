// Acceptance runner: one PASS/FAIL line per criterion. Criteria 3-6 train
// real policies, so a full run takes roughly half an hour on one core.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hpo/analysis/buckets.h"
#include "hpo/analysis/gradcheck.h"
#include "hpo/analysis/metrics.h"
#include "hpo/analysis/riccati.h"
#include "hpo/cli/commands.h"
#include "hpo/cli/config.h"
#include "hpo/envs/jrp.h"
#include "hpo/envs/slqr.h"
#include "hpo/estimators/losses.h"
#include "hpo/estimators/rollout.h"
#include "hpo/training/gae.h"
#include "hpo/training/trainer.h"
#include "hpo/util/rng.h"

namespace {

using namespace hpo;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), fmt, a);
  return buf;
}

// Criterion 1: autodiff vs central differences, away from kinks.
Outcome PathwiseGradients(double budget) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = analysis::StandardPathwiseChecks(3, 1e-5, 1e-5);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  Outcome o{secs < budget, ""};
  double worst = 0.0;
  for (const auto& r : results) {
    o.pass = o.pass && r.passed;
    worst = std::max(worst, r.max_rel_err);
    o.detail += r.name + " " + Fmt("%.1e", r.max_rel_err) + " (" +
                std::to_string(r.skipped_kinks) + " kinks); ";
  }
  o.detail += "worst " + Fmt("%.2e", worst) + " < 1e-05, " +
              Fmt("%.0fs", secs);
  return o;
}

// Criterion 2: Monte-Carlo mean of the mixed estimator on the toy MDP.
Outcome ToyUnbiasedness() {
  const auto r = analysis::ToyMonteCarloCheck(
      envs::ToyParams{}, 0.9, analysis::DefaultToyPolicy(), 100000, 1000, 1);
  return {r.passed, "max |z| phi " + Fmt("%.2f", r.max_z_phi) + ", kappa " +
                        Fmt("%.2f", r.max_z_kappa) + ", nocross vs oracle " +
                        "minus cross " + Fmt("%.2f", r.max_z_nocross) +
                        " (limit 3, " + std::to_string(r.samples) +
                        " samples)"};
}

// Criterion 3: HPO on noise-free S-LQR, J = 1, p = 4, against s0'P0 s0.
Outcome RiccatiRecovery(const fs::path& out, double budget) {
  cli::ExperimentConfig c = cli::Preset("desk-slqr");
  c.updates = 2000;
  c.output_dir = (out / "c3_slqr").string();
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  const auto runs = cli::RunTrain(c, log);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const auto& s = runs.at(0).summary;
  const double hpo = s.at("final_test_loss").get<double>();
  // Closed form on the same test scenarios.
  const auto env = cli::BuildEnv(c, c.p, c.TrialSeed(0));
  const auto& slqr = dynamic_cast<const envs::Slqr&>(*env);
  const auto data = training::BuildDataset(*env, c.train_size,
                                           c.validation_size, c.test_size,
                                           c.TrialSeed(0));
  const double opt = analysis::RiccatiExpectedCost(slqr.params(), 0, data.test);
  const double gap = (hpo - opt) / opt;
  const bool bound_ok = hpo >= opt - 1e-8;
  Outcome o{gap < 0.01 && bound_ok && secs < budget &&
                !s.at("diverged").get<bool>(),
            ""};
  o.detail = "HPO test " + Fmt("%.4f", hpo) + " vs s0'P0s0 " +
             Fmt("%.4f", opt) + ", gap " + Fmt("%.3f%%", 100 * gap) +
             " (< 1%), " + std::to_string(s.at("policy_updates").get<int>()) +
             " updates, " + Fmt("%.0fs", secs) +
             (bound_ok ? "" : ", BELOW the Riccati lower bound");
  return o;
}

// Criterion 4: JRP p = 1, B = 16, single trial, HPOFull and PPO.
Outcome JrpParity(const fs::path& out, double budget) {
  const auto t0 = std::chrono::steady_clock::now();
  auto run = [&](training::Algorithm algo, const std::string& dir) {
    cli::ExperimentConfig c = cli::Preset("desk-jrp");
    c.train.algorithm = algo;
    c.output_dir = (out / dir).string();
    std::ostringstream log;
    return cli::RunTrain(c, log).at(0).summary;
  };
  const auto hpo = run(training::Algorithm::kHpoFull, "c4_jrp_hpo");
  const auto ppo = run(training::Algorithm::kPpo, "c4_jrp_ppo");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const double h = hpo.at("final_test_loss").get<double>();
  const double p = ppo.at("final_test_loss").get<double>();
  const double eh = std::abs(h - 34.96) / 34.96;
  const double ep = std::abs(p - 34.94) / 34.94;
  Outcome o{eh <= 0.03 && ep <= 0.03 && secs < budget, ""};
  o.detail = "HPOFull " + Fmt("%.3f", h) + " (" + Fmt("%+.1f%%", 100 * (h - 34.96) / 34.96) +
             " vs 34.96), PPO " + Fmt("%.3f", p) + " (" +
             Fmt("%+.1f%%", 100 * (p - 34.94) / 34.94) +
             " vs 34.94), limit 3%; exact optimum of this instance " +
             Fmt("%.3f", hpo.at("dp_optimum").get<double>()) + ", " +
             Fmt("%.0fs", secs);
  return o;
}

// Criteria 5 and 6 share one gradient-quality experiment at p = 20.
struct GqOutcome {
  Outcome ordering;
  Outcome vanishing;
};

GqOutcome GradientQuality(const fs::path& out, double budget) {
  cli::ExperimentConfig c = cli::Preset("desk-gradquality");
  c.output_dir = (out / "c56_gradquality").string();
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = cli::RunGradQuality(c, "", true, log);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  GqOutcome g;
  const std::size_t p = c.gq_p.at(0);
  const auto b3035 = analysis::BucketOf(0.32, res.edges);
  const auto* mixed =
      b3035 ? analysis::FindRow(res.table, p, *b3035, "mixed_full") : nullptr;
  const auto* sf = b3035 ? analysis::FindRow(res.table, p, *b3035, "sf") : nullptr;
  if (!mixed || !sf) {
    g.ordering = {false, "30-35% gap bucket not populated"};
  } else {
    const double margin = mixed->align - sf->align;
    g.ordering = {margin >= 0.3 && mixed->rmse < sf->rmse && secs < budget,
                  "p=20, gap 30-35%: align mixed " + Fmt("%.3f", mixed->align) +
                      " vs sf " + Fmt("%.3f", sf->align) + " (margin " +
                      Fmt("%.3f", margin) + " >= 0.3), rmse mixed " +
                      Fmt("%.3g", mixed->rmse) + " vs sf " +
                      Fmt("%.3g", sf->rmse) + ", " + Fmt("%.0fs", secs)};
  }
  // Coarse buckets 0-5 and 25-35 for the trend.
  const std::vector<double> edges = {0.0, 0.05, 0.25, 0.35};
  const auto coarse = analysis::GapBucketize(res.samples, edges);
  const auto* near = analysis::FindRow(coarse, p, 0, "cross_only");
  const auto* far = analysis::FindRow(coarse, p, 2, "cross_only");
  const auto* pw = analysis::FindRow(coarse, p, 0, "pathwise_only");
  if (!near || !far || !pw) {
    g.vanishing = {false, "0-5% or 25-35% bucket not populated"};
  } else {
    const double ratio = far->signal > 0 ? near->signal / far->signal : INFINITY;
    g.vanishing = {ratio < 0.5 && pw->signal > 0,
                   "cross-term signal " + Fmt("%.3g", near->signal) +
                       " at 0-5% vs " + Fmt("%.3g", far->signal) +
                       " at 25-35% (ratio " + Fmt("%.2f", ratio) +
                       " < 0.5), pathwise " + Fmt("%.3g", pw->signal) +
                       " > 0"};
  }
  return g;
}

// Criterion 7: pathwise + cross = mixed on every tested rollout.
Outcome ExactDecomposition() {
  double worst = 0.0;
  double worst_single_mode_cross = 0.0;
  int rollouts = 0;
  auto check = [&](const envs::Environment& env, double K, double level,
                   bool single) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      policy::HybridPolicy pol(
          analysis::GradCheckPolicyConfig(env, K, 11 + seed));
      if (level > 0) pol.normalizer().Set(level);
      const auto scen = env.GenerateScenarios(16, 100 + seed);
      std::vector<std::size_t> rows(16);
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
      ad::Tape tape;
      const auto view = pol.Bind(tape, true, true, false);
      Rng rng(seed, 9);
      auto traj = estimators::Rollout(pol, view, env, scen, rows, rng);
      estimators::ComputeValues(pol, traj);
      const double scale = 1.0 / training::CostScaleStd(traj.cost_values);
      auto gae = training::ComputeGae(traj.cost_values, traj.values, traj.T,
                                      traj.n, 0.99, 0.96, scale);
      training::Standardize(gae.advantages);
      traj.advantages = gae.advantages;
      const auto s = estimators::SplitGradTerms(tape, view, traj, 0.99, scale);
      for (std::size_t i = 0; i < s.mixed.size(); ++i) {
        worst = std::max(worst, std::abs(s.pathwise[i] + s.cross[i] - s.mixed[i]));
        if (single) {
          worst_single_mode_cross =
              std::max(worst_single_mode_cross, std::abs(s.cross[i]));
        }
      }
      ++rollouts;
    }
  };
  for (std::size_t p : {1u, 5u}) {
    envs::JrpParams jp = envs::JrpSampleParams(p, 4);
    jp.T = 20;
    double mean = 0.0;
    for (double m : jp.mu) mean += m;
    check(envs::Jrp(jp), jp.K, mean / static_cast<double>(p), false);
  }
  for (std::size_t J : {1u, 2u, 4u}) {
    envs::SlqrParams sp = envs::SlqrBuild(4, J, 5);
    sp.T = 10;
    check(envs::Slqr(sp), 0.0, 0.0, J == 1);
  }
  return {worst < 1e-10 && worst_single_mode_cross == 0.0,
          "max |pathwise + cross - mixed| " + Fmt("%.2e", worst) +
              " over " + std::to_string(rollouts) +
              " rollouts (< 1e-10); max |cross| at J=1 " +
              Fmt("%.1e", worst_single_mode_cross)};
}

// Criterion 8: Signal, RMSE and SNR of synthetic Gaussian estimators.
Outcome MetricCalibration() {
  const std::vector<double> mu = {1.0, -2.0, 0.5, 0.0, 1.5};
  const std::vector<double> sd = {0.5, 1.0, 0.8, 0.3, 1.2};
  double tr = 0.0;
  for (double s : sd) tr += s * s;
  const double mu_norm = analysis::Norm(mu);
  const std::size_t R = 10000;
  Rng rng(21);
  std::vector<std::vector<double>> g(R), h(R);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < mu.size(); ++i) {
      g[r].push_back(mu[i] + sd[i] * rng.Normal());
      h[r].push_back(mu[i] + sd[i] * rng.Normal());
    }
  }
  std::vector<analysis::EstimatePair> pairs;
  for (std::size_t r = 0; r < R; ++r) pairs.push_back({g[r], h[r]});
  const double signal = analysis::MetricSignal(pairs).value;
  const double rmse = analysis::MetricRmse(pairs);
  const double snr = analysis::MetricSnr(signal, rmse);
  // Standard errors by the delta method from the per-pair statistics.
  const auto q = analysis::InnerProducts(pairs);
  const auto d = analysis::HalfSquaredDistances(pairs);
  double mq = 0, md = 0;
  for (std::size_t r = 0; r < R; ++r) {
    mq += q[r] / R;
    md += d[r] / R;
  }
  double vq = 0, vd = 0, cqd = 0;
  for (std::size_t r = 0; r < R; ++r) {
    vq += (q[r] - mq) * (q[r] - mq) / (R - 1.0);
    vd += (d[r] - md) * (d[r] - md) / (R - 1.0);
    cqd += (q[r] - mq) * (d[r] - md) / (R - 1.0);
  }
  const double se_signal = std::sqrt(vq / R) / (2 * signal);
  const double se_rmse = std::sqrt(vd / R) / (2 * rmse);
  const double se_snr =
      snr * 0.5 *
      std::sqrt((vq / (mq * mq) + vd / (md * md) - 2 * cqd / (mq * md)) / R);
  const double zs = std::abs(signal - mu_norm) / se_signal;
  const double zr = std::abs(rmse - std::sqrt(tr)) / se_rmse;
  const double zn = std::abs(snr - mu_norm / std::sqrt(tr)) / se_snr;
  return {zs <= 3 && zr <= 3 && zn <= 3,
          "signal " + Fmt("%.4f", signal) + " vs " + Fmt("%.4f", mu_norm) +
              " (z " + Fmt("%.2f", zs) + "), rmse " + Fmt("%.4f", rmse) +
              " vs " + Fmt("%.4f", std::sqrt(tr)) + " (z " + Fmt("%.2f", zr) +
              "), snr " + Fmt("%.4f", snr) + " vs " +
              Fmt("%.4f", mu_norm / std::sqrt(tr)) + " (z " +
              Fmt("%.2f", zn) + "), R=10^4"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string out = "acceptance_out";
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--out", out, "directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int k) { return selected.empty() || selected.count(k); };
  fs::create_directories(out);

  int failures = 0;
  auto report = [&](int k, const char* name, const Outcome& o) {
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL")
              << "  " << name << "  " << o.detail << std::endl;
    failures += !o.pass;
  };
  auto guarded = [&](int k, const char* name, const std::function<Outcome()>& f) {
    if (!wanted(k)) return;
    try {
      report(k, name, f());
    } catch (const std::exception& e) {
      report(k, name, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, "pathwise-gradient correctness",
          [] { return PathwiseGradients(60); });
  guarded(2, "mixed-estimator unbiasedness", [] { return ToyUnbiasedness(); });
  guarded(3, "riccati recovery", [&] { return RiccatiRecovery(out, 600); });
  guarded(4, "jrp small-p parity", [&] { return JrpParity(out, 900); });
  if (wanted(5) || wanted(6)) {
    try {
      const GqOutcome g = GradientQuality(out, 1200);
      if (wanted(5)) report(5, "estimator-quality ordering", g.ordering);
      if (wanted(6)) report(6, "cross-term vanishing trend", g.vanishing);
    } catch (const std::exception& e) {
      const Outcome o{false, std::string("error: ") + e.what()};
      if (wanted(5)) report(5, "estimator-quality ordering", o);
      if (wanted(6)) report(6, "cross-term vanishing trend", o);
    }
  }
  guarded(7, "exact decomposition", [] { return ExactDecomposition(); });
  guarded(8, "synthetic metric calibration", [] { return MetricCalibration(); });
  return failures == 0 ? 0 : 1;
}
