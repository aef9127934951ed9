#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>

#include "pdsa/asymptotics.hpp"
#include "pdsa/config.hpp"
#include "pdsa/engine.hpp"
#include "pdsa/errors.hpp"
#include "pdsa/harness.hpp"
#include "pdsa/rng.hpp"

namespace {

using namespace pdsa;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitStatistical = 2;

struct CliOptions {
  std::string configPath;
  std::string outDir = ".";
  std::uint64_t seed = 0;
  long steps = 0;
  long reps = 0;
  int parallel = 0;
  bool fit = false;

  bool hasSeed = false, hasSteps = false, hasReps = false;
};

config::ExperimentConfig loadWithOverrides(const CliOptions& opt) {
  config::ExperimentConfig cfg = config::loadConfig(opt.configPath);
  if (opt.hasSeed) cfg.seed = opt.seed;
  if (opt.hasSteps) cfg.steps = opt.steps;
  if (opt.hasReps) cfg.replications = opt.reps;
  cfg.validate();
  return cfg;
}

std::filesystem::path outPath(const CliOptions& opt, const char* name) {
  return std::filesystem::path(opt.outDir) / name;
}

ordered_json matrixJson(const Eigen::MatrixXd& m) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

int cmdRun(const CliOptions& opt) {
  const auto cfg = loadWithOverrides(opt);
  const engine::Simulator sim = cfg.makeSimulator();
  Rng rng(deriveSeed(cfg.seed, 0));

  engine::RunOptions options;
  options.steps = cfg.steps;
  options.recordEvery = cfg.recordEvery;
  options.collectDiagnostics = true;

  const auto started = std::chrono::steady_clock::now();
  const engine::Trajectory traj = sim.run(sim.initialState(), options, rng);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();

  harness::writeTextFile(outPath(opt, "trajectory.csv").string(),
                         harness::trajectoryCsv(traj, sim.agentCount(),
                                                sim.dim()));
  harness::writeTextFile(
      outPath(opt, "run_summary.json").string(),
      harness::runSummaryJson(cfg, traj, sim.agentCount(), sim.dim(), seconds));

  const auto& fin = traj.records.back();
  std::cout << "ran " << cfg.steps << " steps; final consensus error "
            << fin.diagnostics.consensusError << "\n"
            << "wrote " << outPath(opt, "trajectory.csv").string() << " and "
            << outPath(opt, "run_summary.json").string() << "\n";
  return kExitOk;
}

int cmdMonteCarlo(const CliOptions& opt) {
  const auto cfg = loadWithOverrides(opt);
  const auto mc = harness::runMonteCarlo(cfg, opt.parallel);
  harness::writeTextFile(outPath(opt, "estimates.csv").string(),
                         harness::estimatesCsv(mc));
  if (mc.reduced) {
    harness::writeTextFile(outPath(opt, "samples.csv").string(),
                           harness::scaledSamplesCsv(mc));
  }
  harness::writeTextFile(outPath(opt, "montecarlo.json").string(),
                         harness::monteCarloReportJson(cfg, mc));
  std::cout << mc.replications.size() << " replications of " << mc.steps
            << " steps\n"
            << "median final consensus error " << mc.consensusMedianFinal
            << "\n";
  if (std::isfinite(mc.maxAgentErrorMedian)) {
    std::cout << "median max agent error " << mc.maxAgentErrorMedian << "\n";
  }
  std::cout << "wrote " << outPath(opt, "montecarlo.json").string() << "\n";
  return kExitOk;
}

int cmdAsymptotics(const CliOptions& opt) {
  const auto cfg = loadWithOverrides(opt);
  const auto model =
      asymptotics::buildModel(*cfg.problem, *cfg.graph, cfg.noiseSpec());

  ordered_json out;
  out["spectralAbscissa"] = model.abscissa;
  out["hurwitz"] = model.abscissa < -1e-10;
  out["dualOptimum"] = ordered_json::array();
  for (Eigen::Index i = 0; i < model.dualOptimum.size(); ++i) {
    out["dualOptimum"].push_back(model.dualOptimum(i));
  }
  out["sigma"] = matrixJson(model.Sigma);
  out["sigmaAvg"] = matrixJson(model.SigmaAvg);
  ordered_json blocks = ordered_json::array();
  const Eigen::MatrixXd sigmaX = model.sigmaXBlock();
  for (int i = 0; i < model.agents; ++i) {
    blocks.push_back(matrixJson(
        sigmaX.block(static_cast<Eigen::Index>(i) * model.dim,
                     static_cast<Eigen::Index>(i) * model.dim, model.dim,
                     model.dim)));
  }
  out["sigmaXAgentBlocks"] = std::move(blocks);
  const std::string text = out.dump(2) + "\n";

  std::cout << text;
  harness::writeTextFile(outPath(opt, "asymptotics.json").string(), text);
  return kExitOk;
}

int cmdNormality(const CliOptions& opt) {
  const auto cfg = loadWithOverrides(opt);
  const auto model =
      asymptotics::buildModel(*cfg.problem, *cfg.graph, cfg.noiseSpec());
  config::ExperimentConfig runCfg = cfg;
  runCfg.mode = config::RunMode::Normality;
  runCfg.validate();
  const auto mc = harness::runMonteCarlo(runCfg, opt.parallel);
  const auto report = harness::normalityFromSamples(model, mc, opt.fit);

  harness::writeTextFile(outPath(opt, "samples.csv").string(),
                         harness::scaledSamplesCsv(mc));
  harness::writeTextFile(outPath(opt, "normality.json").string(),
                         harness::normalityReportJson(runCfg, report));

  const std::size_t total = report.components.size();
  std::cout << (report.fitted ? "fitted" : "theoretical") << " KS: "
            << report.passCount << "/" << total << " components pass at alpha "
            << report.alpha << "\n"
            << "primal-block relative Frobenius error "
            << report.xBlockRelativeError << "\n"
            << "wrote " << outPath(opt, "normality.json").string() << "\n";

  // Statistical gate: allow one flaky component out of the batch.
  const bool ok = report.passCount + 1 >= static_cast<int>(total);
  return ok ? kExitOk : kExitStatistical;
}

int cmdEfficiency(const CliOptions& opt) {
  const auto cfg = loadWithOverrides(opt);
  const auto model =
      asymptotics::buildModel(*cfg.problem, *cfg.graph, cfg.noiseSpec());
  config::ExperimentConfig runCfg = cfg;
  runCfg.mode = config::RunMode::Efficiency;
  runCfg.validate();
  const auto mc = harness::runMonteCarlo(runCfg, opt.parallel);
  const auto report = harness::efficiencyFromSamples(model, mc);

  harness::writeTextFile(outPath(opt, "efficiency.json").string(),
                         harness::efficiencyReportJson(runCfg, report));

  std::cout << "averaged-iterate primal trace " << report.averagedTraceRaw
            << " vs last-iterate scaled trace "
            << report.lastIterateTraceScaled
            << (report.averagedBelowLastIterate ? " (improved)" : " (worse)")
            << "\n"
            << "scaled averaged covariance vs theory: relative Frobenius "
            << "error " << report.xBlockRelativeError << "\n"
            << "wrote " << outPath(opt, "efficiency.json").string() << "\n";

  const bool ok =
      report.averagedBelowLastIterate && report.xBlockRelativeError <= 0.35;
  return ok ? kExitOk : kExitStatistical;
}

int cmdReplicate(const CliOptions& opt) {
  const std::uint64_t seed = opt.hasSeed ? opt.seed : 1;
  const auto bundle = harness::replicatePaper(seed, opt.parallel);
  harness::writeReplicationArtifacts(bundle, opt.outDir);

  const auto& mc = bundle.mc;
  std::cout << "benchmark replication: " << mc.replications.size()
            << " runs of " << mc.steps << " steps\n";
  std::cout << "fitted KS passes: " << bundle.fitted.passCount << "/"
            << bundle.fitted.components.size()
            << "; theoretical KS passes: " << bundle.theoretical.passCount
            << "/" << bundle.theoretical.components.size() << "\n";
  std::cout << "consensus error median: " << mc.consensusMedianEarly
            << " (early) -> " << mc.consensusMedianFinal << " (final)\n";
  std::cout << "agent means:\n";
  for (int i = 0; i < mc.agents; ++i) {
    std::cout << "  agent " << (i + 1) << ":";
    for (int c = 0; c < mc.dim; ++c) {
      std::cout << " " << mc.meanEstimates(i, c);
    }
    std::cout << "\n";
  }
  std::cout << "wrote artifacts under " << opt.outDir << "\n";

  const bool ok =
      bundle.fitted.passCount + 1 >=
          static_cast<int>(bundle.fitted.components.size()) &&
      mc.consensusMedianFinal < mc.consensusMedianEarly;
  return ok ? kExitOk : kExitStatistical;
}

int cmdValidate(const CliOptions& opt) {
  const auto cfg = config::loadConfig(opt.configPath);
  std::cout << config::serializeConfig(cfg);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Distributed primal-dual stochastic approximation over random networks"};
  app.require_subcommand(1);

  CliOptions opt;
  CLI::Option *seedOpt = nullptr, *stepsOpt = nullptr, *repsOpt = nullptr;

  auto addCommon = [&](CLI::App* sub, bool needsConfig) {
    if (needsConfig) {
      sub->add_option("--config", opt.configPath, "experiment config (JSON)")
          ->required();
    }
    seedOpt = sub->add_option("--seed", opt.seed, "master seed override");
    sub->add_option("--out", opt.outDir, "output directory");
    sub->add_option("--parallel", opt.parallel,
                    "worker threads (0 = hardware)");
  };

  CLI::App* run = app.add_subcommand("run", "single trajectory with records");
  addCommon(run, true);
  stepsOpt = run->add_option("--steps", opt.steps, "step count override");

  CLI::App* mc = app.add_subcommand("montecarlo", "independent replications");
  addCommon(mc, true);
  stepsOpt = mc->add_option("--steps", opt.steps, "step count override");
  repsOpt = mc->add_option("--reps", opt.reps, "replication count override");

  CLI::App* asym =
      app.add_subcommand("asymptotics", "drift and limit covariances");
  addCommon(asym, true);

  CLI::App* norm =
      app.add_subcommand("normality", "scaled-error KS study");
  addCommon(norm, true);
  norm->add_option("--steps", opt.steps, "step count override");
  norm->add_option("--reps", opt.reps, "replication count override");
  norm->add_flag("--fit", opt.fit,
                 "test against fitted normals instead of the theoretical "
                 "variances");

  CLI::App* eff =
      app.add_subcommand("efficiency", "averaged-iterate covariance study");
  addCommon(eff, true);
  eff->add_option("--steps", opt.steps, "step count override");
  eff->add_option("--reps", opt.reps, "replication count override");

  CLI::App* rep = app.add_subcommand(
      "replicate-paper", "builtin benchmark study end to end");
  addCommon(rep, false);

  CLI::App* val =
      app.add_subcommand("validate-config", "parse, check, and echo a config");
  val->add_option("--config", opt.configPath, "experiment config (JSON)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  // CLI11 reuses opt fields across subcommands; detect presence generically.
  auto counted = [](const CLI::App* sub, const char* name) {
    const auto* o = sub->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  CLI::App* active = app.get_subcommands().front();
  opt.hasSeed = counted(active, "--seed");
  opt.hasSteps = counted(active, "--steps");
  opt.hasReps = counted(active, "--reps");
  (void)seedOpt;
  (void)stepsOpt;
  (void)repsOpt;

  try {
    if (active == run) return cmdRun(opt);
    if (active == mc) return cmdMonteCarlo(opt);
    if (active == asym) return cmdAsymptotics(opt);
    if (active == norm) return cmdNormality(opt);
    if (active == eff) return cmdEfficiency(opt);
    if (active == rep) return cmdReplicate(opt);
    if (active == val) return cmdValidate(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.path << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
