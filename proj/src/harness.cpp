#include "pdsa/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <thread>

#include "pdsa/errors.hpp"
#include "pdsa/rng.hpp"

namespace pdsa::harness {

namespace {

using nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int resolveWorkers(int parallel, long replications) {
  long workers = parallel;
  if (workers <= 0) {
    workers = static_cast<long>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  return static_cast<int>(std::min<long>(workers, replications));
}

// Runs work(r) for r in [0, count) across `workers` threads; the mapping of
// replication to thread does not matter because streams are derived by
// counter and results are slotted by index.
template <typename Work>
void forEachIndex(long count, int workers, Work&& work) {
  if (workers <= 1) {
    for (long r = 0; r < count; ++r) work(r);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr firstError;
  std::mutex errorMutex;
  auto loop = [&] {
    while (true) {
      const long r = next.fetch_add(1);
      if (r >= count) return;
      try {
        work(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(errorMutex);
        if (!firstError) firstError = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(loop);
  for (auto& th : pool) th.join();
  if (firstError) std::rethrow_exception(firstError);
}

// Accumulates the running theta sum and captures the early consensus error.
class ReplicationObserver : public engine::StepObserver {
 public:
  ReplicationObserver(const asymptotics::Reducer* reducer, int agents, int dim,
                      long earlyAt)
      : reducer_(reducer), agents_(agents), dim_(dim), earlyAt_(earlyAt) {
    if (reducer_ != nullptr) {
      sum_ = Eigen::VectorXd::Zero(reducer_->thetaDim());
      tmp_.resize(reducer_->thetaDim());
    }
  }

  void onStep(const engine::SystemState& next, double gamma) override {
    if (reducer_ != nullptr) {
      reducer_->thetaInto(next, tmp_);
      sum_ += tmp_;
    }
    ++count_;
    lastGamma_ = gamma;
    if (count_ == earlyAt_) {
      earlyConsensus_ = engine::consensusError(next.x, agents_, dim_);
    }
  }

  long count() const { return count_; }
  double lastGamma() const { return lastGamma_; }
  double earlyConsensus() const { return earlyConsensus_; }
  Eigen::VectorXd averagedTheta() const {
    return sum_ / static_cast<double>(count_);
  }

 private:
  const asymptotics::Reducer* reducer_;
  int agents_, dim_;
  long earlyAt_;
  long count_ = 0;
  double lastGamma_ = std::numeric_limits<double>::quiet_NaN();
  double earlyConsensus_ = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd sum_, tmp_;
};

Eigen::MatrixXd primalBlock(const Eigen::MatrixXd& m, Eigen::Index nm) {
  return m.topLeftCorner(nm, nm);
}

double relativeFrobenius(const Eigen::MatrixXd& got,
                         const Eigen::MatrixXd& want) {
  const double scale = want.norm();
  if (scale == 0.0) return got.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (got - want).norm() / scale;
}

ordered_json configEcho(const config::ExperimentConfig& cfg) {
  return ordered_json::parse(config::serializeConfig(cfg));
}

ordered_json vectorJson(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
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

ordered_json componentsJson(const NormalityReport& report) {
  ordered_json out = ordered_json::array();
  for (const auto& c : report.components) {
    ordered_json entry;
    entry["agent"] = c.agent + 1;
    entry["component"] = c.component + 1;
    entry["statistic"] = c.ks.statistic;
    entry["critical"] = c.ks.critical;
    entry["pass"] = c.ks.pass;
    entry["mean"] = c.mean;
    entry["variance"] = c.variance;
    entry["theoreticalVariance"] = c.theoreticalVariance;
    out.push_back(std::move(entry));
  }
  return out;
}

ordered_json normalityJson(const NormalityReport& report) {
  ordered_json out;
  out["protocol"] = report.fitted ? "fitted" : "theoretical";
  out["alpha"] = report.alpha;
  out["sampleCount"] = report.sampleCount;
  out["passCount"] = report.passCount;
  out["componentCount"] = report.components.size();
  out["components"] = componentsJson(report);
  out["xBlockRelativeFrobeniusError"] = report.xBlockRelativeError;
  out["empiricalXTrace"] = report.empiricalXTrace;
  out["theoreticalXTrace"] = report.theoreticalXTrace;
  return out;
}

ordered_json efficiencyJson(const EfficiencyReport& report) {
  ordered_json out;
  out["sampleCount"] = report.sampleCount;
  out["xBlockRelativeFrobeniusError"] = report.xBlockRelativeError;
  ordered_json traces;
  traces["averagedRaw"] = report.averagedTraceRaw;
  traces["averagedScaled"] = report.averagedTraceScaled;
  traces["lastIterateScaled"] = report.lastIterateTraceScaled;
  traces["theoryLastIterate"] = report.theoryLastIterateTrace;
  traces["theoryAveraged"] = report.theoryAveragedTrace;
  out["primalTraces"] = std::move(traces);
  out["averagedBelowLastIterate"] = report.averagedBelowLastIterate;
  return out;
}

ordered_json aggregatesJson(const MonteCarloResult& mc) {
  ordered_json out;
  out["replications"] = mc.replications.size();
  out["steps"] = mc.steps;
  out["consensusMedianFinal"] = mc.consensusMedianFinal;
  out["consensusMedianEarly"] = mc.consensusMedianEarly;
  if (std::isfinite(mc.maxAgentErrorMedian)) {
    out["maxAgentErrorMedian"] = mc.maxAgentErrorMedian;
  }
  out["meanEstimates"] = matrixJson(mc.meanEstimates);
  out["estimateStdErr"] = matrixJson(mc.estimateStdErr);
  return out;
}

}  // namespace

MonteCarloResult runMonteCarlo(const config::ExperimentConfig& cfg,
                               int parallel) {
  cfg.validate();
  const engine::Simulator sim = cfg.makeSimulator();
  const int n = sim.agentCount();
  const int m = sim.dim();

  std::optional<asymptotics::Reducer> reducer;
  if (cfg.problem->knownOptimum && cfg.problem->unconstrained()) {
    const auto decomp = network::decompose(network::meanLaplacian(*cfg.graph));
    Eigen::VectorXd dualOpt =
        cfg.problem->knownDualOptimum
            ? *cfg.problem->knownDualOptimum
            : asymptotics::dualOptimum(*cfg.problem, decomp);
    reducer.emplace(*cfg.problem, decomp, std::move(dualOpt));
  }

  MonteCarloResult result;
  result.steps = cfg.steps;
  result.agents = n;
  result.dim = m;
  result.reduced = reducer.has_value();
  result.replications.resize(static_cast<std::size_t>(cfg.replications));

  engine::RunOptions options;
  options.steps = cfg.steps;
  options.recordEvery = cfg.steps;  // final record only
  options.collectDiagnostics = false;

  const long earlyAt = std::min<long>(10, cfg.steps);
  const auto* reducerPtr = reducer ? &*reducer : nullptr;

  forEachIndex(cfg.replications, resolveWorkers(parallel, cfg.replications),
               [&](long r) {
    Rng rng(deriveSeed(cfg.seed, static_cast<std::uint64_t>(r)));
    ReplicationObserver obs(reducerPtr, n, m, earlyAt);
    engine::Trajectory traj =
        sim.run(sim.initialState(), options, rng, &obs);

    ReplicationSummary& out =
        result.replications[static_cast<std::size_t>(r)];
    out.replication = r;
    out.finalState = std::move(traj.records.back().state);
    out.finalConsensus = engine::consensusError(out.finalState.x, n, m);
    out.earlyConsensus = obs.earlyConsensus();
    if (cfg.problem->knownOptimum) {
      const Eigen::VectorXd& star = *cfg.problem->knownOptimum;
      out.finalDistToOptimum =
          engine::distToOptimum(out.finalState.x, star, n, m);
      double worst = 0.0;
      for (int i = 0; i < n; ++i) {
        worst = std::max(
            worst, (out.finalState.x.segment(static_cast<Eigen::Index>(i) * m,
                                             m) -
                    star)
                       .norm());
      }
      out.maxAgentError = worst;
    }
    if (reducerPtr != nullptr) {
      out.averagedTheta = obs.averagedTheta();
      out.scaledAveragedTheta =
          std::sqrt(static_cast<double>(obs.count())) * out.averagedTheta;
      out.scaledTheta =
          reducerPtr->theta(out.finalState) / std::sqrt(obs.lastGamma());
    }
  });

  std::vector<double> consensus, early, maxErr;
  consensus.reserve(result.replications.size());
  early.reserve(result.replications.size());
  result.meanEstimates = Eigen::MatrixXd::Zero(n, m);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n, m);
  for (const auto& rep : result.replications) {
    consensus.push_back(rep.finalConsensus);
    early.push_back(rep.earlyConsensus);
    if (std::isfinite(rep.maxAgentError)) maxErr.push_back(rep.maxAgentError);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < m; ++c) {
        const double v = rep.finalState.x(static_cast<Eigen::Index>(i) * m + c);
        result.meanEstimates(i, c) += v;
        sq(i, c) += v * v;
      }
    }
  }
  const double reps = static_cast<double>(result.replications.size());
  result.meanEstimates /= reps;
  result.estimateStdErr = Eigen::MatrixXd::Zero(n, m);
  if (result.replications.size() > 1) {
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < m; ++c) {
        const double var =
            (sq(i, c) - reps * result.meanEstimates(i, c) *
                            result.meanEstimates(i, c)) /
            (reps - 1.0);
        result.estimateStdErr(i, c) = std::sqrt(std::max(var, 0.0) / reps);
      }
    }
  }
  result.consensusMedianFinal = stats::median(consensus);
  result.consensusMedianEarly = stats::median(early);
  if (!maxErr.empty()) result.maxAgentErrorMedian = stats::median(maxErr);
  return result;
}

NormalityReport normalityFromSamples(const asymptotics::AsymptoticModel& model,
                                     const MonteCarloResult& mc, bool fitted,
                                     double alpha) {
  if (!mc.reduced) {
    throw InvalidArgument(
        "normality analysis needs reduced coordinates (unconstrained problem "
        "with a known optimum)");
  }
  const Eigen::Index nm =
      static_cast<Eigen::Index>(mc.agents) * mc.dim;

  std::vector<Eigen::VectorXd> samples;
  samples.reserve(mc.replications.size());
  for (const auto& rep : mc.replications) samples.push_back(rep.scaledTheta);

  NormalityReport report;
  report.fitted = fitted;
  report.alpha = alpha;
  report.sampleCount = samples.size();
  report.empiricalCovariance = stats::sampleCovariance(samples);
  report.theoreticalSigma = model.Sigma;

  for (int i = 0; i < mc.agents; ++i) {
    for (int c = 0; c < mc.dim; ++c) {
      const Eigen::Index idx = static_cast<Eigen::Index>(i) * mc.dim + c;
      std::vector<double> xs;
      xs.reserve(samples.size());
      for (const auto& s : samples) xs.push_back(s(idx));

      ComponentKs entry;
      entry.agent = i;
      entry.component = c;
      entry.theoreticalVariance = model.Sigma(idx, idx);
      if (fitted) {
        entry.mean = stats::sampleMean(xs);
        entry.variance = stats::sampleVariance(xs);
      } else {
        entry.mean = 0.0;
        entry.variance = entry.theoreticalVariance;
      }
      entry.ks = stats::ksNormalTest(std::move(xs), entry.mean, entry.variance,
                                     alpha);
      if (entry.ks.pass) ++report.passCount;
      report.components.push_back(std::move(entry));
    }
  }

  const Eigen::MatrixXd empX = primalBlock(report.empiricalCovariance, nm);
  const Eigen::MatrixXd thX = primalBlock(model.Sigma, nm);
  report.xBlockRelativeError = relativeFrobenius(empX, thX);
  report.empiricalXTrace = empX.trace();
  report.theoreticalXTrace = thX.trace();
  return report;
}

NormalityReport normalityStudy(const config::ExperimentConfig& cfg, bool fitted,
                               int parallel, double alpha) {
  config::ExperimentConfig local = cfg;
  local.mode = config::RunMode::Normality;
  local.validate();
  const auto model =
      asymptotics::buildModel(*local.problem, *local.graph, local.noiseSpec());
  const auto mc = runMonteCarlo(local, parallel);
  return normalityFromSamples(model, mc, fitted, alpha);
}

EfficiencyReport efficiencyFromSamples(const asymptotics::AsymptoticModel& model,
                                       const MonteCarloResult& mc) {
  if (!mc.reduced) {
    throw InvalidArgument(
        "efficiency analysis needs reduced coordinates (unconstrained problem "
        "with a known optimum)");
  }
  const Eigen::Index nm =
      static_cast<Eigen::Index>(mc.agents) * mc.dim;

  std::vector<Eigen::VectorXd> scaledAvg, rawAvg, scaledLast;
  scaledAvg.reserve(mc.replications.size());
  rawAvg.reserve(mc.replications.size());
  scaledLast.reserve(mc.replications.size());
  for (const auto& rep : mc.replications) {
    scaledAvg.push_back(rep.scaledAveragedTheta);
    rawAvg.push_back(rep.averagedTheta);
    scaledLast.push_back(rep.scaledTheta);
  }

  EfficiencyReport report;
  report.sampleCount = mc.replications.size();
  report.empiricalAveragedCovariance = stats::sampleCovariance(scaledAvg);
  report.theoreticalAveraged = model.SigmaAvg;

  const Eigen::MatrixXd empAvgX =
      primalBlock(report.empiricalAveragedCovariance, nm);
  const Eigen::MatrixXd thAvgX = primalBlock(model.SigmaAvg, nm);
  report.xBlockRelativeError = relativeFrobenius(empAvgX, thAvgX);
  report.averagedTraceScaled = empAvgX.trace();
  report.averagedTraceRaw =
      primalBlock(stats::sampleCovariance(rawAvg), nm).trace();
  report.lastIterateTraceScaled =
      primalBlock(stats::sampleCovariance(scaledLast), nm).trace();
  report.theoryLastIterateTrace = primalBlock(model.Sigma, nm).trace();
  report.theoryAveragedTrace = thAvgX.trace();
  report.averagedBelowLastIterate =
      report.averagedTraceRaw < report.lastIterateTraceScaled;
  return report;
}

EfficiencyReport efficiencyStudy(const config::ExperimentConfig& cfg,
                                 int parallel) {
  config::ExperimentConfig local = cfg;
  local.mode = config::RunMode::Efficiency;
  local.validate();
  const auto model =
      asymptotics::buildModel(*local.problem, *local.graph, local.noiseSpec());
  const auto mc = runMonteCarlo(local, parallel);
  return efficiencyFromSamples(model, mc);
}

PaperReplication replicatePaper(std::uint64_t seed, int parallel) {
  PaperReplication bundle;
  bundle.cfg = config::benchmarkConfig();
  bundle.cfg.seed = seed;
  bundle.model = asymptotics::buildModel(*bundle.cfg.problem, *bundle.cfg.graph,
                                         bundle.cfg.noiseSpec());
  bundle.mc = runMonteCarlo(bundle.cfg, parallel);
  bundle.fitted = normalityFromSamples(bundle.model, bundle.mc, /*fitted=*/true);
  bundle.theoretical =
      normalityFromSamples(bundle.model, bundle.mc, /*fitted=*/false);
  return bundle;
}

std::string trajectoryCsv(const engine::Trajectory& traj, int agents,
                          int dim) {
  std::string out = "k,gamma,agent";
  for (int c = 0; c < dim; ++c) out += ",x" + std::to_string(c);
  for (int c = 0; c < dim; ++c) out += ",lambda" + std::to_string(c);
  out += ",consensus_err,dist_opt\n";
  for (const auto& rec : traj.records) {
    for (int i = 0; i < agents; ++i) {
      out += std::to_string(rec.state.k);
      out += ',';
      out += fmt(rec.gamma);
      out += ',';
      out += std::to_string(i + 1);
      for (int c = 0; c < dim; ++c) {
        out += ',';
        out += fmt(rec.state.x(static_cast<Eigen::Index>(i) * dim + c));
      }
      for (int c = 0; c < dim; ++c) {
        out += ',';
        out += fmt(rec.state.lambda(static_cast<Eigen::Index>(i) * dim + c));
      }
      out += ',';
      out += fmt(rec.diagnostics.consensusError);
      out += ',';
      out += fmt(rec.diagnostics.distToOptimum);
      out += '\n';
    }
  }
  return out;
}

std::string estimatesCsv(const MonteCarloResult& mc) {
  std::string out = "replication,agent";
  for (int c = 0; c < mc.dim; ++c) out += ",x" + std::to_string(c);
  out += "\n";
  for (const auto& rep : mc.replications) {
    for (int i = 0; i < mc.agents; ++i) {
      out += std::to_string(rep.replication + 1);
      out += ',';
      out += std::to_string(i + 1);
      for (int c = 0; c < mc.dim; ++c) {
        out += ',';
        out += fmt(rep.finalState.x(static_cast<Eigen::Index>(i) * mc.dim + c));
      }
      out += '\n';
    }
  }
  return out;
}

std::string scaledSamplesCsv(const MonteCarloResult& mc) {
  if (!mc.reduced) {
    throw InvalidArgument("scaled samples need reduced coordinates");
  }
  std::string out = "replication,agent,component,scaled_error\n";
  for (const auto& rep : mc.replications) {
    for (int i = 0; i < mc.agents; ++i) {
      for (int c = 0; c < mc.dim; ++c) {
        out += std::to_string(rep.replication + 1);
        out += ',';
        out += std::to_string(i + 1);
        out += ',';
        out += std::to_string(c + 1);
        out += ',';
        out += fmt(rep.scaledTheta(static_cast<Eigen::Index>(i) * mc.dim + c));
        out += '\n';
      }
    }
  }
  return out;
}

std::string ksCsv(const std::vector<const NormalityReport*>& reports) {
  std::string out =
      "protocol,agent,component,statistic,critical,pass,mean,variance\n";
  for (const auto* report : reports) {
    const char* name = report->fitted ? "fitted" : "theoretical";
    for (const auto& c : report->components) {
      out += name;
      out += ',';
      out += std::to_string(c.agent + 1);
      out += ',';
      out += std::to_string(c.component + 1);
      out += ',';
      out += fmt(c.ks.statistic);
      out += ',';
      out += fmt(c.ks.critical);
      out += ',';
      out += c.ks.pass ? "1" : "0";
      out += ',';
      out += fmt(c.mean);
      out += ',';
      out += fmt(c.variance);
      out += '\n';
    }
  }
  return out;
}

std::string monteCarloReportJson(const config::ExperimentConfig& cfg,
                                 const MonteCarloResult& mc) {
  ordered_json out;
  out["config"] = configEcho(cfg);
  out["aggregates"] = aggregatesJson(mc);
  return out.dump(2) + "\n";
}

std::string normalityReportJson(const config::ExperimentConfig& cfg,
                                const NormalityReport& report) {
  ordered_json out;
  out["config"] = configEcho(cfg);
  out["normality"] = normalityJson(report);
  return out.dump(2) + "\n";
}

std::string efficiencyReportJson(const config::ExperimentConfig& cfg,
                                 const EfficiencyReport& report) {
  ordered_json out;
  out["config"] = configEcho(cfg);
  out["efficiency"] = efficiencyJson(report);
  return out.dump(2) + "\n";
}

std::string runSummaryJson(const config::ExperimentConfig& cfg,
                           const engine::Trajectory& traj, int agents, int dim,
                           double runtimeSeconds) {
  if (traj.records.empty()) throw InvalidArgument("empty trajectory");
  const auto& rec = traj.records.back();
  ordered_json out;
  out["config"] = configEcho(cfg);
  ordered_json fin;
  fin["k"] = rec.state.k;
  fin["x"] = vectorJson(rec.state.x);
  fin["lambda"] = vectorJson(rec.state.lambda);
  fin["consensusError"] = engine::consensusError(rec.state.x, agents, dim);
  if (std::isfinite(rec.diagnostics.distToOptimum)) {
    fin["distToOptimum"] = rec.diagnostics.distToOptimum;
  }
  out["final"] = std::move(fin);
  out["steps"] = traj.steps;
  // Wall-clock time: the one field exempt from byte-identical reproducibility.
  out["runtimeSeconds"] = runtimeSeconds;
  return out.dump(2) + "\n";
}

std::string replicationReportJson(const PaperReplication& bundle) {
  ordered_json out;
  out["config"] = configEcho(bundle.cfg);
  out["aggregates"] = aggregatesJson(bundle.mc);
  out["normalityFitted"] = normalityJson(bundle.fitted);
  out["normalityTheoretical"] = normalityJson(bundle.theoretical);
  ordered_json model;
  model["spectralAbscissa"] = bundle.model.abscissa;
  model["sigmaXBlock"] = matrixJson(bundle.model.sigmaXBlock());
  model["sigmaAvgXBlock"] = matrixJson(bundle.model.sigmaAvgXBlock());
  out["model"] = std::move(model);
  return out.dump(2) + "\n";
}

void writeTextFile(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

void writeReplicationArtifacts(const PaperReplication& bundle,
                               const std::string& dir) {
  const std::filesystem::path base(dir);
  std::filesystem::create_directories(base);
  writeTextFile((base / "estimates.csv").string(), estimatesCsv(bundle.mc));
  writeTextFile((base / "samples.csv").string(), scaledSamplesCsv(bundle.mc));
  writeTextFile((base / "ks.csv").string(),
                ksCsv({&bundle.fitted, &bundle.theoretical}));
  writeTextFile((base / "report.json").string(),
                replicationReportJson(bundle));
}

}  // namespace pdsa::harness
