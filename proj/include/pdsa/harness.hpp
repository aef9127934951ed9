#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pdsa/asymptotics.hpp"
#include "pdsa/config.hpp"
#include "pdsa/engine.hpp"
#include "pdsa/stats.hpp"

namespace pdsa::harness {

// Per-replication capture. Reduced-coordinate fields are empty unless the
// problem is unconstrained with a known optimum.
struct ReplicationSummary {
  long replication = 0;
  engine::SystemState finalState;
  double finalConsensus = 0.0;
  // Consensus error after min(10, steps) updates, for trend reporting.
  double earlyConsensus = std::numeric_limits<double>::quiet_NaN();
  double finalDistToOptimum = std::numeric_limits<double>::quiet_NaN();
  // max_i ||x_i - x*|| at the final state.
  double maxAgentError = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd scaledTheta;          // theta_K / sqrt(gamma_K)
  Eigen::VectorXd averagedTheta;        // mean of theta over the K updates
  Eigen::VectorXd scaledAveragedTheta;  // sqrt(K) * averagedTheta
};

struct MonteCarloResult {
  std::vector<ReplicationSummary> replications;  // ordered by index
  long steps = 0;
  int agents = 0;
  int dim = 0;
  bool reduced = false;  // theta fields populated

  double consensusMedianFinal = std::numeric_limits<double>::quiet_NaN();
  double consensusMedianEarly = std::numeric_limits<double>::quiet_NaN();
  double maxAgentErrorMedian = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd meanEstimates;   // agents x dim, mean of final x_i
  Eigen::MatrixXd estimateStdErr;  // agents x dim, std error of those means
};

// Runs cfg.replications independent replications of cfg.steps updates each,
// with per-replication streams derived from cfg.seed by counter. `parallel`
// worker threads (0 = hardware default); results are identical at any
// parallelism level.
MonteCarloResult runMonteCarlo(const config::ExperimentConfig& cfg,
                               int parallel = 0);

struct ComponentKs {
  int agent = 0;      // 0-based
  int component = 0;  // 0-based
  stats::KsResult ks;
  double mean = 0.0;      // fitted mean (0 in theoretical mode)
  double variance = 0.0;  // variance actually tested against
  double theoreticalVariance = 0.0;
};

struct NormalityReport {
  bool fitted = false;
  double alpha = 0.05;
  std::size_t sampleCount = 0;
  std::vector<ComponentKs> components;  // one per primal agent-component
  int passCount = 0;
  Eigen::MatrixXd empiricalCovariance;  // of theta_K / sqrt(gamma_K)
  Eigen::MatrixXd theoreticalSigma;
  double xBlockRelativeError = 0.0;  // Frobenius, on the primal block
  double empiricalXTrace = 0.0;
  double theoreticalXTrace = 0.0;
};

// KS + covariance comparison from an existing Monte-Carlo result. In fitted
// mode each component is tested against a normal with its own sample mean
// and variance (the replication protocol); otherwise against N(0, Sigma_jj).
NormalityReport normalityFromSamples(const asymptotics::AsymptoticModel& model,
                                     const MonteCarloResult& mc, bool fitted,
                                     double alpha = 0.05);

// Convenience: build the model, run Monte Carlo, test.
NormalityReport normalityStudy(const config::ExperimentConfig& cfg,
                               bool fitted, int parallel = 0,
                               double alpha = 0.05);

struct EfficiencyReport {
  std::size_t sampleCount = 0;
  Eigen::MatrixXd empiricalAveragedCovariance;  // of sqrt(K) * averaged theta
  Eigen::MatrixXd theoreticalAveraged;          // F^-1 Sigma1 F^-T
  double xBlockRelativeError = 0.0;
  // Primal-block covariance traces, empirical and theoretical.
  double averagedTraceRaw = 0.0;     // cov of averaged theta, unscaled
  double averagedTraceScaled = 0.0;  // cov of sqrt(K) * averaged theta
  double lastIterateTraceScaled = 0.0;
  double theoryLastIterateTrace = 0.0;
  double theoryAveragedTrace = 0.0;
  bool averagedBelowLastIterate = false;
};

EfficiencyReport efficiencyFromSamples(const asymptotics::AsymptoticModel& model,
                                       const MonteCarloResult& mc);
EfficiencyReport efficiencyStudy(const config::ExperimentConfig& cfg,
                                 int parallel = 0);

// The full benchmark bundle: Monte Carlo under the builtin experiment
// configuration plus both normality protocols and the model they are judged
// against.
struct PaperReplication {
  config::ExperimentConfig cfg;
  asymptotics::AsymptoticModel model;
  MonteCarloResult mc;
  NormalityReport fitted;
  NormalityReport theoretical;
};

PaperReplication replicatePaper(std::uint64_t seed = 1, int parallel = 0);

// ---- artifact serialization (deterministic; %.17g for CSV numbers) ----

std::string trajectoryCsv(const engine::Trajectory& traj, int agents, int dim);
std::string estimatesCsv(const MonteCarloResult& mc);
// One row per (replication, agent, component) with the scaled primal error.
std::string scaledSamplesCsv(const MonteCarloResult& mc);
std::string ksCsv(const std::vector<const NormalityReport*>& reports);

std::string monteCarloReportJson(const config::ExperimentConfig& cfg,
                                 const MonteCarloResult& mc);
std::string normalityReportJson(const config::ExperimentConfig& cfg,
                                const NormalityReport& report);
std::string efficiencyReportJson(const config::ExperimentConfig& cfg,
                                 const EfficiencyReport& report);
std::string runSummaryJson(const config::ExperimentConfig& cfg,
                           const engine::Trajectory& traj, int agents, int dim,
                           double runtimeSeconds);
std::string replicationReportJson(const PaperReplication& bundle);

void writeTextFile(const std::string& path, const std::string& content);
// Writes estimates.csv, samples.csv, ks.csv, and report.json under dir.
void writeReplicationArtifacts(const PaperReplication& bundle,
                               const std::string& dir);

}  // namespace pdsa::harness
