#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pdsa/engine.hpp"
#include "pdsa/network.hpp"
#include "pdsa/problem.hpp"

namespace pdsa::config {

enum class RunMode { SingleRun, MonteCarlo, Normality, Efficiency };

std::string toString(RunMode mode);
RunMode runModeFromString(const std::string& name);

struct PairNoiseOverride {
  int from = 0;  // receiving agent, 0-based
  int to = 0;    // observed neighbor, 0-based
  bool primalChannel = true;
  Eigen::MatrixXd covariance;
};

// A fully parsed experiment description. Parsing validates everything a
// construction-time contract can catch and reports offending JSON paths via
// ConfigError.
struct ExperimentConfig {
  RunMode mode = RunMode::MonteCarlo;
  std::uint64_t seed = 1;
  long steps = 1000;
  long replications = 1;
  long recordEvery = 1;
  std::string outputDir;

  std::string problemBuiltin;  // "section6" or empty for an explicit problem
  std::shared_ptr<const problem::ProblemSpec> problem;
  std::shared_ptr<const network::GraphDistribution> graph;

  Eigen::MatrixXd noisePrimalCov;  // m x m
  Eigen::MatrixXd noiseDualCov;    // m x m
  engine::NoiseShape noiseShape = engine::NoiseShape::Gaussian;
  std::vector<PairNoiseOverride> pairOverrides;

  engine::StepSchedule schedule;

  engine::NoiseSpec noiseSpec() const;
  engine::Simulator makeSimulator() const;
  // Cross-field checks that need the whole config (mode-specific
  // requirements such as the normality schedule range).
  void validate() const;
};

// Parse from JSON text / load from a file. Both throw ConfigError.
ExperimentConfig parseConfig(const std::string& jsonText);
ExperimentConfig loadConfig(const std::string& path);

// Canonical serialization: fixed key order, dense matrices, resolved
// builtins kept symbolic. parse(serialize(c)) == c up to re-serialization.
std::string serializeConfig(const ExperimentConfig& cfg);

// The builtin benchmark experiment: "section6" problem, uniform single-edge
// gossip over 3 agents, N(0, 0.1 I) noise on both channels, gamma_k =
// k^-0.75, 1000 replications of 1000 steps.
ExperimentConfig benchmarkConfig();

}  // namespace pdsa::config
