#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "pdsa/network.hpp"
#include "pdsa/problem.hpp"
#include "pdsa/rng.hpp"

namespace pdsa::engine {

// Diminishing step sizes gamma_k = gamma0 * k^(-nu), k >= 1.
struct StepSchedule {
  double gamma0 = 1.0;
  double nu = 0.75;

  double at(long k) const;
  // nu in (0.5, 1] so the steps are square-summable but not summable.
  void validate() const;
  // Stricter range required by the normality analysis.
  bool normalityRange() const {
    return gamma0 == 1.0 && nu > 2.0 / 3.0 && nu < 1.0;
  }
};

enum class NoiseShape { Gaussian, Uniform, Rademacher };

// Communication noise model: an m x m PSD covariance per directed pair for
// each of the two channels (primal observations omega, dual observations
// zeta), with a shared default and optional per-pair overrides. Draws are
// i.i.d. zero-mean across pairs, channels, and time.
class NoiseSpec {
 public:
  NoiseSpec(int dim, Eigen::MatrixXd primalCov, Eigen::MatrixXd dualCov,
            NoiseShape shape = NoiseShape::Gaussian);
  static NoiseSpec iid(int dim, double primalVariance, double dualVariance,
                       NoiseShape shape = NoiseShape::Gaussian);
  static NoiseSpec none(int dim) { return iid(dim, 0.0, 0.0); }

  void setPairPrimalCov(int i, int j, Eigen::MatrixXd cov);
  void setPairDualCov(int i, int j, Eigen::MatrixXd cov);

  int dim() const { return dim_; }
  NoiseShape shape() const { return shape_; }
  const Eigen::MatrixXd& primalCov(int i, int j) const;
  const Eigen::MatrixXd& dualCov(int i, int j) const;
  const Eigen::MatrixXd& primalFactor(int i, int j) const;
  const Eigen::MatrixXd& dualFactor(int i, int j) const;

  // mu^2: largest trace over pairs and channels.
  double maxPairTrace() const;
  bool hasPairOverrides() const { return !pairPrimal_.empty() || !pairDual_.empty(); }

  // Zero-mean unit-variance scalar draw of the configured shape.
  double drawUnit(Rng& rng) const;

 private:
  struct Channel {
    Eigen::MatrixXd cov;
    Eigen::MatrixXd factor;
  };
  static Channel makeChannel(Eigen::MatrixXd cov, int dim, const char* what);

  int dim_;
  NoiseShape shape_;
  Channel primal_, dual_;
  std::map<std::pair<int, int>, Channel> pairPrimal_, pairDual_;
};

// Stacked system state. x and lambda hold the agents' m-vectors end to end
// (agent i occupies [i*m, (i+1)*m)). k is the index of the next update, so a
// fresh state has k=1 and a run of K steps ends at k=K+1.
struct SystemState {
  long k = 1;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;

  static SystemState zero(int agents, int dim);
};

double consensusError(const Eigen::VectorXd& stackedX, int agents, int dim);
double distToOptimum(const Eigen::VectorXd& stackedX,
                     const Eigen::VectorXd& optimum, int agents, int dim);

// Per-step byproducts. The noise vectors are the aggregated per-agent sums
// (omega_i = sum_j a_ij omega_ij, likewise zeta), gradientNoise is g - grad f,
// and preProjection is the primal update argument before the projections.
// e1/e2/e3 are filled only when the simulator knows the mean Laplacian.
struct StepDiagnostics {
  Eigen::MatrixXd sampledLaplacian;
  Eigen::VectorXd commPrimal;
  Eigen::VectorXd commDual;
  Eigen::VectorXd gradientNoise;
  Eigen::VectorXd preProjection;
  Eigen::VectorXd e1, e2, e3;
  double consensusError = 0.0;
  double distToOptimum = std::numeric_limits<double>::quiet_NaN();
};

struct NoiseTerms {
  Eigen::VectorXd e1, e2, e3;
};

// Error decomposition of one step:
//   e1 = ((Lbar - L_k) (x) I)(Lambda + X)
//   e2 = zeta + omega - v
//   e3 = ((L_k - Lbar) (x) I) X - omega
// Substituting them into the mean-Laplacian form of the update reproduces the
// sampled-Laplacian form exactly.
NoiseTerms decomposeNoise(const Eigen::MatrixXd& meanLaplacian,
                          const Eigen::MatrixXd& sampledLaplacian,
                          const SystemState& state,
                          const Eigen::VectorXd& commPrimal,
                          const Eigen::VectorXd& commDual,
                          const Eigen::VectorXd& gradientNoise);

struct TrajectoryRecord {
  SystemState state;      // state after the recorded step
  double gamma = 0.0;     // step size used by that step
  StepDiagnostics diagnostics;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  long steps = 0;
};

// Observer invoked after every step (not only recorded ones); used for
// running-average accumulation without storing trajectories.
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void onStep(const SystemState& next, double gamma) = 0;
};

struct RunOptions {
  long steps = 1;
  long recordEvery = 1;
  // Diagnostics (noise decomposition and friends) are attached to recorded
  // steps only when true; consensus/optimality scalars are always recorded.
  bool collectDiagnostics = true;
};

// One synchronous primal-dual iteration system. Immutable after
// construction; safe to share across replication threads, each with its own
// rng stream and state.
class Simulator {
 public:
  Simulator(std::shared_ptr<const problem::ProblemSpec> prob,
            std::shared_ptr<const network::GraphSource> graphs, NoiseSpec noise,
            StepSchedule schedule);

  const problem::ProblemSpec& problem() const { return *problem_; }
  const network::GraphSource& graphs() const { return *graphs_; }
  const NoiseSpec& noise() const { return noise_; }
  const StepSchedule& schedule() const { return schedule_; }
  int agentCount() const { return n_; }
  int dim() const { return m_; }

  bool hasMeanLaplacian() const { return meanLaplacian_.has_value(); }
  const Eigen::MatrixXd& meanLaplacian() const;

  SystemState initialState() const { return SystemState::zero(n_, m_); }

  // One synchronous update: samples a graph, draws noise for present edges
  // only (row-major pair order, primal before dual, gradient observations
  // first), applies the per-agent updates from the frozen k-state.
  std::pair<SystemState, StepDiagnostics> step(const SystemState& state,
                                               Rng& rng) const;

  Trajectory run(const SystemState& init, const RunOptions& options, Rng& rng,
                 StepObserver* observer = nullptr) const;

 private:
  struct Workspace;
  void stepInto(const SystemState& state, Rng& rng, SystemState& next,
                Workspace& ws, StepDiagnostics* diag) const;

  std::shared_ptr<const problem::ProblemSpec> problem_;
  std::shared_ptr<const network::GraphSource> graphs_;
  NoiseSpec noise_;
  StepSchedule schedule_;
  int n_ = 0, m_ = 0;
  std::optional<Eigen::MatrixXd> meanLaplacian_;
  std::vector<Eigen::MatrixXd> atomLaplacians_;  // cached for finite supports
};

}  // namespace pdsa::engine
