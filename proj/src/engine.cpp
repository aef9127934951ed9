#include "pdsa/engine.hpp"

#include <cmath>
#include <string>

#include "pdsa/errors.hpp"
#include "pdsa/linalg.hpp"

namespace pdsa::engine {

namespace {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;

ConstMatMap asMatrix(const Eigen::VectorXd& stacked, int dim, int agents) {
  return {stacked.data(), dim, agents};
}

}  // namespace

double StepSchedule::at(long k) const {
  if (k < 1) throw InvalidArgument("step index must be >= 1");
  return gamma0 * std::pow(static_cast<double>(k), -nu);
}

void StepSchedule::validate() const {
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) {
    throw InvalidArgument("gamma0 must be positive and finite");
  }
  if (!(nu > 0.5) || !(nu <= 1.0)) {
    throw InvalidArgument("nu must lie in (0.5, 1]");
  }
}

NoiseSpec::Channel NoiseSpec::makeChannel(Eigen::MatrixXd cov, int dim,
                                          const char* what) {
  if (cov.rows() != dim || cov.cols() != dim) {
    throw InvalidArgument(std::string(what) + ": covariance must be " +
                          std::to_string(dim) + "x" + std::to_string(dim));
  }
  Channel ch;
  ch.factor = linalg::psdSqrt(cov);
  ch.cov = std::move(cov);
  return ch;
}

NoiseSpec::NoiseSpec(int dim, Eigen::MatrixXd primalCov,
                     Eigen::MatrixXd dualCov, NoiseShape shape)
    : dim_(dim), shape_(shape) {
  if (dim <= 0) throw InvalidArgument("noise dimension must be positive");
  primal_ = makeChannel(std::move(primalCov), dim, "primal noise");
  dual_ = makeChannel(std::move(dualCov), dim, "dual noise");
}

NoiseSpec NoiseSpec::iid(int dim, double primalVariance, double dualVariance,
                         NoiseShape shape) {
  if (primalVariance < 0.0 || dualVariance < 0.0) {
    throw InvalidArgument("noise variance must be nonnegative");
  }
  Eigen::MatrixXd p = primalVariance * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd d = dualVariance * Eigen::MatrixXd::Identity(dim, dim);
  return NoiseSpec(dim, std::move(p), std::move(d), shape);
}

void NoiseSpec::setPairPrimalCov(int i, int j, Eigen::MatrixXd cov) {
  if (i == j) throw InvalidArgument("no self-communication noise");
  pairPrimal_[{i, j}] = makeChannel(std::move(cov), dim_, "primal pair noise");
}

void NoiseSpec::setPairDualCov(int i, int j, Eigen::MatrixXd cov) {
  if (i == j) throw InvalidArgument("no self-communication noise");
  pairDual_[{i, j}] = makeChannel(std::move(cov), dim_, "dual pair noise");
}

const Eigen::MatrixXd& NoiseSpec::primalCov(int i, int j) const {
  auto it = pairPrimal_.find({i, j});
  return it == pairPrimal_.end() ? primal_.cov : it->second.cov;
}

const Eigen::MatrixXd& NoiseSpec::dualCov(int i, int j) const {
  auto it = pairDual_.find({i, j});
  return it == pairDual_.end() ? dual_.cov : it->second.cov;
}

const Eigen::MatrixXd& NoiseSpec::primalFactor(int i, int j) const {
  auto it = pairPrimal_.find({i, j});
  return it == pairPrimal_.end() ? primal_.factor : it->second.factor;
}

const Eigen::MatrixXd& NoiseSpec::dualFactor(int i, int j) const {
  auto it = pairDual_.find({i, j});
  return it == pairDual_.end() ? dual_.factor : it->second.factor;
}

double NoiseSpec::maxPairTrace() const {
  double best = std::max(primal_.cov.trace(), dual_.cov.trace());
  for (const auto& [key, ch] : pairPrimal_) best = std::max(best, ch.cov.trace());
  for (const auto& [key, ch] : pairDual_) best = std::max(best, ch.cov.trace());
  return best;
}

double NoiseSpec::drawUnit(Rng& rng) const {
  switch (shape_) {
    case NoiseShape::Gaussian:
      return rng.gaussian();
    case NoiseShape::Uniform:
      return rng.uniformUnit();
    case NoiseShape::Rademacher:
      return rng.rademacher();
  }
  throw Error("unreachable noise shape");
}

SystemState SystemState::zero(int agents, int dim) {
  if (agents <= 0 || dim <= 0) {
    throw InvalidArgument("agents and dim must be positive");
  }
  SystemState s;
  s.k = 1;
  s.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(agents) * dim);
  s.lambda = s.x;
  return s;
}

double consensusError(const Eigen::VectorXd& stackedX, int agents, int dim) {
  if (stackedX.size() != static_cast<Eigen::Index>(agents) * dim) {
    throw InvalidArgument("stacked vector has wrong length");
  }
  auto x = asMatrix(stackedX, dim, agents);
  double worst = 0.0;
  for (int i = 0; i < agents; ++i) {
    for (int j = i + 1; j < agents; ++j) {
      worst = std::max(worst, (x.col(i) - x.col(j)).norm());
    }
  }
  return worst;
}

double distToOptimum(const Eigen::VectorXd& stackedX,
                     const Eigen::VectorXd& optimum, int agents, int dim) {
  if (stackedX.size() != static_cast<Eigen::Index>(agents) * dim) {
    throw InvalidArgument("stacked vector has wrong length");
  }
  if (optimum.size() == stackedX.size()) {
    return (stackedX - optimum).norm();
  }
  if (optimum.size() != dim) {
    throw InvalidArgument("optimum must have length dim or agents*dim");
  }
  auto x = asMatrix(stackedX, dim, agents);
  double sq = 0.0;
  for (int i = 0; i < agents; ++i) sq += (x.col(i) - optimum).squaredNorm();
  return std::sqrt(sq);
}

NoiseTerms decomposeNoise(const Eigen::MatrixXd& meanLaplacian,
                          const Eigen::MatrixXd& sampledLaplacian,
                          const SystemState& state,
                          const Eigen::VectorXd& commPrimal,
                          const Eigen::VectorXd& commDual,
                          const Eigen::VectorXd& gradientNoise) {
  const Eigen::Index nm = state.x.size();
  const int n = static_cast<int>(meanLaplacian.rows());
  if (nm % n != 0) throw InvalidArgument("state size not divisible by n");
  const int m = static_cast<int>(nm / n);
  if (sampledLaplacian.rows() != n || sampledLaplacian.cols() != n ||
      meanLaplacian.cols() != n) {
    throw InvalidArgument("Laplacian dimensions disagree with the state");
  }
  if (commPrimal.size() != nm || commDual.size() != nm ||
      gradientNoise.size() != nm || state.lambda.size() != nm) {
    throw InvalidArgument("noise vectors must be stacked n*m");
  }

  const Eigen::MatrixXd diff = meanLaplacian - sampledLaplacian;  // Lbar - L_k
  auto x = asMatrix(state.x, m, n);
  auto lam = asMatrix(state.lambda, m, n);

  NoiseTerms out;
  Eigen::MatrixXd e1 = (lam + x) * diff.transpose();
  Eigen::MatrixXd e3m = x * (-diff).transpose();
  out.e1 = Eigen::Map<Eigen::VectorXd>(e1.data(), nm);
  out.e2 = commDual + commPrimal - gradientNoise;
  out.e3 = Eigen::Map<Eigen::VectorXd>(e3m.data(), nm) - commPrimal;
  return out;
}

struct Simulator::Workspace {
  Eigen::MatrixXd grads, omega, zeta, lapX, lapLam, pre;
  Eigen::VectorXd unit, noise;
  Eigen::VectorXd xi, gcol;

  Workspace(int n, int m)
      : grads(m, n),
        omega(m, n),
        zeta(m, n),
        lapX(m, n),
        lapLam(m, n),
        pre(m, n),
        unit(m),
        noise(m),
        xi(m),
        gcol(m) {}
};

Simulator::Simulator(std::shared_ptr<const problem::ProblemSpec> prob,
                     std::shared_ptr<const network::GraphSource> graphs,
                     NoiseSpec noise, StepSchedule schedule)
    : problem_(std::move(prob)),
      graphs_(std::move(graphs)),
      noise_(std::move(noise)),
      schedule_(schedule) {
  if (!problem_ || !graphs_) throw InvalidArgument("null problem or graphs");
  schedule_.validate();
  problem_->validate();
  n_ = graphs_->agentCount();
  m_ = problem_->dim();
  if (problem_->agentCount() != n_) {
    throw InvalidArgument("problem and graph agent counts disagree");
  }
  if (noise_.dim() != m_) {
    throw InvalidArgument("noise dimension disagrees with the problem");
  }
  if (const auto* dist = graphs_->finiteSupport()) {
    meanLaplacian_ = network::meanLaplacian(*dist);
    atomLaplacians_.reserve(dist->atomCount());
    for (const auto& atom : dist->atoms()) {
      atomLaplacians_.push_back(network::laplacian(atom));
    }
  }
}

const Eigen::MatrixXd& Simulator::meanLaplacian() const {
  if (!meanLaplacian_) {
    throw InvalidArgument(
        "mean Laplacian unavailable: graph source has no enumerable support");
  }
  return *meanLaplacian_;
}

void Simulator::stepInto(const SystemState& state, Rng& rng, SystemState& next,
                         Workspace& ws, StepDiagnostics* diag) const {
  const int n = n_;
  const int m = m_;
  if (state.x.size() != static_cast<Eigen::Index>(n) * m ||
      state.lambda.size() != state.x.size()) {
    throw InvalidArgument("state size disagrees with the system");
  }
  const double gamma = schedule_.at(state.k);

  // Draw order is part of the reproducibility contract: graph first, then
  // gradient observations by agent, then per present edge (row-major) one
  // primal and one dual noise vector.
  const Eigen::MatrixXd* lap = nullptr;
  const Eigen::MatrixXd* weights = nullptr;
  Eigen::MatrixXd sampledLap, sampledWeights;  // storage for generator sources
  if (const auto* dist = graphs_->finiteSupport()) {
    const int idx = dist->sampleIndex(rng);
    lap = &atomLaplacians_[idx];
    weights = &dist->atoms()[static_cast<std::size_t>(idx)].weights();
  } else {
    network::AdjacencyMatrix a = graphs_->sample(rng);
    sampledWeights = a.weights();
    sampledLap = network::laplacian(a);
    lap = &sampledLap;
    weights = &sampledWeights;
  }

  auto x = asMatrix(state.x, m, n);
  auto lam = asMatrix(state.lambda, m, n);

  for (int i = 0; i < n; ++i) {
    const auto& cost = problem_->costs[static_cast<std::size_t>(i)];
    ws.xi = x.col(i);
    ws.grads.col(i) =
        cost.hasNoiseModel() ? cost.noisyGradient(ws.xi, rng) : cost.gradient(ws.xi);
  }

  ws.omega.setZero();
  ws.zeta.setZero();
  const bool overrides = noise_.hasPairOverrides();
  const Eigen::MatrixXd& pf = noise_.primalFactor(0, n > 1 ? 1 : 0);
  const Eigen::MatrixXd& df = noise_.dualFactor(0, n > 1 ? 1 : 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a = (*weights)(i, j);
      if (i == j || a <= 0.0) continue;
      for (int c = 0; c < m; ++c) ws.unit(c) = noise_.drawUnit(rng);
      ws.noise.noalias() = (overrides ? noise_.primalFactor(i, j) : pf) * ws.unit;
      ws.omega.col(i) += a * ws.noise;
      for (int c = 0; c < m; ++c) ws.unit(c) = noise_.drawUnit(rng);
      ws.noise.noalias() = (overrides ? noise_.dualFactor(i, j) : df) * ws.unit;
      ws.zeta.col(i) += a * ws.noise;
    }
  }

  ws.lapX.noalias() = x * lap->transpose();
  ws.lapLam.noalias() = lam * lap->transpose();
  ws.pre = x - gamma * (ws.grads + ws.lapLam - ws.zeta + ws.lapX - ws.omega);

  next.k = state.k + 1;
  next.x.resize(state.x.size());
  next.lambda.resize(state.x.size());
  for (int i = 0; i < n; ++i) {
    const auto& set = problem_->sets[static_cast<std::size_t>(i)];
    if (std::holds_alternative<problem::FullSpace>(set)) {
      next.x.segment(static_cast<Eigen::Index>(i) * m, m) = ws.pre.col(i);
    } else {
      next.x.segment(static_cast<Eigen::Index>(i) * m, m) =
          problem::project(set, ws.pre.col(i));
    }
  }
  MatMap(next.lambda.data(), m, n) = lam + gamma * (ws.lapX - ws.omega);

  if (diag != nullptr) {
    diag->sampledLaplacian = *lap;
    diag->commPrimal = Eigen::Map<const Eigen::VectorXd>(ws.omega.data(),
                                                         state.x.size());
    diag->commDual = Eigen::Map<const Eigen::VectorXd>(ws.zeta.data(),
                                                       state.x.size());
    Eigen::VectorXd v(state.x.size());
    for (int i = 0; i < n; ++i) {
      const auto& cost = problem_->costs[static_cast<std::size_t>(i)];
      ws.xi = x.col(i);
      v.segment(static_cast<Eigen::Index>(i) * m, m) =
          ws.grads.col(i) - cost.gradient(ws.xi);
    }
    diag->gradientNoise = std::move(v);
    diag->preProjection =
        Eigen::Map<const Eigen::VectorXd>(ws.pre.data(), state.x.size());
    diag->consensusError = engine::consensusError(next.x, n, m);
    if (problem_->knownOptimum) {
      diag->distToOptimum =
          engine::distToOptimum(next.x, *problem_->knownOptimum, n, m);
    } else {
      diag->distToOptimum = std::numeric_limits<double>::quiet_NaN();
    }
    if (meanLaplacian_) {
      NoiseTerms terms =
          decomposeNoise(*meanLaplacian_, *lap, state, diag->commPrimal,
                         diag->commDual, diag->gradientNoise);
      diag->e1 = std::move(terms.e1);
      diag->e2 = std::move(terms.e2);
      diag->e3 = std::move(terms.e3);
    } else {
      diag->e1.resize(0);
      diag->e2.resize(0);
      diag->e3.resize(0);
    }
  }
}

std::pair<SystemState, StepDiagnostics> Simulator::step(
    const SystemState& state, Rng& rng) const {
  Workspace ws(n_, m_);
  SystemState next;
  StepDiagnostics diag;
  stepInto(state, rng, next, ws, &diag);
  return {std::move(next), std::move(diag)};
}

Trajectory Simulator::run(const SystemState& init, const RunOptions& options,
                          Rng& rng, StepObserver* observer) const {
  if (options.steps < 0) throw InvalidArgument("steps must be nonnegative");
  if (options.recordEvery < 1) throw InvalidArgument("recordEvery must be >= 1");

  Trajectory traj;
  traj.steps = options.steps;
  if (options.steps == 0) return traj;
  traj.records.reserve(
      static_cast<std::size_t>(options.steps / options.recordEvery + 2));

  Workspace ws(n_, m_);
  SystemState cur = init;
  SystemState next;
  StepDiagnostics diag;
  for (long s = 1; s <= options.steps; ++s) {
    const bool record = (s % options.recordEvery == 0) || (s == options.steps);
    const double gamma = schedule_.at(cur.k);
    stepInto(cur, rng, next,  ws,
             record && options.collectDiagnostics ? &diag : nullptr);
    std::swap(cur, next);
    if (observer != nullptr) observer->onStep(cur, gamma);
    if (record) {
      TrajectoryRecord rec;
      rec.state = cur;
      rec.gamma = gamma;
      if (options.collectDiagnostics) {
        rec.diagnostics = diag;
      } else {
        rec.diagnostics.consensusError = engine::consensusError(cur.x, n_, m_);
        rec.diagnostics.distToOptimum =
            problem_->knownOptimum
                ? engine::distToOptimum(cur.x, *problem_->knownOptimum, n_, m_)
                : std::numeric_limits<double>::quiet_NaN();
      }
      traj.records.push_back(std::move(rec));
    }
  }
  return traj;
}

}  // namespace pdsa::engine
