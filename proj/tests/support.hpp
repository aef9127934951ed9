#pragma once

// Shared helpers for the unit and acceptance suites: canonical small
// instances, random matrix generators, and an independent per-agent
// reference implementation of one algorithm step.

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "pdsa/engine.hpp"
#include "pdsa/network.hpp"
#include "pdsa/problem.hpp"
#include "pdsa/rng.hpp"

namespace testsupport {

using pdsa::Rng;

// Uniform pairwise gossip over `agents` nodes: one single-edge atom per
// unordered pair, equal probabilities (agents = 3 gives the benchmark graph).
inline pdsa::network::GraphDistribution gossip(int agents) {
  std::vector<pdsa::network::AdjacencyMatrix> atoms;
  for (int i = 0; i < agents; ++i) {
    for (int j = i + 1; j < agents; ++j) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(agents, agents);
      w(i, j) = 1.0;
      w(j, i) = 1.0;
      atoms.emplace_back(std::move(w));
    }
  }
  std::vector<double> probs(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
  return {std::move(atoms), std::move(probs)};
}

inline Eigen::MatrixXd randomMatrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = rng.gaussian();
  }
  return m;
}

inline Eigen::VectorXd randomVector(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.gaussian();
  return v;
}

inline Eigen::MatrixXd randomPsd(Rng& rng, int n, double scale = 1.0) {
  Eigen::MatrixXd a = randomMatrix(rng, n, n);
  return scale / static_cast<double>(n) * (a * a.transpose());
}

inline Eigen::MatrixXd randomPd(Rng& rng, int n, double scale = 1.0) {
  return randomPsd(rng, n, scale) +
         0.1 * scale * Eigen::MatrixXd::Identity(n, n);
}

// Random square matrix shifted to be strictly Hurwitz.
inline Eigen::MatrixXd randomHurwitz(Rng& rng, int n) {
  Eigen::MatrixXd a = randomMatrix(rng, n, n);
  const double abscissa = a.eigenvalues().real().maxCoeff();
  const double margin = 0.5 + rng.uniform01();
  return a - (abscissa + margin) * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Independent per-agent step: mirrors the simulator's documented draw order
// (graph atom, then per-agent gradient observations, then one primal and one
// dual noise vector per present directed edge in row-major order) but applies
// the textbook per-agent update with individual neighbor observations
//   x_ij = x_j + omega_ij, lambda_ij = lambda_j + zeta_ij,
// accumulated with scalar loops. Used as the oracle for the compact path.
inline pdsa::engine::SystemState referenceStep(
    const pdsa::problem::ProblemSpec& prob,
    const pdsa::network::GraphDistribution& dist,
    const pdsa::engine::NoiseSpec& noise,
    const pdsa::engine::StepSchedule& sched,
    const pdsa::engine::SystemState& state, Rng& rng) {
  const int n = prob.agentCount();
  const int m = prob.dim();
  const double gamma = sched.at(state.k);

  const int atom = dist.sampleIndex(rng);
  const Eigen::MatrixXd& a = dist.atoms()[static_cast<std::size_t>(atom)].weights();

  std::vector<Eigen::VectorXd> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& cost = prob.costs[static_cast<std::size_t>(i)];
    const Eigen::VectorXd xi = state.x.segment(static_cast<Eigen::Index>(i) * m, m);
    g[static_cast<std::size_t>(i)] =
        cost.hasNoiseModel() ? cost.noisyGradient(xi, rng) : cost.gradient(xi);
  }

  std::vector<std::vector<Eigen::VectorXd>> omega(
      static_cast<std::size_t>(n),
      std::vector<Eigen::VectorXd>(static_cast<std::size_t>(n)));
  auto zeta = omega;
  Eigen::VectorXd unit(m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || a(i, j) <= 0.0) continue;
      for (int c = 0; c < m; ++c) unit(c) = noise.drawUnit(rng);
      omega[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          noise.primalFactor(i, j) * unit;
      for (int c = 0; c < m; ++c) unit(c) = noise.drawUnit(rng);
      zeta[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          noise.dualFactor(i, j) * unit;
    }
  }

  pdsa::engine::SystemState next;
  next.k = state.k + 1;
  next.x.resize(state.x.size());
  next.lambda.resize(state.x.size());
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = state.x.segment(static_cast<Eigen::Index>(i) * m, m);
    const Eigen::VectorXd li =
        state.lambda.segment(static_cast<Eigen::Index>(i) * m, m);
    Eigen::VectorXd primalDrift = g[static_cast<std::size_t>(i)];
    Eigen::VectorXd dualDrift = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < n; ++j) {
      if (i == j || a(i, j) <= 0.0) continue;
      const Eigen::VectorXd xij =
          state.x.segment(static_cast<Eigen::Index>(j) * m, m) +
          omega[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const Eigen::VectorXd lij =
          state.lambda.segment(static_cast<Eigen::Index>(j) * m, m) +
          zeta[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      primalDrift += a(i, j) * (li - lij);
      primalDrift += a(i, j) * (xi - xij);
      dualDrift += a(i, j) * (xi - xij);
    }
    next.x.segment(static_cast<Eigen::Index>(i) * m, m) = pdsa::problem::project(
        prob.sets[static_cast<std::size_t>(i)], xi - gamma * primalDrift);
    next.lambda.segment(static_cast<Eigen::Index>(i) * m, m) =
        li + gamma * dualDrift;
  }
  return next;
}

// Random constrained/noisy instance for oracle comparisons: n agents on
// R^m with quadratic costs, additive gradient noise, and a mixed set
// catalogue. Returned graph is a two-atom distribution with connected mean.
struct RandomInstance {
  std::shared_ptr<const pdsa::problem::ProblemSpec> problem;
  std::shared_ptr<const pdsa::network::GraphDistribution> graph;
  pdsa::engine::NoiseSpec noise;
  pdsa::engine::StepSchedule schedule;
};

inline RandomInstance randomInstance(Rng& rng, int n, int m,
                                     bool constrained = true) {
  using namespace pdsa;
  problem::ProblemSpec spec;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd r = randomPd(rng, m);
    Eigen::VectorXd c = randomVector(rng, m);
    spec.costs.push_back(problem::LocalCost::quadratic(
        r, c, problem::AdditiveNoise{randomPsd(rng, m, 0.2)}));
    if (!constrained) {
      spec.sets.emplace_back(problem::FullSpace{});
      continue;
    }
    switch (static_cast<int>(rng.raw() % 4)) {
      case 0:
        spec.sets.emplace_back(problem::FullSpace{});
        break;
      case 1: {
        Eigen::VectorXd lo = randomVector(rng, m).array() - 2.0;
        spec.sets.emplace_back(problem::Box{lo, lo.array() + 4.0});
        break;
      }
      case 2:
        spec.sets.emplace_back(
            problem::Ball{randomVector(rng, m), 1.0 + rng.uniform01()});
        break;
      default: {
        Eigen::VectorXd normal = randomVector(rng, m);
        if (normal.norm() < 1e-6) normal.setOnes();
        spec.sets.emplace_back(problem::Halfspace{normal, rng.gaussian()});
        break;
      }
    }
  }

  // Two atoms: a random connected ring plus a random sparser graph.
  Eigen::MatrixXd ring = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    if (i == j) continue;
    const double w = 0.5 + rng.uniform01();
    ring(i, j) = w;
    ring(j, i) = w;
  }
  Eigen::MatrixXd sparse = Eigen::MatrixXd::Zero(n, n);
  if (n > 1) {
    const int i = static_cast<int>(rng.raw() % static_cast<std::uint64_t>(n));
    const int j = (i + 1 + static_cast<int>(rng.raw() %
                                            static_cast<std::uint64_t>(n - 1))) %
                  n;
    const double w = 0.5 + rng.uniform01();
    sparse(i, j) = w;
    sparse(j, i) = w;
  }
  std::vector<network::AdjacencyMatrix> atoms;
  atoms.emplace_back(std::move(ring));
  atoms.emplace_back(std::move(sparse));
  auto graph = std::make_shared<const network::GraphDistribution>(
      std::move(atoms), std::vector<double>{0.6, 0.4});

  engine::NoiseSpec noise(m, randomPsd(rng, m, 0.3), randomPsd(rng, m, 0.3));
  engine::StepSchedule sched{0.5 + rng.uniform01(), 0.6 + 0.3 * rng.uniform01()};

  RandomInstance inst{
      std::make_shared<const problem::ProblemSpec>(std::move(spec)),
      std::move(graph), std::move(noise), sched};
  return inst;
}

}  // namespace testsupport
