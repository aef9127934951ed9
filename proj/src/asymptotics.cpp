#include "pdsa/asymptotics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "pdsa/errors.hpp"
#include "pdsa/linalg.hpp"

namespace pdsa::asymptotics {

namespace {

constexpr double kHurwitzMargin = -1e-10;

Eigen::Map<const Eigen::MatrixXd> asMatrix(const Eigen::VectorXd& stacked,
                                           int dim, int agents) {
  return {stacked.data(), dim, agents};
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

void requireUnconstrainedWithOptimum(const problem::ProblemSpec& prob) {
  if (!prob.knownOptimum) {
    throw NoKnownOptimum("problem has no known optimum");
  }
  if (!prob.unconstrained()) {
    throw InvalidArgument(
        "asymptotic analysis requires an unconstrained problem");
  }
}

}  // namespace

Eigen::VectorXd dualOptimum(const problem::ProblemSpec& prob,
                            const network::LaplacianDecomposition& decomp) {
  requireUnconstrainedWithOptimum(prob);
  const int n = prob.agentCount();
  const int m = prob.dim();
  if (decomp.n() != n) {
    throw InvalidArgument("decomposition size disagrees with the problem");
  }
  const Eigen::VectorXd grad = prob.stackedGradient(prob.stackedOptimum());
  // W = V1 S^-1 V1' is the pseudoinverse of Lbar restricted to 1-perp.
  const Eigen::MatrixXd w =
      decomp.V1 * decomp.eigenvalues.cwiseInverse().asDiagonal() *
      decomp.V1.transpose();
  Eigen::MatrixXd lam = -(asMatrix(grad, m, n) * w.transpose());
  return flatten(lam);
}

Eigen::MatrixXd hessianBlockDiag(const problem::ProblemSpec& prob) {
  const int n = prob.agentCount();
  const int m = prob.dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * m,
                                            static_cast<Eigen::Index>(n) * m);
  for (int i = 0; i < n; ++i) {
    const auto block = prob.costs[static_cast<std::size_t>(i)].hessianAtOptimum();
    if (!block) {
      throw InvalidArgument("cost " + std::to_string(i) +
                            " has no Hessian data at the optimum");
    }
    if (block->rows() != m || block->cols() != m ||
        !linalg::isSymmetric(*block, 1e-10)) {
      throw InvalidArgument("cost " + std::to_string(i) +
                            ": Hessian must be symmetric m x m");
    }
    h.block(static_cast<Eigen::Index>(i) * m, static_cast<Eigen::Index>(i) * m,
            m, m) = *block;
  }
  return h;
}

Eigen::MatrixXd buildF(const network::LaplacianDecomposition& decomp,
                       const Eigen::MatrixXd& hessianBlocks) {
  const int n = decomp.n();
  const Eigen::Index nm = hessianBlocks.rows();
  if (hessianBlocks.cols() != nm || nm % n != 0) {
    throw InvalidArgument("Hessian block matrix has inconsistent size");
  }
  const int m = static_cast<int>(nm / n);

  // Lemma hypothesis: the summed Hessian must be positive definite, otherwise
  // the consensus direction 1 (x) u is an undamped mode.
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < n; ++i) {
    sum += hessianBlocks.block(static_cast<Eigen::Index>(i) * m,
                               static_cast<Eigen::Index>(i) * m, m, m);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sum + sum.transpose()));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues()(0) <= 1e-10 * scale) {
    throw HessianSumNotPD("summed Hessian at the optimum is not positive definite");
  }

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  const Eigen::Index dualDim = static_cast<Eigen::Index>(n - 1) * m;
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(nm + dualDim, nm + dualDim);
  f.topLeftCorner(nm, nm) =
      -(linalg::kron(decomp.meanLaplacian, eye) + hessianBlocks);
  if (dualDim > 0) {
    const Eigen::MatrixXd v1s = decomp.V1 * decomp.eigenvalues.asDiagonal();
    f.topRightCorner(nm, dualDim) = -linalg::kron(v1s, eye);
    f.bottomLeftCorner(dualDim, nm) = linalg::kron(v1s.transpose(), eye);
  }
  return f;
}

double spectralAbscissa(const Eigen::MatrixXd& f) {
  if (f.rows() != f.cols() || f.rows() == 0) {
    throw InvalidArgument("spectral abscissa needs a nonempty square matrix");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(f, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw Error("eigensolver failed");
  return es.eigenvalues().real().maxCoeff();
}

bool isHurwitz(const Eigen::MatrixXd& f, double* abscissa) {
  const double a = spectralAbscissa(f);
  if (abscissa != nullptr) *abscissa = a;
  return a < kHurwitzMargin;
}

namespace {

Eigen::MatrixXd s1Term(const Eigen::MatrixXd& lap,
                       const Eigen::MatrixXd& meanLap,
                       const Eigen::MatrixXd& pinv,
                       const Eigen::Map<const Eigen::MatrixXd>& gradMat) {
  // ((L_r - Lbar) W (x) I) g, in matrix form.
  const Eigen::MatrixXd mr = (lap - meanLap) * pinv;
  Eigen::MatrixXd ymat = gradMat * mr.transpose();
  Eigen::VectorXd y = flatten(ymat);
  return y * y.transpose();
}

}  // namespace

Eigen::MatrixXd buildS1(const network::GraphDistribution& dist,
                        const network::LaplacianDecomposition& decomp,
                        const Eigen::VectorXd& gradAtOptimum) {
  const int n = decomp.n();
  if (gradAtOptimum.size() % n != 0) {
    throw InvalidArgument("gradient size not divisible by the agent count");
  }
  const int m = static_cast<int>(gradAtOptimum.size() / n);
  const Eigen::MatrixXd pinv =
      decomp.V1 * decomp.eigenvalues.cwiseInverse().asDiagonal() *
      decomp.V1.transpose();
  const auto gradMat = asMatrix(gradAtOptimum, m, n);

  Eigen::MatrixXd s1 =
      Eigen::MatrixXd::Zero(gradAtOptimum.size(), gradAtOptimum.size());
  for (int r = 0; r < dist.atomCount(); ++r) {
    const Eigen::MatrixXd lap =
        network::laplacian(dist.atoms()[static_cast<std::size_t>(r)]);
    s1 += dist.probabilities()[static_cast<std::size_t>(r)] *
          s1Term(lap, decomp.meanLaplacian, pinv, gradMat);
  }
  return s1;
}

Eigen::MatrixXd estimateS1(const network::GraphSource& source,
                           const network::LaplacianDecomposition& decomp,
                           const Eigen::VectorXd& gradAtOptimum, long draws,
                           Rng& rng) {
  if (draws < 1) throw InvalidArgument("draws must be >= 1");
  const int n = decomp.n();
  const int m = static_cast<int>(gradAtOptimum.size() / n);
  const Eigen::MatrixXd pinv =
      decomp.V1 * decomp.eigenvalues.cwiseInverse().asDiagonal() *
      decomp.V1.transpose();
  const auto gradMat = asMatrix(gradAtOptimum, m, n);

  Eigen::MatrixXd s1 =
      Eigen::MatrixXd::Zero(gradAtOptimum.size(), gradAtOptimum.size());
  for (long d = 0; d < draws; ++d) {
    const Eigen::MatrixXd lap = network::laplacian(source.sample(rng));
    s1 += s1Term(lap, decomp.meanLaplacian, pinv, gradMat);
  }
  return s1 / static_cast<double>(draws);
}

NoiseCovariances noiseCovariances(const problem::ProblemSpec& prob,
                                  const engine::NoiseSpec& noise,
                                  const Eigen::MatrixXd& pairSecondMoments) {
  const int n = prob.agentCount();
  const int m = prob.dim();
  if (pairSecondMoments.rows() != n || pairSecondMoments.cols() != n) {
    throw InvalidArgument("pair second moments must be n x n");
  }
  if (noise.dim() != m) {
    throw InvalidArgument("noise dimension disagrees with the problem");
  }
  const Eigen::Index nm = static_cast<Eigen::Index>(n) * m;
  NoiseCovariances out;
  out.Rv = Eigen::MatrixXd::Zero(nm, nm);
  out.Romega = Eigen::MatrixXd::Zero(nm, nm);
  out.Rzeta = Eigen::MatrixXd::Zero(nm, nm);
  for (int i = 0; i < n; ++i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * m;
    out.Rv.block(o, o, m, m) =
        prob.costs[static_cast<std::size_t>(i)].limitNoiseCovariance();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double sigma = pairSecondMoments(i, j);
      if (sigma == 0.0) continue;
      out.Romega.block(o, o, m, m) += sigma * noise.primalCov(i, j);
      out.Rzeta.block(o, o, m, m) += sigma * noise.dualCov(i, j);
    }
  }
  return out;
}

Eigen::MatrixXd buildSigma1(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
                            const Eigen::MatrixXd& romega,
                            const network::LaplacianDecomposition& decomp) {
  const Eigen::Index nm = s1.rows();
  if (s1.cols() != nm || s2.rows() != nm || s2.cols() != nm ||
      romega.rows() != nm || romega.cols() != nm) {
    throw InvalidArgument("covariance blocks must all be nm x nm");
  }
  const int n = decomp.n();
  if (nm % n != 0) throw InvalidArgument("block size not divisible by n");
  const int m = static_cast<int>(nm / n);
  const Eigen::Index dualDim = static_cast<Eigen::Index>(n - 1) * m;

  const Eigen::MatrixXd v1i =
      linalg::kron(decomp.V1, Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd sigma1 = Eigen::MatrixXd::Zero(nm + dualDim, nm + dualDim);
  sigma1.topLeftCorner(nm, nm) = s1 + s2;
  if (dualDim > 0) {
    sigma1.topRightCorner(nm, dualDim) = -romega * v1i;
    sigma1.bottomLeftCorner(dualDim, nm) = -v1i.transpose() * romega;
    sigma1.bottomRightCorner(dualDim, dualDim) =
        v1i.transpose() * romega * v1i;
  }
  if (!linalg::isSymmetric(sigma1, 1e-12)) {
    throw InvalidArgument("assembled driving covariance is not symmetric");
  }
  return 0.5 * (sigma1 + sigma1.transpose());
}

Eigen::MatrixXd solveLyapunov(const Eigen::MatrixXd& f,
                              const Eigen::MatrixXd& sigma1) {
  const Eigen::Index d = f.rows();
  if (f.cols() != d || sigma1.rows() != d || sigma1.cols() != d) {
    throw InvalidArgument("drift and covariance must be square of equal size");
  }
  double abscissa = 0.0;
  if (!isHurwitz(f, &abscissa)) {
    throw NotHurwitz("drift matrix has spectral abscissa " +
                     std::to_string(abscissa));
  }
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd a = linalg::kron(eye, f) + linalg::kron(f, eye);
  Eigen::VectorXd rhs = -flatten(sigma1);
  Eigen::VectorXd vec = a.partialPivLu().solve(rhs);
  Eigen::MatrixXd sigma = Eigen::Map<const Eigen::MatrixXd>(vec.data(), d, d);
  sigma = 0.5 * (sigma + sigma.transpose()).eval();

  const double scale = std::max(1.0, sigma1.norm());
  const double residual = (f * sigma + sigma * f.transpose() + sigma1).norm();
  if (!(residual <= 1e-8 * scale)) {
    throw Error("Lyapunov solve residual too large: " + std::to_string(residual));
  }
  return sigma;
}

Eigen::MatrixXd averagedCovariance(const Eigen::MatrixXd& f,
                                   const Eigen::MatrixXd& sigma1) {
  const Eigen::Index d = f.rows();
  if (f.cols() != d || sigma1.rows() != d || sigma1.cols() != d) {
    throw InvalidArgument("drift and covariance must be square of equal size");
  }
  double abscissa = 0.0;
  if (!isHurwitz(f, &abscissa)) {
    throw NotHurwitz("drift matrix has spectral abscissa " +
                     std::to_string(abscissa));
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(f);
  const Eigen::MatrixXd half = lu.solve(sigma1);          // F^-1 Sigma1
  Eigen::MatrixXd out = lu.solve(half.transpose()).transpose();
  return 0.5 * (out + out.transpose()).eval();
}

MomentBoundConstants momentBoundConstants(const problem::ProblemSpec& prob,
                                          const engine::NoiseSpec& noise,
                                          const network::GraphMoments& moments) {
  MomentBoundConstants out;
  const double n = static_cast<double>(prob.agentCount());
  out.c01 = moments.laplacianVariance;
  out.mu2 = noise.maxPairTrace();
  out.eta2 = moments.pairSecondMoments.maxCoeff();
  out.cv = 0.0;
  for (const auto& cost : prob.costs) {
    out.cv = std::max(out.cv, cost.noiseSecondMomentBound());
  }
  const double comm = n * n * n * out.mu2 * out.eta2;
  out.c02 = 3.0 * out.cv * n + 6.0 * comm;
  out.c03 = comm;
  return out;
}

Eigen::MatrixXd AsymptoticModel::sigmaXBlock() const {
  const Eigen::Index nm = static_cast<Eigen::Index>(agents) * dim;
  return Sigma.topLeftCorner(nm, nm);
}

Eigen::MatrixXd AsymptoticModel::sigmaAvgXBlock() const {
  const Eigen::Index nm = static_cast<Eigen::Index>(agents) * dim;
  return SigmaAvg.topLeftCorner(nm, nm);
}

AsymptoticModel buildModel(const problem::ProblemSpec& prob,
                           const network::GraphDistribution& dist,
                           const engine::NoiseSpec& noise) {
  requireUnconstrainedWithOptimum(prob);
  if (dist.agentCount() != prob.agentCount()) {
    throw InvalidArgument("problem and graph agent counts disagree");
  }

  AsymptoticModel model;
  model.agents = prob.agentCount();
  model.dim = prob.dim();
  model.moments = network::graphMoments(dist);
  model.decomposition = network::decompose(model.moments.meanLaplacian);
  model.dualOptimum = dualOptimum(prob, model.decomposition);
  model.hessian = hessianBlockDiag(prob);
  model.F = buildF(model.decomposition, model.hessian);
  if (!isHurwitz(model.F, &model.abscissa)) {
    throw NotHurwitz("drift matrix is not Hurwitz (abscissa " +
                     std::to_string(model.abscissa) + ")");
  }
  const Eigen::VectorXd grad = prob.stackedGradient(prob.stackedOptimum());
  model.S1 = buildS1(dist, model.decomposition, grad);
  model.noise = noiseCovariances(prob, noise, model.moments.pairSecondMoments);
  model.Sigma1 = buildSigma1(model.S1, model.noise.s2(), model.noise.Romega,
                             model.decomposition);
  model.Sigma = solveLyapunov(model.F, model.Sigma1);
  model.SigmaAvg = averagedCovariance(model.F, model.Sigma1);
  return model;
}

Reducer::Reducer(const problem::ProblemSpec& prob,
                 const network::LaplacianDecomposition& decomp,
                 Eigen::VectorXd dualOpt)
    : n_(prob.agentCount()),
      m_(prob.dim()),
      v1_(decomp.V1),
      v2_(decomp.v2),
      stackedOptimum_(prob.stackedOptimum()),
      dualOpt_(std::move(dualOpt)) {
  if (decomp.n() != n_) {
    throw InvalidArgument("decomposition size disagrees with the problem");
  }
  if (dualOpt_.size() != static_cast<Eigen::Index>(n_) * m_) {
    throw InvalidArgument("dual optimum must be stacked n*m");
  }
}

void Reducer::thetaInto(const engine::SystemState& state,
                        Eigen::VectorXd& out) const {
  const Eigen::Index nm = static_cast<Eigen::Index>(n_) * m_;
  if (state.x.size() != nm || state.lambda.size() != nm) {
    throw InvalidArgument("state size disagrees with the reducer");
  }
  out.resize(thetaDim());
  out.head(nm) = state.x - stackedOptimum_;
  if (n_ > 1) {
    Eigen::VectorXd dualErr = state.lambda - dualOpt_;
    auto mat = asMatrix(dualErr, m_, n_);
    Eigen::MatrixXd reduced = mat * v1_;  // (V1' (x) I) in matrix form
    out.tail(static_cast<Eigen::Index>(n_ - 1) * m_) = flatten(reduced);
  }
}

Eigen::VectorXd Reducer::theta(const engine::SystemState& state) const {
  Eigen::VectorXd out;
  thetaInto(state, out);
  return out;
}

Eigen::VectorXd Reducer::lambdaTilde2(const engine::SystemState& state) const {
  Eigen::VectorXd dualErr = state.lambda - dualOpt_;
  auto mat = asMatrix(dualErr, m_, n_);
  return mat * v2_;
}

std::vector<ReducedState> reduceTrajectory(
    const engine::Trajectory& traj, const problem::ProblemSpec& prob,
    const network::LaplacianDecomposition& decomp,
    const Eigen::VectorXd& dualOpt) {
  Reducer reducer(prob, decomp, dualOpt);
  std::vector<ReducedState> out;
  out.reserve(traj.records.size());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(reducer.thetaDim());
  for (const auto& rec : traj.records) {
    ReducedState rs;
    rs.k = rec.state.k;
    rs.theta = reducer.theta(rec.state);
    if (!(rec.gamma > 0.0)) {
      throw InvalidArgument("record is missing the producing step size");
    }
    rs.scaled = rs.theta / std::sqrt(rec.gamma);
    sum += rs.theta;
    rs.runningAverage = sum / static_cast<double>(out.size() + 1);
    rs.lambdaTilde2 = reducer.lambdaTilde2(rec.state);
    out.push_back(std::move(rs));
  }
  return out;
}

}  // namespace pdsa::asymptotics
