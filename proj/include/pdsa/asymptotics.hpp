#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pdsa/engine.hpp"
#include "pdsa/network.hpp"
#include "pdsa/problem.hpp"

namespace pdsa::asymptotics {

// Minimal-norm stacked dual optimum: the solution of
// (Lbar (x) I_m) Lambda* = -grad(X*) with no component along the consensus
// direction, i.e. Lambda* = -((V1 S^-1 V1') (x) I_m) grad(X*). Requires an
// unconstrained problem with a known optimum.
Eigen::VectorXd dualOptimum(const problem::ProblemSpec& prob,
                            const network::LaplacianDecomposition& decomp);

// Block diagonal of the per-agent Hessians at the optimum (nm x nm).
Eigen::MatrixXd hessianBlockDiag(const problem::ProblemSpec& prob);

// Drift matrix of the reduced linearized recursion:
//   F = -[ (Lbar (x) I_m) + H   (V1 S) (x) I_m ]
//       [ -(S V1') (x) I_m      0              ]
// Throws HessianSumNotPD when sum_i H_i is not positive definite (the
// hypothesis under which F is provably Hurwitz).
Eigen::MatrixXd buildF(const network::LaplacianDecomposition& decomp,
                       const Eigen::MatrixXd& hessianBlocks);

double spectralAbscissa(const Eigen::MatrixXd& f);
// True iff the spectral abscissa is < -1e-10; the abscissa is written to
// *abscissa when given.
bool isHurwitz(const Eigen::MatrixXd& f, double* abscissa = nullptr);

// Graph-fluctuation covariance
//   S1 = sum_r p_r (M_r g)(M_r g)'  with M_r = ((L_r - Lbar) V1 S^-1 V1') (x) I_m,
// computed exactly over the finite support. g is the stacked gradient at the
// optimum.
Eigen::MatrixXd buildS1(const network::GraphDistribution& dist,
                        const network::LaplacianDecomposition& decomp,
                        const Eigen::VectorXd& gradAtOptimum);

// Monte-Carlo fallback for generator-backed graph sources; `draws` samples.
Eigen::MatrixXd estimateS1(const network::GraphSource& source,
                           const network::LaplacianDecomposition& decomp,
                           const Eigen::VectorXd& gradAtOptimum, long draws,
                           Rng& rng);

// Limit covariances of the three noise channels, each nm x nm block diagonal:
// gradient noise R_v (per-agent limit covariance), received primal noise
// R_omega with blocks sum_j sigma_ij R_omega_ij, sigma_ij = E[a_ij^2], and
// likewise R_zeta.
struct NoiseCovariances {
  Eigen::MatrixXd Rv, Romega, Rzeta;
  Eigen::MatrixXd s2() const { return Rv + Romega + Rzeta; }
};

NoiseCovariances noiseCovariances(const problem::ProblemSpec& prob,
                                  const engine::NoiseSpec& noise,
                                  const Eigen::MatrixXd& pairSecondMoments);

// Driving covariance of the reduced recursion:
//   Sigma1 = [ S1 + S2                -R_omega (V1 (x) I)            ]
//            [ -(V1' (x) I) R_omega   (V1' (x) I) R_omega (V1 (x) I) ]
Eigen::MatrixXd buildSigma1(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
                            const Eigen::MatrixXd& romega,
                            const network::LaplacianDecomposition& decomp);

// Unique symmetric solution of F S + S F' + Sigma1 = 0 (the integral
// int_0^inf e^{Ft} Sigma1 e^{F't} dt for Hurwitz F), via the vectorized
// linear system. Throws NotHurwitz.
Eigen::MatrixXd solveLyapunov(const Eigen::MatrixXd& f,
                              const Eigen::MatrixXd& sigma1);

// Covariance of the scaled running average: F^-1 Sigma1 F^-T.
Eigen::MatrixXd averagedCovariance(const Eigen::MatrixXd& f,
                                   const Eigen::MatrixXd& sigma1);

// Constants of the conditional second-moment bounds on the decomposed noise:
//   E||e1||^2 <= c01 ||Lambda + X||^2
//   E||e2||^2 <= c02 + 3 cv ||X||^2,   c02 = 3 cv n + 6 n^3 mu2 eta2
//   E||e3||^2 <= c01 ||X||^2 + c03,    c03 = n^3 mu2 eta2
// cv is the worst per-agent gradient-noise bound, mu2 the largest pair
// covariance trace, eta2 the largest pair weight second moment.
struct MomentBoundConstants {
  double c01 = 0.0, c02 = 0.0, c03 = 0.0;
  double cv = 0.0, mu2 = 0.0, eta2 = 0.0;
};

MomentBoundConstants momentBoundConstants(const problem::ProblemSpec& prob,
                                          const engine::NoiseSpec& noise,
                                          const network::GraphMoments& moments);

// Everything the normality/efficiency analysis needs, assembled once.
struct AsymptoticModel {
  network::LaplacianDecomposition decomposition;
  network::GraphMoments moments;
  Eigen::VectorXd dualOptimum;  // stacked nm
  Eigen::MatrixXd hessian;      // nm x nm block diagonal
  Eigen::MatrixXd F;
  double abscissa = 0.0;
  Eigen::MatrixXd S1;
  NoiseCovariances noise;
  Eigen::MatrixXd Sigma1;
  Eigen::MatrixXd Sigma;     // last-iterate scaled covariance
  Eigen::MatrixXd SigmaAvg;  // averaged-iterate covariance
  int agents = 0, dim = 0;

  Eigen::Index thetaDim() const { return F.rows(); }
  // Top-left nm x nm (primal-error) blocks.
  Eigen::MatrixXd sigmaXBlock() const;
  Eigen::MatrixXd sigmaAvgXBlock() const;
};

AsymptoticModel buildModel(const problem::ProblemSpec& prob,
                           const network::GraphDistribution& dist,
                           const engine::NoiseSpec& noise);

// Maps stacked states to the reduced error coordinates
// theta = col(X - X*, (V1' (x) I)(Lambda - Lambda*)).
class Reducer {
 public:
  Reducer(const problem::ProblemSpec& prob,
          const network::LaplacianDecomposition& decomp,
          Eigen::VectorXd dualOpt);

  int agents() const { return n_; }
  int dim() const { return m_; }
  Eigen::Index thetaDim() const {
    return static_cast<Eigen::Index>(2 * n_ - 1) * m_;
  }

  Eigen::VectorXd theta(const engine::SystemState& state) const;
  void thetaInto(const engine::SystemState& state, Eigen::VectorXd& out) const;
  // The untracked consensus-direction dual error (V2' (x) I)(Lambda - Lambda*);
  // reported as a diagnostic only.
  Eigen::VectorXd lambdaTilde2(const engine::SystemState& state) const;

 private:
  int n_, m_;
  Eigen::MatrixXd v1_;
  Eigen::VectorXd v2_;
  Eigen::VectorXd stackedOptimum_;
  Eigen::VectorXd dualOpt_;
};

struct ReducedState {
  long k = 0;
  Eigen::VectorXd theta;           // col(xTilde, lambdaTilde1)
  Eigen::VectorXd scaled;          // theta / sqrt(gamma of the producing step)
  Eigen::VectorXd runningAverage;  // mean of theta over the records so far
  Eigen::VectorXd lambdaTilde2;

  Eigen::VectorXd xTilde(int agents, int dim) const {
    return theta.head(static_cast<Eigen::Index>(agents) * dim);
  }
  Eigen::VectorXd lambdaTilde1(int agents, int dim) const {
    return theta.tail(static_cast<Eigen::Index>(agents - 1) * dim);
  }
};

// Running averages are taken over the records present, so they equal the
// true iterate averages when every step is recorded (recordEvery = 1).
std::vector<ReducedState> reduceTrajectory(
    const engine::Trajectory& traj, const problem::ProblemSpec& prob,
    const network::LaplacianDecomposition& decomp,
    const Eigen::VectorXd& dualOpt);

}  // namespace pdsa::asymptotics
