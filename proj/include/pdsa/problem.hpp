#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "pdsa/errors.hpp"
#include "pdsa/rng.hpp"

namespace pdsa::problem {

// Closed-form projection catalogue. Each member keeps the projection exact
// and cheap inside the iteration loop.
struct FullSpace {};

struct Box {
  Eigen::VectorXd lower, upper;  // elementwise lower <= upper
};

struct Ball {
  Eigen::VectorXd center;
  double radius;  // > 0
};

// {x : normal . x <= offset}, normal != 0.
struct Halfspace {
  Eigen::VectorXd normal;
  double offset;
};

// {x : A x = b}; A must have full row rank.
struct AffineSlab {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

using ConstraintSet = std::variant<FullSpace, Box, Ball, Halfspace, AffineSlab>;

// Throws InvalidArgument when the variant's parameters are malformed for the
// ambient dimension.
void validate(const ConstraintSet& set, int dim);

Eigen::VectorXd project(const ConstraintSet& set, const Eigen::VectorXd& x);
bool contains(const ConstraintSet& set, const Eigen::VectorXd& x, double tol);

// Gradient observation noise models.
//
// Additive: g = grad(x) + v with v zero-mean of fixed covariance, so the
// second moment is state-independent.
//
// Regression: the data-driven model g = u(u'x - d), d = u'x* + nu, with
// u ~ N(0, R) for R the quadratic curvature and x* its optimum. E[g] equals
// the exact gradient R(x - x*), and the conditional covariance approaches
// sigma^2 R at the optimum. Only valid on quadratic costs.
struct NoNoise {};
struct AdditiveNoise {
  Eigen::MatrixXd covariance;  // m x m PSD
};
struct RegressionNoise {
  double observationVariance;  // variance of nu, >= 0
};
using GradientNoise = std::variant<NoNoise, AdditiveNoise, RegressionNoise>;

// One agent's private cost: exact gradient oracle, optional noisy-gradient
// oracle, optional curvature data used by the asymptotic calculus.
class LocalCost {
 public:
  // Cost with gradient R(x - c): curvature R (symmetric PSD), optimum c.
  // observationVariance is the regression noise floor sigma^2 (also the
  // constant offset of the cost value).
  static LocalCost quadratic(Eigen::MatrixXd curvature, Eigen::VectorXd optimum,
                             GradientNoise noise = NoNoise{},
                             double observationVariance = 0.0);

  // Arbitrary smooth cost via callables. hessianAtOptimum and the gradient
  // Lipschitz constant are optional metadata for the asymptotic calculus.
  static LocalCost custom(int dim,
                          std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient,
                          std::function<double(const Eigen::VectorXd&)> value = nullptr,
                          std::optional<Eigen::MatrixXd> hessianAtOptimum = std::nullopt,
                          std::optional<double> gradientLipschitz = std::nullopt);

  int dim() const { return dim_; }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  bool hasValue() const;
  double value(const Eigen::VectorXd& x) const;

  bool hasNoiseModel() const;
  // Throws NoNoiseModel when constructed without one.
  Eigen::VectorXd noisyGradient(const Eigen::VectorXd& x, Rng& rng) const;

  std::optional<Eigen::MatrixXd> hessianAtOptimum() const;
  std::optional<double> gradientLipschitz() const;

  bool isQuadratic() const { return quadratic_.has_value(); }
  const Eigen::MatrixXd& curvature() const;
  const Eigen::VectorXd& optimum() const;
  double observationVariance() const;
  const GradientNoise& noiseModel() const { return noise_; }

  // R_v: covariance of the gradient noise in the limit x -> optimum.
  // Additive: the fixed covariance. Regression: sigma^2 R. None: zero.
  Eigen::MatrixXd limitNoiseCovariance() const;

  // c_v with E||g - grad||^2 <= c_v (1 + ||x||^2) for all x. For the
  // regression model the exact second moment is
  //   ||R w||^2 + tr(R) w'Rw + sigma^2 tr(R),  w = x - optimum,
  // bounded by beta ||w||^2 + sigma^2 tr(R) with beta = ||R||^2 + tr(R)||R||,
  // and ||w||^2 <= 2||x||^2 + 2||optimum||^2 gives the constant below.
  double noiseSecondMomentBound() const;

 private:
  LocalCost() = default;

  struct QuadraticData {
    Eigen::MatrixXd curvature;
    Eigen::VectorXd optimum;
    double observationVariance = 0.0;
    Eigen::MatrixXd noiseFactor;  // sqrt factor for regression draws
  };

  int dim_ = 0;
  std::optional<QuadraticData> quadratic_;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> customGradient_;
  std::function<double(const Eigen::VectorXd&)> customValue_;
  std::optional<Eigen::MatrixXd> customHessianAtOptimum_;
  std::optional<double> customLipschitz_;
  GradientNoise noise_;
  Eigen::MatrixXd additiveFactor_;
};

// Whole-network problem: one cost and one constraint set per agent, plus
// optional known optima used by validation, diagnostics, and asymptotics.
struct ProblemSpec {
  std::vector<LocalCost> costs;
  std::vector<ConstraintSet> sets;
  std::optional<Eigen::VectorXd> knownOptimum;      // consensus x*, length m
  std::optional<Eigen::VectorXd> knownDualOptimum;  // stacked, length n*m

  int agentCount() const { return static_cast<int>(costs.size()); }
  int dim() const { return costs.empty() ? 0 : costs.front().dim(); }
  bool unconstrained() const;

  // Stacked gradient of f~ at stacked state X (agent-major, n*m).
  Eigen::VectorXd stackedGradient(const Eigen::VectorXd& x) const;
  Eigen::VectorXd stackedOptimum() const;  // 1 (x) x*, throws NoKnownOptimum

  // Structural checks plus, when x* is known and the problem unconstrained,
  // stationarity sum_i grad f_i(x*) = 0 within 1e-10.
  void validate() const;
};

// Built-in benchmark "section6": three agents on R^3, quadratic costs with
// rank-2 diagonal curvatures diag(1,1,0), diag(0,1,1), diag(1,0,1) summing to
// 2I, common optimum (1,2,3), regression gradient noise with variance 0.1,
// all agents unconstrained.
ProblemSpec section6Problem();

}  // namespace pdsa::problem
