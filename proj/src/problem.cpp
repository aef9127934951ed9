#include "pdsa/problem.hpp"

#include <cmath>

#include "pdsa/linalg.hpp"

namespace pdsa::problem {

namespace {

void requireFinite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + " must be finite");
}

Eigen::VectorXd drawGaussian(Rng& rng, Eigen::Index dim) {
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.gaussian();
  return z;
}

}  // namespace

void validate(const ConstraintSet& set, int dim) {
  std::visit(
      [dim](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullSpace>) {
          (void)s;
        } else if constexpr (std::is_same_v<T, Box>) {
          if (s.lower.size() != dim || s.upper.size() != dim) {
            throw InvalidArgument("box: bound dimensions must match the space");
          }
          requireFinite(s.lower, "box bounds");
          requireFinite(s.upper, "box bounds");
          if (((s.upper - s.lower).array() < 0.0).any()) {
            throw InvalidArgument("box: lower must not exceed upper");
          }
        } else if constexpr (std::is_same_v<T, Ball>) {
          if (s.center.size() != dim) {
            throw InvalidArgument("ball: center dimension must match the space");
          }
          requireFinite(s.center, "ball center");
          if (!(s.radius > 0.0) || !std::isfinite(s.radius)) {
            throw InvalidArgument("ball: radius must be positive");
          }
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          if (s.normal.size() != dim) {
            throw InvalidArgument("halfspace: normal dimension must match the space");
          }
          requireFinite(s.normal, "halfspace normal");
          if (s.normal.norm() == 0.0) {
            throw InvalidArgument("halfspace: normal must be nonzero");
          }
          if (!std::isfinite(s.offset)) {
            throw InvalidArgument("halfspace: offset must be finite");
          }
        } else if constexpr (std::is_same_v<T, AffineSlab>) {
          if (s.A.cols() != dim || s.A.rows() == 0 || s.A.rows() > dim) {
            throw InvalidArgument("affine slab: need 1..dim rows and matching columns");
          }
          if (s.b.size() != s.A.rows()) {
            throw InvalidArgument("affine slab: right-hand side size must match rows");
          }
          Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s.A);
          if (qr.rank() != s.A.rows()) {
            throw InvalidArgument("affine slab: matrix must have full row rank");
          }
        }
      },
      set);
}

Eigen::VectorXd project(const ConstraintSet& set, const Eigen::VectorXd& x) {
  return std::visit(
      [&x](const auto& s) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullSpace>) {
          return x;
        } else if constexpr (std::is_same_v<T, Box>) {
          return x.cwiseMax(s.lower).cwiseMin(s.upper);
        } else if constexpr (std::is_same_v<T, Ball>) {
          const Eigen::VectorXd d = x - s.center;
          const double dist = d.norm();
          if (dist <= s.radius) return x;
          return s.center + (s.radius / dist) * d;
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          const double excess = s.normal.dot(x) - s.offset;
          if (excess <= 0.0) return x;
          return x - (excess / s.normal.squaredNorm()) * s.normal;
        } else {
          // Orthogonal projection onto {y : A y = b} through a QR factor of
          // A^T; one refinement pass keeps the residual at rounding level.
          const Eigen::MatrixXd at = s.A.transpose();
          const Eigen::VectorXd b = s.b;
          const Eigen::HouseholderQR<Eigen::MatrixXd> qr(at);
          const Eigen::MatrixXd thinQ =
              qr.householderQ() *
              Eigen::MatrixXd::Identity(at.rows(), at.cols());
          const Eigen::MatrixXd qrMat = qr.matrixQR();
          const Eigen::MatrixXd rt =
              Eigen::MatrixXd(qrMat.topRows(at.cols())
                                  .triangularView<Eigen::Upper>())
                  .transpose();
          const auto lower = rt.triangularView<Eigen::Lower>();
          Eigen::VectorXd p =
              x - thinQ * (thinQ.transpose() * x) + thinQ * lower.solve(b);
          p -= thinQ * lower.solve(Eigen::VectorXd(at.transpose() * p - b));
          return p;
        }
      },
      set);
}

bool contains(const ConstraintSet& set, const Eigen::VectorXd& x, double tol) {
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullSpace>) {
          return true;
        } else if constexpr (std::is_same_v<T, Box>) {
          return ((x - s.lower).array() >= -tol).all() &&
                 ((s.upper - x).array() >= -tol).all();
        } else if constexpr (std::is_same_v<T, Ball>) {
          return (x - s.center).norm() <= s.radius + tol;
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          return s.normal.dot(x) - s.offset <= tol * (1.0 + s.normal.norm());
        } else {
          return (s.A * x - s.b).cwiseAbs().maxCoeff() <=
                 tol * (1.0 + s.b.cwiseAbs().maxCoeff());
        }
      },
      set);
}

LocalCost LocalCost::quadratic(Eigen::MatrixXd curvature, Eigen::VectorXd optimum,
                               GradientNoise noise, double observationVariance) {
  if (curvature.rows() != curvature.cols() || curvature.rows() == 0) {
    throw InvalidArgument("quadratic cost: curvature must be square");
  }
  if (!linalg::isSymmetric(curvature, 1e-10)) {
    throw InvalidArgument("quadratic cost: curvature must be symmetric");
  }
  if (optimum.size() != curvature.rows()) {
    throw InvalidArgument("quadratic cost: optimum dimension mismatch");
  }
  if (observationVariance < 0.0) {
    throw InvalidArgument("quadratic cost: observation variance must be >= 0");
  }

  LocalCost c;
  c.dim_ = static_cast<int>(curvature.rows());
  QuadraticData q;
  q.curvature = std::move(curvature);
  q.optimum = std::move(optimum);
  q.observationVariance = observationVariance;
  if (std::holds_alternative<RegressionNoise>(noise)) {
    const auto& r = std::get<RegressionNoise>(noise);
    if (r.observationVariance < 0.0) {
      throw InvalidArgument("regression noise: variance must be >= 0");
    }
    q.observationVariance = r.observationVariance;
    q.noiseFactor = linalg::psdSqrt(q.curvature);
  }
  c.quadratic_ = std::move(q);
  if (std::holds_alternative<AdditiveNoise>(noise)) {
    const auto& a = std::get<AdditiveNoise>(noise);
    if (a.covariance.rows() != c.dim_ || a.covariance.cols() != c.dim_) {
      throw InvalidArgument("additive noise: covariance dimension mismatch");
    }
    c.additiveFactor_ = linalg::psdSqrt(a.covariance);
  }
  c.noise_ = std::move(noise);
  return c;
}

LocalCost LocalCost::custom(
    int dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient,
    std::function<double(const Eigen::VectorXd&)> value,
    std::optional<Eigen::MatrixXd> hessianAtOptimum,
    std::optional<double> gradientLipschitz) {
  if (dim <= 0) throw InvalidArgument("custom cost: dimension must be positive");
  if (!gradient) throw InvalidArgument("custom cost: gradient oracle required");
  if (hessianAtOptimum &&
      (hessianAtOptimum->rows() != dim || hessianAtOptimum->cols() != dim)) {
    throw InvalidArgument("custom cost: hessian dimension mismatch");
  }
  LocalCost c;
  c.dim_ = dim;
  c.customGradient_ = std::move(gradient);
  c.customValue_ = std::move(value);
  c.customHessianAtOptimum_ = std::move(hessianAtOptimum);
  c.customLipschitz_ = gradientLipschitz;
  c.noise_ = NoNoise{};
  return c;
}

Eigen::VectorXd LocalCost::gradient(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw InvalidArgument("gradient: dimension mismatch");
  if (quadratic_) return quadratic_->curvature * (x - quadratic_->optimum);
  return customGradient_(x);
}

bool LocalCost::hasValue() const {
  return quadratic_.has_value() || static_cast<bool>(customValue_);
}

double LocalCost::value(const Eigen::VectorXd& x) const {
  if (quadratic_) {
    const Eigen::VectorXd w = x - quadratic_->optimum;
    return 0.5 * w.dot(quadratic_->curvature * w) +
           0.5 * quadratic_->observationVariance;
  }
  if (!customValue_) throw InvalidArgument("cost has no value oracle");
  return customValue_(x);
}

bool LocalCost::hasNoiseModel() const {
  return !std::holds_alternative<NoNoise>(noise_);
}

Eigen::VectorXd LocalCost::noisyGradient(const Eigen::VectorXd& x, Rng& rng) const {
  if (x.size() != dim_) throw InvalidArgument("noisyGradient: dimension mismatch");
  if (std::holds_alternative<AdditiveNoise>(noise_)) {
    return gradient(x) + additiveFactor_ * drawGaussian(rng, dim_);
  }
  if (std::holds_alternative<RegressionNoise>(noise_)) {
    // u ~ N(0, R) consumes dim_ gaussians, then one more for nu.
    const Eigen::VectorXd u = quadratic_->noiseFactor * drawGaussian(rng, dim_);
    const double nu =
        std::sqrt(quadratic_->observationVariance) * rng.gaussian();
    return u * (u.dot(x - quadratic_->optimum) - nu);
  }
  throw NoNoiseModel("cost has no gradient noise model");
}

std::optional<Eigen::MatrixXd> LocalCost::hessianAtOptimum() const {
  if (quadratic_) return quadratic_->curvature;
  return customHessianAtOptimum_;
}

std::optional<double> LocalCost::gradientLipschitz() const {
  if (quadratic_) return linalg::spectralNorm(quadratic_->curvature);
  return customLipschitz_;
}

const Eigen::MatrixXd& LocalCost::curvature() const {
  if (!quadratic_) throw InvalidArgument("cost is not quadratic");
  return quadratic_->curvature;
}

const Eigen::VectorXd& LocalCost::optimum() const {
  if (!quadratic_) throw InvalidArgument("cost is not quadratic");
  return quadratic_->optimum;
}

double LocalCost::observationVariance() const {
  if (!quadratic_) throw InvalidArgument("cost is not quadratic");
  return quadratic_->observationVariance;
}

Eigen::MatrixXd LocalCost::limitNoiseCovariance() const {
  if (std::holds_alternative<AdditiveNoise>(noise_)) {
    return std::get<AdditiveNoise>(noise_).covariance;
  }
  if (std::holds_alternative<RegressionNoise>(noise_)) {
    return quadratic_->observationVariance * quadratic_->curvature;
  }
  return Eigen::MatrixXd::Zero(dim_, dim_);
}

double LocalCost::noiseSecondMomentBound() const {
  if (std::holds_alternative<AdditiveNoise>(noise_)) {
    return std::get<AdditiveNoise>(noise_).covariance.trace();
  }
  if (std::holds_alternative<RegressionNoise>(noise_)) {
    const double opNorm = linalg::spectralNorm(quadratic_->curvature);
    const double beta = opNorm * opNorm + quadratic_->curvature.trace() * opNorm;
    const double constant = 2.0 * beta * quadratic_->optimum.squaredNorm() +
                            quadratic_->observationVariance *
                                quadratic_->curvature.trace();
    return std::max(2.0 * beta, constant);
  }
  return 0.0;
}

bool ProblemSpec::unconstrained() const {
  for (const auto& s : sets) {
    if (!std::holds_alternative<FullSpace>(s)) return false;
  }
  return true;
}

Eigen::VectorXd ProblemSpec::stackedGradient(const Eigen::VectorXd& x) const {
  const int m = dim();
  const int n = agentCount();
  if (x.size() != static_cast<Eigen::Index>(n) * m) {
    throw InvalidArgument("stackedGradient: dimension mismatch");
  }
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < n; ++i) {
    g.segment(i * m, m) = costs[static_cast<std::size_t>(i)].gradient(
        x.segment(i * m, m));
  }
  return g;
}

Eigen::VectorXd ProblemSpec::stackedOptimum() const {
  if (!knownOptimum) throw NoKnownOptimum("problem has no known optimum");
  const int m = dim();
  Eigen::VectorXd x(static_cast<Eigen::Index>(agentCount()) * m);
  for (int i = 0; i < agentCount(); ++i) x.segment(i * m, m) = *knownOptimum;
  return x;
}

void ProblemSpec::validate() const {
  if (costs.empty()) throw InvalidArgument("problem: at least one agent required");
  if (sets.size() != costs.size()) {
    throw InvalidArgument("problem: one constraint set per agent required");
  }
  const int m = dim();
  for (const auto& c : costs) {
    if (c.dim() != m) throw InvalidArgument("problem: agents must share dimension");
  }
  for (const auto& s : sets) problem::validate(s, m);
  if (knownOptimum && knownOptimum->size() != m) {
    throw InvalidArgument("problem: known optimum dimension mismatch");
  }
  if (knownDualOptimum &&
      knownDualOptimum->size() != static_cast<Eigen::Index>(costs.size()) * m) {
    throw InvalidArgument("problem: known dual optimum dimension mismatch");
  }
  if (knownOptimum && unconstrained()) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
    for (const auto& c : costs) sum += c.gradient(*knownOptimum);
    if (sum.cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, knownOptimum->norm())) {
      throw InvalidArgument("problem: known optimum is not stationary");
    }
  }
}

ProblemSpec section6Problem() {
  Eigen::VectorXd xstar(3);
  xstar << 1.0, 2.0, 3.0;
  const double sigma2 = 0.1;

  auto makeAgent = [&](double d0, double d1, double d2) {
    Eigen::MatrixXd r = Eigen::Vector3d(d0, d1, d2).asDiagonal();
    return LocalCost::quadratic(r, xstar, RegressionNoise{sigma2});
  };

  ProblemSpec p;
  p.costs = {makeAgent(1, 1, 0), makeAgent(0, 1, 1), makeAgent(1, 0, 1)};
  p.sets = {FullSpace{}, FullSpace{}, FullSpace{}};
  p.knownOptimum = xstar;
  p.knownDualOptimum = Eigen::VectorXd::Zero(9);
  p.validate();
  return p;
}

}  // namespace pdsa::problem
