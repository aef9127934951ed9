#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "pdsa/errors.hpp"
#include "pdsa/problem.hpp"
#include "pdsa/rng.hpp"
#include "support.hpp"

using namespace pdsa;
using namespace pdsa::problem;
using testsupport::randomPsd;
using testsupport::randomVector;

namespace {

// Penalized projection oracle: minimizes ||z - x||^2/2 + rho/2 max(0, a'z-b)^2
// by an exact SPD solve in the active region. The penalty bias is
// O(1/(rho |a|^2)), far below the comparison tolerance.
// Projects onto {y : a.y <= b} by solving the KKT system of the
// equality-constrained problem min ||y - x||^2 s.t. a.y = b when the
// constraint is active.  Structurally independent of the closed form.
Eigen::VectorXd halfspaceOracle(const Eigen::VectorXd& a, double b,
                                const Eigen::VectorXd& x) {
  if (a.dot(x) <= b) return x;
  const auto m = x.size();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
  kkt.topLeftCorner(m, m).setIdentity();
  kkt.topRightCorner(m, 1) = a;
  kkt.bottomLeftCorner(1, m) = a.transpose();
  Eigen::VectorXd rhs(m + 1);
  rhs.head(m) = x;
  rhs(m) = b;
  return kkt.colPivHouseholderQr().solve(rhs).head(m);
}

std::vector<ConstraintSet> sampleSets(Rng& rng, int m) {
  std::vector<ConstraintSet> sets;
  Eigen::VectorXd lo = randomVector(rng, m).array() - 1.5;
  sets.emplace_back(Box{lo, lo.array() + 3.0});
  sets.emplace_back(Ball{randomVector(rng, m), 0.5 + rng.uniform01()});
  Eigen::VectorXd normal = randomVector(rng, m);
  if (normal.norm() < 1e-6) normal.setOnes();
  sets.emplace_back(Halfspace{normal, rng.gaussian()});
  Eigen::MatrixXd a = testsupport::randomMatrix(rng, 1, m);
  sets.emplace_back(AffineSlab{a, randomVector(rng, 1)});
  sets.emplace_back(FullSpace{});
  return sets;
}

}  // namespace

TEST_SUITE_BEGIN("problem");

TEST_CASE("projection closed forms") {
  Eigen::Vector2d lower(-1, -1), upper(1, 1);
  const ConstraintSet box = Box{lower, upper};
  CHECK((project(box, Eigen::Vector2d(2, 0.5)) - Eigen::Vector2d(1, 0.5))
            .norm() == 0.0);

  const ConstraintSet ball = Ball{Eigen::Vector2d::Zero(), 1.0};
  CHECK((project(ball, Eigen::Vector2d(3, 4)) - Eigen::Vector2d(0.6, 0.8))
            .norm() < 1e-15);
  CHECK((project(ball, Eigen::Vector2d(0.3, 0.1)) -
         Eigen::Vector2d(0.3, 0.1))
            .norm() == 0.0);

  const ConstraintSet full = FullSpace{};
  const Eigen::Vector2d anything(12.0, -3.0);
  CHECK((project(full, anything) - anything).norm() == 0.0);

  const ConstraintSet half = Halfspace{Eigen::Vector2d(1, 0), 0.0};
  CHECK((project(half, Eigen::Vector2d(-2, 5)) - Eigen::Vector2d(-2, 5))
            .norm() == 0.0);
  CHECK((project(half, Eigen::Vector2d(2, 5)) - Eigen::Vector2d(0, 5)).norm() <
        1e-15);
}

TEST_CASE("halfspace projection matches a KKT-solve oracle") {
  Rng rng(61);
  for (int t = 0; t < 200; ++t) {
    const int m = 2 + static_cast<int>(rng.raw() % 4);
    Eigen::VectorXd a = randomVector(rng, m);
    if (a.norm() < 1e-6) a.setOnes();
    const double b = rng.gaussian();
    const Eigen::VectorXd x = 3.0 * randomVector(rng, m);
    const ConstraintSet set = Halfspace{a, b};
    CHECK((project(set, x) - halfspaceOracle(a, b, x)).norm() < 1e-8);
  }
}

TEST_CASE("affine slab projection lands on the subspace") {
  Rng rng(62);
  for (int t = 0; t < 100; ++t) {
    const int m = 3 + static_cast<int>(rng.raw() % 3);
    const int rows = 1 + static_cast<int>(rng.raw() % 2);
    const Eigen::MatrixXd a = testsupport::randomMatrix(rng, rows, m);
    const Eigen::VectorXd b = randomVector(rng, rows);
    const ConstraintSet set = AffineSlab{a, b};
    const Eigen::VectorXd x = 2.0 * randomVector(rng, m);
    const Eigen::VectorXd p = project(set, x);
    CHECK((a * p - b).cwiseAbs().maxCoeff() < 1e-10);
    // Displacement orthogonal to the subspace: x - p in rowspace(A).
    const Eigen::VectorXd residual =
        (x - p) - a.transpose() * (a * a.transpose())
                                      .llt()
                                      .solve(a * (x - p));
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("projection is idempotent and non-expansive") {
  Rng rng(63);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 2 + static_cast<int>(rng.raw() % 3);
    for (const auto& set : sampleSets(rng, m)) {
      for (int t = 0; t < 25; ++t) {
        const Eigen::VectorXd x = 4.0 * randomVector(rng, m);
        const Eigen::VectorXd y = 4.0 * randomVector(rng, m);
        const Eigen::VectorXd px = project(set, x);
        const Eigen::VectorXd py = project(set, y);
        CHECK((project(set, px) - px).norm() < 1e-12);
        CHECK((px - py).norm() <= (x - y).norm() + 1e-12);
        CHECK(contains(set, px, 1e-10));
      }
    }
  }
}

TEST_CASE("projection satisfies the variational inequality") {
  Rng rng(64);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + static_cast<int>(rng.raw() % 3);
    for (const auto& set : sampleSets(rng, m)) {
      for (int t = 0; t < 10; ++t) {
        const Eigen::VectorXd x = 4.0 * randomVector(rng, m);
        const Eigen::VectorXd p = project(set, x);
        for (int s = 0; s < 10; ++s) {
          // Random feasible point.
          const Eigen::VectorXd y = project(set, 4.0 * randomVector(rng, m));
          CHECK((x - p).dot(y - p) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("normal cone fixed points") {
  Rng rng(65);
  for (int t = 0; t < 200; ++t) {
    const int m = 2 + static_cast<int>(rng.raw() % 3);

    // Box: push along outward coordinate directions from a boundary point.
    Eigen::VectorXd lo = randomVector(rng, m).array() - 1.0;
    Eigen::VectorXd hi = lo.array() + 2.0;
    Eigen::VectorXd x = 0.5 * (lo + hi);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    x(0) = hi(0);
    v(0) = rng.uniform01() + 0.1;
    if (m > 1) {
      x(1) = lo(1);
      v(1) = -(rng.uniform01() + 0.1);
    }
    CHECK((project(Box{lo, hi}, x + v) - x).norm() < 1e-10);

    // Ball: outward radial direction from a sphere point.
    const Eigen::VectorXd center = randomVector(rng, m);
    const double radius = 0.5 + rng.uniform01();
    Eigen::VectorXd dir = randomVector(rng, m);
    if (dir.norm() < 1e-6) dir.setOnes();
    dir.normalize();
    const Eigen::VectorXd onSphere = center + radius * dir;
    const double push = rng.uniform01() + 0.1;
    CHECK((project(Ball{center, radius}, onSphere + push * dir) - onSphere)
              .norm() < 1e-10);

    // Halfspace: outward normal from a hyperplane point.
    Eigen::VectorXd a = randomVector(rng, m);
    if (a.norm() < 1e-6) a.setOnes();
    const double b = rng.gaussian();
    Eigen::VectorXd z = randomVector(rng, m);
    z -= ((a.dot(z) - b) / a.squaredNorm()) * a;  // now a'z = b
    CHECK((project(Halfspace{a, b}, z + push * a) - z).norm() < 1e-10);
  }
}

TEST_CASE("constraint validation rejects malformed sets") {
  Eigen::Vector2d lo(0, 0), hi(1, -1);
  CHECK_THROWS_AS(validate(ConstraintSet{Box{lo, hi}}, 2), InvalidArgument);
  CHECK_THROWS_AS(validate(ConstraintSet{Ball{Eigen::Vector2d::Zero(), 0.0}}, 2),
                  InvalidArgument);
  CHECK_THROWS_AS(
      validate(ConstraintSet{Halfspace{Eigen::Vector2d::Zero(), 1.0}}, 2),
      InvalidArgument);
  Eigen::MatrixXd rankDeficient(2, 2);
  rankDeficient << 1, 1, 1, 1;
  CHECK_THROWS_AS(
      validate(ConstraintSet{AffineSlab{rankDeficient, Eigen::Vector2d(1, 1)}},
               2),
      InvalidArgument);
  // Dimension mismatch.
  CHECK_THROWS_AS(validate(ConstraintSet{Box{lo, lo}}, 3), InvalidArgument);
}

TEST_CASE("quadratic gradients") {
  Eigen::MatrixXd r(2, 2);
  r << 2, 0.5, 0.5, 1;
  Eigen::Vector2d c(1, -1);
  const LocalCost cost = LocalCost::quadratic(r, c);
  CHECK(cost.gradient(c).norm() == 0.0);
  CHECK(cost.isQuadratic());
  CHECK_FALSE(cost.hasNoiseModel());

  const LocalCost identity =
      LocalCost::quadratic(Eigen::MatrixXd::Identity(2, 2),
                           Eigen::Vector2d::Zero());
  CHECK((identity.gradient(Eigen::Vector2d(1, 2)) - Eigen::Vector2d(1, 2))
            .norm() == 0.0);
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(71);
  const double h = 1e-6;

  auto finiteDiff = [&](const LocalCost& cost, const Eigen::VectorXd& x) {
    Eigen::VectorXd fd(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::VectorXd plus = x, minus = x;
      plus(i) += h;
      minus(i) -= h;
      fd(i) = (cost.value(plus) - cost.value(minus)) / (2.0 * h);
    }
    return fd;
  };

  for (int t = 0; t < 20; ++t) {
    const int m = 2 + static_cast<int>(rng.raw() % 3);
    const LocalCost quad = LocalCost::quadratic(
        testsupport::randomPd(rng, m), randomVector(rng, m));
    const Eigen::VectorXd x = 2.0 * randomVector(rng, m);
    const Eigen::VectorXd g = quad.gradient(x);
    CHECK((finiteDiff(quad, x) - g).norm() <=
          1e-5 * std::max(1.0, g.norm()));
  }

  // Smooth non-quadratic cost via callables: f(x) = log(1 + |x|^2).
  const int m = 3;
  const LocalCost custom = LocalCost::custom(
      m,
      [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd(2.0 * x / (1.0 + x.squaredNorm()));
      },
      [](const Eigen::VectorXd& x) {
        return std::log(1.0 + x.squaredNorm());
      });
  CHECK_FALSE(custom.isQuadratic());
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd x = randomVector(rng, m);
    const Eigen::VectorXd g = custom.gradient(x);
    CHECK((finiteDiff(custom, x) - g).norm() <=
          1e-5 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("additive noise model") {
  Rng rng(72);
  const int m = 2;
  const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(m, m);
  const Eigen::VectorXd c = Eigen::VectorXd::Zero(m);

  const LocalCost silent = LocalCost::quadratic(
      r, c, AdditiveNoise{Eigen::MatrixXd::Zero(m, m)});
  const Eigen::VectorXd x = randomVector(rng, m);
  CHECK((silent.noisyGradient(x, rng) - silent.gradient(x)).norm() == 0.0);
  CHECK(silent.limitNoiseCovariance().isZero(0.0));

  Eigen::MatrixXd cov(2, 2);
  cov << 0.5, 0.2, 0.2, 0.3;
  const LocalCost noisy = LocalCost::quadratic(r, c, AdditiveNoise{cov});
  CHECK((noisy.limitNoiseCovariance() - cov).norm() == 0.0);

  const int draws = 100000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(m, m);
  for (int t = 0; t < draws; ++t) {
    const Eigen::VectorXd v = noisy.noisyGradient(x, rng) - noisy.gradient(x);
    mean += v;
    second += v * v.transpose();
  }
  mean /= draws;
  const Eigen::MatrixXd empCov =
      second / draws - mean * mean.transpose();
  CHECK(mean.cwiseAbs().maxCoeff() <
        3.0 * std::sqrt(cov.diagonal().maxCoeff() / draws));
  CHECK((empCov - cov).norm() / cov.norm() < 0.05);

  const LocalCost bare = LocalCost::quadratic(r, c);
  Rng rng2(1);
  CHECK_THROWS_AS((void)bare.noisyGradient(x, rng2), NoNoiseModel);
}

TEST_CASE("regression noise at the optimum has covariance sigma^2 R") {
  const ProblemSpec p = section6Problem();
  const Eigen::VectorXd& xstar = *p.knownOptimum;
  Rng rng(73);

  for (int agent = 0; agent < 3; ++agent) {
    const LocalCost& cost = p.costs[static_cast<std::size_t>(agent)];
    const Eigen::MatrixXd target = 0.1 * cost.curvature();
    const int draws = 100000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(3, 3);
    for (int t = 0; t < draws; ++t) {
      const Eigen::VectorXd v = cost.noisyGradient(xstar, rng);
      mean += v;
      second += v * v.transpose();
    }
    mean /= draws;
    // E[g] = R (x* - x*) = 0; per-component std-err from the target variance.
    for (int cidx = 0; cidx < 3; ++cidx) {
      const double se = std::sqrt(target(cidx, cidx) / draws);
      CHECK(std::abs(mean(cidx)) <= 3.0 * se + 1e-12);
    }
    const Eigen::MatrixXd empCov = second / draws - mean * mean.transpose();
    CHECK((empCov - target).norm() <= 0.05 * target.norm());
  }
}

TEST_CASE("regression noise second-moment bound holds empirically") {
  const ProblemSpec p = section6Problem();
  const LocalCost& cost = p.costs[0];
  const double cv = cost.noiseSecondMomentBound();
  CHECK(cv == doctest::Approx(84.2).epsilon(1e-12));

  Rng rng(74);
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::VectorXd x = 3.0 * randomVector(rng, 3);
    const double bound = cv * (1.0 + x.squaredNorm());
    const int draws = 20000;
    double sum = 0.0, sumSq = 0.0;
    for (int t = 0; t < draws; ++t) {
      const double nsq =
          (cost.noisyGradient(x, rng) - cost.gradient(x)).squaredNorm();
      sum += nsq;
      sumSq += nsq * nsq;
    }
    const double meanSq = sum / draws;
    const double se = std::sqrt(
        std::max(0.0, sumSq / draws - meanSq * meanSq) / draws);
    CHECK(meanSq <= bound + 3.0 * se);
  }
}

TEST_CASE("benchmark problem instance") {
  const ProblemSpec p = section6Problem();
  CHECK(p.agentCount() == 3);
  CHECK(p.dim() == 3);
  CHECK(p.unconstrained());
  REQUIRE(p.knownOptimum.has_value());
  CHECK((*p.knownOptimum - Eigen::Vector3d(1, 2, 3)).norm() == 0.0);
  REQUIRE(p.knownDualOptimum.has_value());
  CHECK(p.knownDualOptimum->isZero(0.0));

  const Eigen::MatrixXd r1 = p.costs[0].curvature();
  CHECK((r1 - Eigen::MatrixXd(Eigen::Vector3d(1, 1, 0).asDiagonal())).norm() ==
        0.0);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
  for (const auto& c : p.costs) sum += c.curvature();
  CHECK((sum - 2.0 * Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
  for (const auto& c : p.costs) {
    CHECK(c.observationVariance() == doctest::Approx(0.1));
    CHECK((c.limitNoiseCovariance() - 0.1 * c.curvature()).norm() == 0.0);
  }
  CHECK(p.stackedOptimum().size() == 9);
  CHECK(p.stackedGradient(p.stackedOptimum()).norm() == 0.0);
}

TEST_CASE("quadratic costs satisfy convexity and Lipschitz inequalities") {
  Rng rng(75);
  for (int t = 0; t < 20; ++t) {
    const int m = 2 + static_cast<int>(rng.raw() % 3);
    const LocalCost cost = LocalCost::quadratic(
        randomPsd(rng, m), randomVector(rng, m));
    REQUIRE(cost.hasValue());
    REQUIRE(cost.gradientLipschitz().has_value());
    const double lf = *cost.gradientLipschitz();
    for (int s = 0; s < 30; ++s) {
      const Eigen::VectorXd x = 3.0 * randomVector(rng, m);
      const Eigen::VectorXd y = 3.0 * randomVector(rng, m);
      CHECK(cost.value(y) >=
            cost.value(x) + cost.gradient(x).dot(y - x) - 1e-9);
      CHECK((cost.gradient(x) - cost.gradient(y)).norm() <=
            lf * (x - y).norm() + 1e-10);
    }
  }
}

TEST_CASE("problem spec validation") {
  ProblemSpec p;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);

  p.costs.push_back(LocalCost::quadratic(Eigen::MatrixXd::Identity(2, 2),
                                         Eigen::Vector2d::Zero()));
  CHECK_THROWS_AS(p.validate(), InvalidArgument);  // no sets

  p.sets.emplace_back(FullSpace{});
  CHECK_NOTHROW(p.validate());

  // A declared optimum must be stationary for the summed cost.
  p.knownOptimum = Eigen::Vector2d(1, 1);
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p.knownOptimum = Eigen::Vector2d::Zero();
  CHECK_NOTHROW(p.validate());

  ProblemSpec bare;
  bare.costs.push_back(LocalCost::quadratic(Eigen::MatrixXd::Identity(2, 2),
                                            Eigen::Vector2d::Zero()));
  bare.sets.emplace_back(FullSpace{});
  CHECK_THROWS_AS(bare.stackedOptimum(), NoKnownOptimum);

  // Quadratic factory rejects asymmetric or mismatched inputs.
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.0, 1;
  CHECK_THROWS_AS(
      LocalCost::quadratic(asym, Eigen::Vector2d::Zero()), InvalidArgument);
  CHECK_THROWS_AS(LocalCost::quadratic(Eigen::MatrixXd::Identity(2, 2),
                                       Eigen::Vector3d::Zero()),
                  InvalidArgument);
}

TEST_SUITE_END();
