#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "pdsa/errors.hpp"
#include "pdsa/rng.hpp"
#include "pdsa/stats.hpp"
#include "support.hpp"

using namespace pdsa;

namespace {

// Brute-force one-sample KS statistic against N(mean, variance): the largest
// gap between the empirical step function and the model CDF, checked on both
// sides of every jump.
double bruteForceKs(std::vector<double> samples, double mean, double variance) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  const double sd = std::sqrt(variance);
  double sup = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = stats::stdNormalCdf((samples[i] - mean) / sd);
    const double above = (static_cast<double>(i) + 1.0) / n - cdf;
    const double below = cdf - static_cast<double>(i) / n;
    sup = std::max(sup, std::max(above, below));
  }
  return sup;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("standard normal cdf reference values") {
  CHECK(stats::stdNormalCdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(stats::stdNormalCdf(1.0) ==
        doctest::Approx(0.8413447460685429).epsilon(1e-10));
  CHECK(stats::stdNormalCdf(-1.0) ==
        doctest::Approx(0.15865525393145707).epsilon(1e-10));
  CHECK(stats::stdNormalCdf(1.959963984540054) ==
        doctest::Approx(0.975).epsilon(1e-9));
  CHECK(stats::stdNormalCdf(8.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(stats::stdNormalCdf(-8.0) == doctest::Approx(0.0).epsilon(1e-12));
  // Symmetry.
  for (double z : {0.3, 0.9, 2.2}) {
    CHECK(stats::stdNormalCdf(z) + stats::stdNormalCdf(-z) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("kolmogorov critical values") {
  // c(0.05) = sqrt(-ln(0.025)/2) = 1.35810...
  CHECK(stats::ksCritical(100, 0.05) ==
        doctest::Approx(1.3581015157406195 / 10.0).epsilon(1e-9));
  CHECK(stats::ksCritical(400, 0.05) ==
        doctest::Approx(1.3581015157406195 / 20.0).epsilon(1e-9));
  // c(0.01) = sqrt(-ln(0.005)/2) = 1.62762...
  CHECK(stats::ksCritical(100, 0.01) ==
        doctest::Approx(1.6276236307187293 / 10.0).epsilon(1e-9));

  // Monotone: stricter alpha and smaller samples both raise the threshold.
  CHECK(stats::ksCritical(100, 0.01) > stats::ksCritical(100, 0.05));
  CHECK(stats::ksCritical(50, 0.05) > stats::ksCritical(5000, 0.05));

  CHECK_THROWS_AS(stats::ksCritical(0, 0.05), InvalidArgument);
  CHECK_THROWS_AS(stats::ksCritical(100, 0.0), InvalidArgument);
  CHECK_THROWS_AS(stats::ksCritical(100, 1.0), InvalidArgument);
}

TEST_CASE("ks statistic equals the brute-force supremum") {
  testsupport::Rng rng(1234);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> samples(50);
    const double mean = rng.gaussian();
    const double sd = 0.5 + rng.uniform01();
    for (auto& s : samples) s = mean + sd * rng.gaussian();
    // Test against a deliberately misspecified model too.
    const double m0 = trial % 2 == 0 ? mean : mean + 0.3;
    const double v0 = sd * sd;
    auto res = stats::ksNormalTest(samples, m0, v0, 0.05);
    CHECK(res.sampleCount == 50);
    CHECK(res.statistic ==
          doctest::Approx(bruteForceKs(samples, m0, v0)).epsilon(1e-12));
    CHECK(res.critical == doctest::Approx(stats::ksCritical(50, 0.05)).epsilon(1e-12));
    CHECK(res.pass == (res.statistic <= res.critical));
  }
}

TEST_CASE("ks test calibrates on matched and mismatched samples") {
  testsupport::Rng rng(77);
  std::vector<double> gauss(10000);
  for (auto& s : gauss) s = rng.gaussian();
  auto good = stats::ksNormalTest(gauss, 0.0, 1.0, 0.05);
  CHECK(good.pass);
  CHECK(good.statistic < good.critical);

  // Uniform(0,1) against N(0,1) must be rejected decisively.
  std::vector<double> uniform(10000);
  for (auto& s : uniform) s = rng.uniform01();
  auto bad = stats::ksNormalTest(uniform, 0.0, 1.0, 0.05);
  CHECK_FALSE(bad.pass);
  CHECK(bad.statistic > 5.0 * bad.critical);

  // Wrong variance is also caught.
  auto inflated = stats::ksNormalTest(gauss, 0.0, 4.0, 0.05);
  CHECK_FALSE(inflated.pass);
}

TEST_CASE("ks test input validation") {
  std::vector<double> few(49, 0.0);
  for (std::size_t i = 0; i < few.size(); ++i) {
    few[i] = static_cast<double>(i);
  }
  CHECK_THROWS_AS(stats::ksNormalTest(few, 0.0, 1.0, 0.05), TooFewSamples);

  std::vector<double> fifty(50, 1.0);
  for (std::size_t i = 0; i < fifty.size(); ++i) {
    fifty[i] = static_cast<double>(i);
  }
  CHECK_NOTHROW(stats::ksNormalTest(fifty, 0.0, 100.0, 0.05));
  CHECK_THROWS_AS(stats::ksNormalTest(fifty, 0.0, 0.0, 0.05),
                  DegenerateVariance);
  CHECK_THROWS_AS(stats::ksNormalTest(fifty, 0.0, -1.0, 0.05),
                  DegenerateVariance);
}

TEST_CASE("scalar summaries") {
  std::vector<double> v = {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  CHECK(stats::sampleMean(v) == doctest::Approx(5.0).epsilon(1e-15));
  // Unbiased variance: sum of squared deviations 32 over n-1 = 7.
  CHECK(stats::sampleVariance(v) == doctest::Approx(32.0 / 7.0).epsilon(1e-15));

  CHECK(stats::median({3.0, 1.0, 2.0}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(stats::median({4.0, 1.0, 3.0, 2.0}) ==
        doctest::Approx(2.5).epsilon(1e-15));
  CHECK(stats::median({7.0}) == doctest::Approx(7.0).epsilon(1e-15));

  CHECK_THROWS_AS(stats::sampleMean(std::vector<double>{}), TooFewSamples);
  CHECK_THROWS_AS(stats::sampleVariance({1.0}), TooFewSamples);
  CHECK_THROWS_AS(stats::median({}), TooFewSamples);
}

TEST_CASE("vector summaries") {
  std::vector<Eigen::VectorXd> pts;
  Eigen::VectorXd a(2), b(2), c(2);
  a << 1.0, 0.0;
  b << 3.0, 2.0;
  c << 2.0, 4.0;
  pts = {a, b, c};

  const Eigen::VectorXd mean = stats::sampleMean(pts);
  CHECK(mean(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(mean(1) == doctest::Approx(2.0).epsilon(1e-15));

  // Deviations: (-1,-2), (1,0), (0,2); unbiased covariance over n-1 = 2.
  const Eigen::MatrixXd cov = stats::sampleCovariance(pts);
  CHECK(cov(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cov(1, 1) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(cov(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cov(1, 0) == doctest::Approx(1.0).epsilon(1e-14));

  // Statistical sanity on a known covariance.
  testsupport::Rng rng(9);
  Eigen::MatrixXd root(2, 2);
  root << 1.0, 0.0, 0.5, 0.8;
  const Eigen::MatrixXd target = root * root.transpose();
  std::vector<Eigen::VectorXd> draws;
  draws.reserve(20000);
  for (int i = 0; i < 20000; ++i) {
    Eigen::VectorXd z(2);
    z << rng.gaussian(), rng.gaussian();
    draws.push_back(root * z);
  }
  CHECK((stats::sampleCovariance(draws) - target).norm() <= 0.05);

  CHECK_THROWS_AS(stats::sampleCovariance({a}), TooFewSamples);
}

}  // TEST_SUITE("stats")
