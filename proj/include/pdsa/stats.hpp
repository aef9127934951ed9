#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace pdsa::stats {

double stdNormalCdf(double z);

// Asymptotic one-sample Kolmogorov critical value c(alpha)/sqrt(n) with
// c(alpha) = sqrt(-ln(alpha/2)/2); c(0.05) = 1.358.
double ksCritical(std::size_t n, double alpha);

struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;
  bool pass = false;
  std::size_t sampleCount = 0;
};

// One-sample KS test of `samples` against N(mean, variance). Requires at
// least 50 samples (the asymptotic critical value is meaningless below) and
// positive variance; throws TooFewSamples / DegenerateVariance.
KsResult ksNormalTest(std::vector<double> samples, double mean,
                      double variance, double alpha);

double sampleMean(const std::vector<double>& samples);
// Unbiased (n-1 denominator); needs >= 2 samples.
double sampleVariance(const std::vector<double>& samples);

Eigen::VectorXd sampleMean(const std::vector<Eigen::VectorXd>& samples);
Eigen::MatrixXd sampleCovariance(const std::vector<Eigen::VectorXd>& samples);

double median(std::vector<double> values);

}  // namespace pdsa::stats
