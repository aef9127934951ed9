#include "pdsa/stats.hpp"

#include <algorithm>
#include <cmath>

#include "pdsa/errors.hpp"

namespace pdsa::stats {

double stdNormalCdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ksCritical(std::size_t n, double alpha) {
  if (n == 0) throw InvalidArgument("ksCritical: empty sample");
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw InvalidArgument("ksCritical: alpha must lie in (0, 1)");
  }
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) /
         std::sqrt(static_cast<double>(n));
}

KsResult ksNormalTest(std::vector<double> samples, double mean,
                      double variance, double alpha) {
  if (samples.size() < 50) {
    throw TooFewSamples("KS test needs at least 50 samples, got " +
                        std::to_string(samples.size()));
  }
  if (!(variance > 0.0)) {
    throw DegenerateVariance("KS test against a zero-variance normal");
  }
  std::sort(samples.begin(), samples.end());
  const double sd = std::sqrt(variance);
  const double n = static_cast<double>(samples.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = stdNormalCdf((samples[i] - mean) / sd);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    sup = std::max(sup, std::max(cdf - lo, hi - cdf));
  }
  KsResult res;
  res.statistic = sup;
  res.critical = ksCritical(samples.size(), alpha);
  res.pass = sup < res.critical;
  res.sampleCount = samples.size();
  return res;
}

double sampleMean(const std::vector<double>& samples) {
  if (samples.empty()) throw TooFewSamples("mean of an empty sample");
  double sum = 0.0;
  for (double s : samples) sum += s;
  return sum / static_cast<double>(samples.size());
}

double sampleVariance(const std::vector<double>& samples) {
  if (samples.size() < 2) throw TooFewSamples("variance needs >= 2 samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  // Constant data has zero spread; the two-pass formula would report a
  // rounding-level positive value because the mean does not round-trip.
  if (*lo == *hi) return 0.0;
  const double mu = sampleMean(samples);
  double sq = 0.0;
  for (double s : samples) sq += (s - mu) * (s - mu);
  return sq / static_cast<double>(samples.size() - 1);
}

Eigen::VectorXd sampleMean(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) throw TooFewSamples("mean of an empty sample");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(samples.front().size());
  for (const auto& s : samples) {
    if (s.size() != sum.size()) {
      throw InvalidArgument("samples have inconsistent dimensions");
    }
    sum += s;
  }
  return sum / static_cast<double>(samples.size());
}

Eigen::MatrixXd sampleCovariance(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.size() < 2) throw TooFewSamples("covariance needs >= 2 samples");
  const Eigen::VectorXd mu = sampleMean(samples);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mu.size(), mu.size());
  for (const auto& s : samples) {
    const Eigen::VectorXd d = s - mu;
    cov.noalias() += d * d.transpose();
  }
  return cov / static_cast<double>(samples.size() - 1);
}

double median(std::vector<double> values) {
  if (values.empty()) throw TooFewSamples("median of an empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(mid),
                   values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(mid) - 1,
                   values.end());
  return 0.5 * (values[mid - 1] + hi);
}

}  // namespace pdsa::stats
