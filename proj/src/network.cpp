#include "pdsa/network.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <numeric>

namespace pdsa::network {

namespace {
constexpr double kConnectivityTol = 1e-10;

void checkSymmetric(const Eigen::MatrixXd& mean) {
  const double scale = std::max(1.0, mean.cwiseAbs().maxCoeff());
  if ((mean - mean.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument("graph distribution: mean adjacency must be symmetric");
  }
}

double spectralNormSquared(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const double s = svd.singularValues()(0);
  return s * s;
}

double secondSmallestEigenvalue(const Eigen::MatrixXd& symLaplacian) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symLaplacian);
  if (es.info() != Eigen::Success) {
    throw Error("eigensolver failed on mean Laplacian");
  }
  return symLaplacian.rows() > 1 ? es.eigenvalues()(1)
                                 : std::numeric_limits<double>::infinity();
}
}  // namespace

AdjacencyMatrix::AdjacencyMatrix(Eigen::MatrixXd weights)
    : weights_(std::move(weights)) {
  if (weights_.rows() == 0 || weights_.rows() != weights_.cols()) {
    throw InvalidArgument("adjacency matrix must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights_.cols(); ++j) {
      const double w = weights_(i, j);
      if (!std::isfinite(w) || w < 0.0) {
        throw InvalidArgument("adjacency weights must be finite and nonnegative");
      }
      if (i == j && w != 0.0) {
        throw InvalidArgument("adjacency diagonal must be zero");
      }
    }
  }
}

Eigen::MatrixXd laplacian(const AdjacencyMatrix& a) {
  Eigen::MatrixXd l = -a.weights();
  l.diagonal() = a.weights().rowwise().sum();
  return l;
}

GraphDistribution::GraphDistribution(std::vector<AdjacencyMatrix> atoms,
                                     std::vector<double> probabilities)
    : atoms_(std::move(atoms)), probs_(std::move(probabilities)) {
  if (atoms_.empty()) {
    throw InvalidArgument("graph distribution needs at least one atom");
  }
  if (probs_.size() != atoms_.size()) {
    throw InvalidArgument("graph distribution: one probability per atom required");
  }
  const int n = atoms_.front().size();
  for (const auto& a : atoms_) {
    if (a.size() != n) {
      throw InvalidArgument("graph distribution: atoms must share dimensions");
    }
  }
  double sum = 0.0;
  cumulative_.reserve(probs_.size());
  for (double p : probs_) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("graph distribution: probabilities must be positive");
    }
    sum += p;
    cumulative_.push_back(sum);
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvalidArgument("graph distribution: probabilities must sum to 1");
  }

  meanAdjacency_ = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t r = 0; r < atoms_.size(); ++r) {
    meanAdjacency_ += probs_[r] * atoms_[r].weights();
  }
  checkSymmetric(meanAdjacency_);
  // Mean-graph connectivity is part of the constructor contract; the same
  // check backs meanLaplacian().
  if (secondSmallestEigenvalue(laplacian(AdjacencyMatrix(meanAdjacency_))) <=
      kConnectivityTol) {
    throw MeanGraphDisconnected("graph distribution: mean graph is disconnected");
  }
}

int GraphDistribution::sampleIndex(Rng& rng) const {
  const double u = rng.uniform01();
  for (std::size_t r = 0; r + 1 < cumulative_.size(); ++r) {
    if (u < cumulative_[r]) return static_cast<int>(r);
  }
  return static_cast<int>(cumulative_.size() - 1);
}

AdjacencyMatrix GraphDistribution::sample(Rng& rng) const {
  return atoms_[static_cast<std::size_t>(sampleIndex(rng))];
}

Eigen::MatrixXd meanLaplacian(const GraphDistribution& dist) {
  const auto& atoms = dist.atoms();
  const auto& probs = dist.probabilities();
  Eigen::MatrixXd mean =
      Eigen::MatrixXd::Zero(dist.agentCount(), dist.agentCount());
  for (std::size_t r = 0; r < atoms.size(); ++r) {
    mean += probs[r] * laplacian(atoms[r]);
  }
  const Eigen::MatrixXd sym = 0.5 * (mean + mean.transpose());
  if (secondSmallestEigenvalue(sym) <= kConnectivityTol) {
    throw MeanGraphDisconnected("mean graph is disconnected");
  }
  return mean;
}

Eigen::MatrixXd LaplacianDecomposition::V() const {
  Eigen::MatrixXd v(n(), n());
  v.leftCols(n() - 1) = V1;
  v.col(n() - 1) = v2;
  return v;
}

LaplacianDecomposition decompose(const Eigen::MatrixXd& meanLap) {
  const Eigen::Index n = meanLap.rows();
  if (n == 0 || meanLap.cols() != n) {
    throw InvalidArgument("decompose: square matrix required");
  }
  const double scale = std::max(1.0, meanLap.cwiseAbs().maxCoeff());
  if ((meanLap.rowwise().sum()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw InvalidArgument("decompose: input rows must sum to zero (Laplacian)");
  }

  LaplacianDecomposition d;
  d.meanLaplacian = meanLap;
  d.v2 = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  if (n == 1) {
    d.V1.resize(1, 0);
    d.eigenvalues.resize(0);
    return d;
  }

  // Householder reflection mapping e0 to v2; its remaining columns are an
  // orthonormal basis of the complement of the ones vector. Deflating with it
  // pins v2 exactly instead of trusting the eigensolver to isolate it.
  Eigen::VectorXd w = -d.v2;
  w(0) += 1.0;
  w.normalize();
  const Eigen::MatrixXd h =
      Eigen::MatrixXd::Identity(n, n) - 2.0 * w * w.transpose();
  const Eigen::MatrixXd q = h.rightCols(n - 1);

  const Eigen::MatrixXd reduced = q.transpose() * meanLap * q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (reduced + reduced.transpose()));
  if (es.info() != Eigen::Success) {
    throw Error("eigensolver failed on deflated Laplacian");
  }
  d.eigenvalues = es.eigenvalues();
  d.V1 = q * es.eigenvectors();
  if (std::abs(d.kappa2()) <= kConnectivityTol) {
    throw Disconnected("decompose: Laplacian has a repeated zero eigenvalue");
  }
  return d;
}

double laplacianVariance(const GraphDistribution& dist, MatrixNorm norm) {
  const Eigen::MatrixXd mean = meanLaplacian(dist);
  double total = 0.0;
  for (std::size_t r = 0; r < dist.atoms().size(); ++r) {
    const Eigen::MatrixXd diff = laplacian(dist.atoms()[r]) - mean;
    total += dist.probabilities()[r] * (norm == MatrixNorm::Frobenius
                                            ? diff.squaredNorm()
                                            : spectralNormSquared(diff));
  }
  return total;
}

Eigen::MatrixXd pairSecondMoments(const GraphDistribution& dist) {
  const int n = dist.agentCount();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t r = 0; r < dist.atoms().size(); ++r) {
    sigma += dist.probabilities()[r] *
             dist.atoms()[r].weights().cwiseProduct(dist.atoms()[r].weights());
  }
  return sigma;
}

GraphMoments graphMoments(const GraphDistribution& dist, MatrixNorm norm) {
  GraphMoments m;
  m.meanLaplacian = meanLaplacian(dist);
  m.pairSecondMoments = pairSecondMoments(dist);
  m.laplacianVariance = laplacianVariance(dist, norm);
  m.estimated = false;
  m.sampleCount = 0;
  return m;
}

GraphMoments estimateGraphMoments(const GraphSource& source, long draws,
                                  Rng& rng, MatrixNorm norm) {
  if (draws < 2) {
    throw InvalidArgument("estimateGraphMoments: need at least 2 draws");
  }
  const int n = source.agentCount();
  std::vector<Eigen::MatrixXd> laps;
  laps.reserve(static_cast<std::size_t>(draws));
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd meanLap = Eigen::MatrixXd::Zero(n, n);
  for (long i = 0; i < draws; ++i) {
    const AdjacencyMatrix a = source.sample(rng);
    if (a.size() != n) {
      throw InvalidArgument("graph source produced mismatched dimensions");
    }
    sigma += a.weights().cwiseProduct(a.weights());
    laps.push_back(laplacian(a));
    meanLap += laps.back();
  }
  const double inv = 1.0 / static_cast<double>(draws);
  meanLap *= inv;
  sigma *= inv;

  double var = 0.0;
  for (const auto& l : laps) {
    const Eigen::MatrixXd diff = l - meanLap;
    var += (norm == MatrixNorm::Frobenius) ? diff.squaredNorm()
                                           : spectralNormSquared(diff);
  }

  GraphMoments m;
  m.meanLaplacian = std::move(meanLap);
  m.pairSecondMoments = std::move(sigma);
  m.laplacianVariance = var * inv;
  m.estimated = true;
  m.sampleCount = draws;
  return m;
}

}  // namespace pdsa::network
