#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "pdsa/errors.hpp"
#include "pdsa/rng.hpp"

namespace pdsa::network {

// Weighted directed communication graph. a(i,j) > 0 means agent i receives
// from agent j. Diagonal must be exactly zero, entries nonnegative and finite.
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(Eigen::MatrixXd weights);

  int size() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double operator()(int i, int j) const { return weights_(i, j); }

 private:
  Eigen::MatrixXd weights_;
};

// Graph Laplacian L = D - A with D the diagonal of row sums. Every row of L
// sums to zero by construction: L(i,i) is assigned the same accumulation that
// a row-sum of A produces.
Eigen::MatrixXd laplacian(const AdjacencyMatrix& a);

class GraphDistribution;

// A source of i.i.d. graph samples. Finite-support distributions are the
// primary implementation; a seeded-callback adapter covers simulation-only
// runs whose support cannot be enumerated.
class GraphSource {
 public:
  virtual ~GraphSource() = default;
  virtual int agentCount() const = 0;
  virtual AdjacencyMatrix sample(Rng& rng) const = 0;
  // Non-null when the source is backed by an enumerable distribution.
  virtual const GraphDistribution* finiteSupport() const { return nullptr; }
};

// Finite-support distribution over adjacency matrices: atoms A_r with
// probabilities p_r (positive, summing to 1 within 1e-12). The mean adjacency
// must be symmetric and its graph connected.
class GraphDistribution : public GraphSource {
 public:
  GraphDistribution(std::vector<AdjacencyMatrix> atoms,
                    std::vector<double> probabilities);

  int agentCount() const override { return atoms_.front().size(); }
  AdjacencyMatrix sample(Rng& rng) const override;
  const GraphDistribution* finiteSupport() const override { return this; }

  // Index of the sampled atom; one uniform draw per call.
  int sampleIndex(Rng& rng) const;

  int atomCount() const { return static_cast<int>(atoms_.size()); }
  const std::vector<AdjacencyMatrix>& atoms() const { return atoms_; }
  const std::vector<double>& probabilities() const { return probs_; }
  const Eigen::MatrixXd& meanAdjacency() const { return meanAdjacency_; }

 private:
  std::vector<AdjacencyMatrix> atoms_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
  Eigen::MatrixXd meanAdjacency_;
};

// Mean Laplacian sum(p_r L_r). Throws MeanGraphDisconnected when the second
// smallest eigenvalue of the (symmetric) mean Laplacian is <= 1e-10.
Eigen::MatrixXd meanLaplacian(const GraphDistribution& dist);

// Orthogonal eigenstructure of a connected mean Laplacian: V = [V1 v2] with
// v2 = 1/sqrt(n) pinned exactly, V1 spanning the complement, and
// V' Lbar V = blockdiag(S, 0) with S = diag(eigenvalues), ascending, all > 0.
struct LaplacianDecomposition {
  Eigen::MatrixXd meanLaplacian;  // n x n
  Eigen::MatrixXd V1;             // n x (n-1)
  Eigen::VectorXd v2;             // n, = 1/sqrt(n)
  Eigen::VectorXd eigenvalues;    // n-1 positive eigenvalues, ascending

  int n() const { return static_cast<int>(v2.size()); }
  double kappa2() const { return eigenvalues(0); }
  Eigen::MatrixXd V() const;      // [V1 v2]
  Eigen::MatrixXd S() const { return eigenvalues.asDiagonal(); }
  double kappaStar() const { return eigenvalues(eigenvalues.size() - 1); }
};

// Throws Disconnected when |kappa2| <= 1e-10. The known eigenvector 1/sqrt(n)
// is deflated explicitly (Householder basis of its complement) so v2 is exact.
LaplacianDecomposition decompose(const Eigen::MatrixXd& meanLaplacian);

enum class MatrixNorm { Spectral, Frobenius };

// E ||L_k - Lbar||^2 over the finite support, exact. Spectral norm by
// default; Frobenius behind the flag.
double laplacianVariance(const GraphDistribution& dist,
                         MatrixNorm norm = MatrixNorm::Spectral);

// sigma(i,j) = E[a_ij^2], exact over the finite support.
Eigen::MatrixXd pairSecondMoments(const GraphDistribution& dist);

// Adapter for generator-backed graph models (no enumerable support).
class CallbackGraphSource : public GraphSource {
 public:
  using Generator = std::function<AdjacencyMatrix(Rng&)>;
  CallbackGraphSource(int agentCount, Generator gen)
      : n_(agentCount), gen_(std::move(gen)) {}

  int agentCount() const override { return n_; }
  AdjacencyMatrix sample(Rng& rng) const override { return gen_(rng); }

 private:
  int n_;
  Generator gen_;
};

// Moments consumed downstream. `estimated` is false for enumerated supports
// and true for sampled ones (generator sources), where `sampleCount` draws
// were used.
struct GraphMoments {
  Eigen::MatrixXd meanLaplacian;
  Eigen::MatrixXd pairSecondMoments;
  double laplacianVariance = 0.0;
  bool estimated = false;
  long sampleCount = 0;
};

GraphMoments graphMoments(const GraphDistribution& dist,
                          MatrixNorm norm = MatrixNorm::Spectral);
GraphMoments estimateGraphMoments(const GraphSource& source, long draws,
                                  Rng& rng,
                                  MatrixNorm norm = MatrixNorm::Spectral);

}  // namespace pdsa::network
