#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "pdsa/errors.hpp"

namespace pdsa::linalg {

inline bool isSymmetric(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

// Largest singular value.
inline double spectralNorm(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

// Symmetric square root of a PSD matrix. Eigenvalues slightly negative from
// roundoff are clamped; significantly indefinite input is rejected.
inline Eigen::MatrixXd psdSqrt(const Eigen::MatrixXd& m) {
  if (!isSymmetric(m, 1e-10)) {
    throw InvalidArgument("psdSqrt: matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) {
    throw Error("psdSqrt: eigensolver failed");
  }
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd roots = es.eigenvalues();
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    if (roots(i) < -1e-10 * scale) {
      throw InvalidArgument("psdSqrt: matrix is not positive semidefinite");
    }
    roots(i) = std::sqrt(std::max(roots(i), 0.0));
  }
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace pdsa::linalg
