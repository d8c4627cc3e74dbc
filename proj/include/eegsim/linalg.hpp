#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace eegsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

inline constexpr double kMaxCondition = 1e12;
inline constexpr double kLoadingFactor = 1e-10;

inline double symmetry_error(const Matrix& m) {
  return (m - m.transpose()).norm();
}

/// Singular values in descending order.
inline Vector singular_values(const Matrix& a) {
  if (a.size() == 0) return Vector{};
  return Eigen::JacobiSVD<Matrix>(a).singularValues();
}

/// Count of singular values above rel_tol * sigma_max.
inline Eigen::Index numerical_rank(const Matrix& a, double rel_tol = 1e-10) {
  const Vector s = singular_values(a);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return (s.array() > rel_tol * s(0)).count();
}

/// Moore-Penrose pseudo-inverse; singular values below rel_tol * sigma_max
/// are treated as zero.
inline Matrix pinv(const Matrix& a, double rel_tol = 1e-12) {
  if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = s.size() ? rel_tol * s(0) : 0.0;
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut && s(i) > 0.0) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Inverse of a symmetric positive (semi)definite matrix through its
/// eigendecomposition. When cond(M) exceeds kMaxCondition the matrix is
/// loaded with kLoadingFactor * tr(M)/n on the diagonal first.
struct SymmetricInverse {
  Matrix inverse;
  double condition = 0.0;  // before loading
  bool loaded = false;
};

inline SymmetricInverse invert_symmetric(const Matrix& m,
                                         const std::string& what = "matrix") {
  const Eigen::Index n = m.rows();
  if (n == 0 || m.cols() != n)
    throw SingularCovariance(what + ": not a non-empty square matrix");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success)
    throw EigenDecompositionFailure(what + ": eigen solver did not converge");

  SymmetricInverse out;
  Vector lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  const double lmin = lambda.minCoeff();
  out.condition = (lmin > 0.0) ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmax > 0.0)) throw SingularCovariance(what + ": no positive eigenvalue");

  if (out.condition > kMaxCondition) {
    const double trace = sym.trace();
    if (!(trace > 0.0)) throw SingularCovariance(what + ": zero trace");
    lambda.array() += kLoadingFactor * trace / static_cast<double>(n);
    out.loaded = true;
    if (!(lambda.minCoeff() > 0.0))
      throw SingularCovariance(what + ": indefinite after diagonal loading");
  }
  const Matrix& v = eig.eigenvectors();
  out.inverse = v * lambda.cwiseInverse().asDiagonal() * v.transpose();
  return out;
}

enum class EigenOrder { Smallest, Largest };

/// Eigenvectors of a symmetric matrix, ordered by eigenvalue. Ties keep the
/// solver's column index order (stable sort), so the selection is
/// reproducible for degenerate spectra.
struct SortedEigen {
  Vector values;
  Matrix vectors;
};

inline SortedEigen sorted_eigen(const Matrix& s, EigenOrder order) {
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success)
    throw EigenDecompositionFailure("symmetric eigendecomposition did not converge");
  const Vector& lambda = eig.eigenvalues();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(lambda.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (order == EigenOrder::Smallest) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](auto a, auto b) { return lambda(a) < lambda(b); });
  } else {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](auto a, auto b) { return lambda(a) > lambda(b); });
  }
  SortedEigen out{Vector(lambda.size()), Matrix(sym.rows(), sym.cols())};
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    out.values(c) = lambda(idx[k]);
    out.vectors.col(c) = eig.eigenvectors().col(idx[k]);
  }
  return out;
}

/// Orthogonal projection onto the span of `count` eigenvectors of `s`,
/// picked from the requested end of the spectrum.
inline Matrix eigen_projection(const Matrix& s, Eigen::Index count, EigenOrder order) {
  const SortedEigen e = sorted_eigen(s, order);
  const Matrix v = e.vectors.leftCols(count);
  return v * v.transpose();
}

}  // namespace linalg
}  // namespace eegsim
