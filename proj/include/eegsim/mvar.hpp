#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "linalg.hpp"
#include "random.hpp"

namespace eegsim {

/// x(t) = sum_{s=1..order} coeffs[s-1] * x(t-s) + e(t),  e ~ N(0, noise_cov).
struct MvarModel {
  Eigen::Index dim = 0;
  Eigen::Index order = 0;
  std::vector<Matrix> coeffs;
  Matrix noise_cov;

  static MvarModel zeros(Eigen::Index dim, Eigen::Index order) {
    MvarModel m;
    m.dim = dim;
    m.order = order;
    m.coeffs.assign(static_cast<std::size_t>(order), Matrix::Zero(dim, dim));
    m.noise_cov = Matrix::Identity(dim, dim);
    return m;
  }

  /// [A_1 ... A_p], dim x (dim * order).
  Matrix stacked() const {
    Matrix out(dim, dim * order);
    for (Eigen::Index s = 0; s < order; ++s)
      out.middleCols(s * dim, dim) = coeffs[static_cast<std::size_t>(s)];
    return out;
  }

  /// Throws DimensionMismatch / InvalidValue when the invariants do not hold.
  void validate() const {
    if (dim < 1 || order < 1) throw InvalidValue("MvarModel: dim and order must be positive");
    if (static_cast<Eigen::Index>(coeffs.size()) != order)
      throw DimensionMismatch("MvarModel: coefficient count differs from order");
    for (const auto& a : coeffs)
      if (a.rows() != dim || a.cols() != dim)
        throw DimensionMismatch("MvarModel: coefficient matrix is not dim x dim");
    if (noise_cov.rows() != dim || noise_cov.cols() != dim)
      throw DimensionMismatch("MvarModel: noise_cov is not dim x dim");
    if (linalg::symmetry_error(noise_cov) > 1e-12)
      throw InvalidValue("MvarModel: noise_cov is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(noise_cov, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10)
      throw InvalidValue("MvarModel: noise_cov is not positive semidefinite");
  }
};

/// Binary connectivity mask with unit diagonal.
struct MaskMatrix {
  Matrix entries;

  Eigen::Index dim() const { return entries.rows(); }

  Eigen::Index off_diagonal_ones() const {
    return static_cast<Eigen::Index>(entries.sum()) - dim();
  }
};

enum class ChannelRole { Interest, Interference, Background };

inline const char* to_string(ChannelRole r) {
  switch (r) {
    case ChannelRole::Interest: return "interest";
    case ChannelRole::Interference: return "interference";
    case ChannelRole::Background: return "background";
  }
  return "?";
}

/// Block-diagonal composite of the interest and background generators (the
/// A00 view). Interference channels are derived from interest channels and
/// carry zero coefficients here.
struct CompositeMvar {
  MvarModel blocks;
  std::vector<ChannelRole> channel_roles;
};

struct CoeffRange {
  double lo = -0.3;
  double hi = 0.3;
};

struct StabilityResult {
  bool stable = false;
  double spectral_radius = 0.0;
};

/// Companion matrix [A_1 ... A_p; I 0].
inline Matrix companion_matrix(const MvarModel& model) {
  const Eigen::Index d = model.dim;
  const Eigen::Index n = d * model.order;
  Matrix c = Matrix::Zero(n, n);
  c.topRows(d) = model.stacked();
  if (model.order > 1) c.bottomLeftCorner(n - d, n - d).setIdentity();
  return c;
}

inline StabilityResult is_stable(const MvarModel& model, double stab_limit) {
  const Matrix c = companion_matrix(model);
  Eigen::EigenSolver<Matrix> es(c, false);
  const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
  return {radius < stab_limit, radius};
}

inline MaskMatrix make_mask(Eigen::Index dim, double frac_ones, Rng& rng) {
  MaskMatrix mask{Matrix::Identity(dim, dim)};
  std::vector<std::pair<Eigen::Index, Eigen::Index>> slots;
  slots.reserve(static_cast<std::size_t>(dim * (dim - 1)));
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      if (i != j) slots.emplace_back(i, j);

  const auto count = static_cast<std::size_t>(
      std::llround(frac_ones * static_cast<double>(slots.size())));
  // partial Fisher-Yates: the first `count` slots become ones
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t pick = k + rng.index(slots.size() - k);
    std::swap(slots[k], slots[pick]);
    mask.entries(slots[k].first, slots[k].second) = 1.0;
  }
  return mask;
}

/// Rejection sampler: masked i.i.d. uniform candidates until the companion
/// spectral radius drops below stab_limit. Noise covariance is the identity.
inline MvarModel sample_stable_mvar(Eigen::Index dim, Eigen::Index order,
                                    const MaskMatrix& mask, double stab_limit,
                                    CoeffRange range, int iter_limit, Rng& rng) {
  if (iter_limit < 1) throw InvalidValue("sample_stable_mvar: iter_limit must be >= 1");
  if (mask.dim() != dim) throw DimensionMismatch("sample_stable_mvar: mask size differs from dim");

  MvarModel model = MvarModel::zeros(dim, order);
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iter_limit; ++it) {
    for (auto& a : model.coeffs) {
      for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index i = 0; i < dim; ++i)
          a(i, j) = (range.lo == range.hi) ? range.lo : rng.uniform(range.lo, range.hi);
      a = a.cwiseProduct(mask.entries);
    }
    const auto s = is_stable(model, stab_limit);
    if (s.stable) return model;
    best = std::min(best, s.spectral_radius);
  }
  throw StabilitySearchExhausted(
      "no model with spectral radius < " + std::to_string(stab_limit) + " in " +
      std::to_string(iter_limit) + " draws (smallest radius seen " + std::to_string(best) + ")");
}

inline constexpr Eigen::Index kDefaultBurnIn = 1000;

inline Matrix simulate(const MvarModel& model, Eigen::Index n_samples, Eigen::Index burn_in,
                       Rng& rng) {
  const auto st = is_stable(model, 1.0);
  if (!st.stable)
    throw UnstableModel("simulate: spectral radius " + std::to_string(st.spectral_radius) +
                        " is not below 1");
  const Eigen::Index d = model.dim;
  const Eigen::Index p = model.order;

  // innovation factor L with L L^t = noise_cov; eigen route tolerates PSD input
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (model.noise_cov + model.noise_cov.transpose()));
  const Matrix factor =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  const Eigen::Index total = burn_in + n_samples;
  Matrix history = Matrix::Zero(d, p);  // column s holds x(t-1-s)
  Matrix out(d, n_samples);
  Vector x(d), e(d);
  for (Eigen::Index t = 0; t < total; ++t) {
    for (Eigen::Index i = 0; i < d; ++i) e(i) = rng.normal();
    x = factor * e;
    for (Eigen::Index s = 0; s < p; ++s) x += model.coeffs[static_cast<std::size_t>(s)] * history.col(s);
    for (Eigen::Index s = p - 1; s > 0; --s) history.col(s) = history.col(s - 1);
    history.col(0) = x;
    if (t >= burn_in) out.col(t - burn_in) = x;
  }
  return out;
}

/// Ordinary least squares fit without intercept.
inline MvarModel fit(const Matrix& series, Eigen::Index order) {
  const Eigen::Index d = series.rows();
  const Eigen::Index n = series.cols();
  if (d < 1 || order < 1) throw InvalidValue("fit: empty series or non-positive order");
  if (n <= order * d + d)
    throw RankDeficientRegressor("fit: " + std::to_string(n) + " samples are too few for order " +
                                 std::to_string(order) + " and dim " + std::to_string(d));
  const Eigen::Index rows = n - order;
  Matrix z(d * order, rows);
  for (Eigen::Index s = 0; s < order; ++s)
    z.middleRows(s * d, d) = series.middleCols(order - 1 - s, rows);
  const Matrix y = series.rightCols(rows);

  const Matrix gram = z * z.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin <= 1e-10 * lmax)
    throw RankDeficientRegressor("fit: lag-stacked regressor Gram matrix is singular");

  const Matrix b = gram.ldlt().solve(z * y.transpose()).transpose();
  MvarModel model = MvarModel::zeros(d, order);
  for (Eigen::Index s = 0; s < order; ++s)
    model.coeffs[static_cast<std::size_t>(s)] = b.middleCols(s * d, d);
  const Matrix resid = y - b * z;
  model.noise_cov = resid * resid.transpose() / static_cast<double>(rows);
  model.noise_cov = 0.5 * (model.noise_cov + model.noise_cov.transpose());
  return model;
}

}  // namespace eegsim
