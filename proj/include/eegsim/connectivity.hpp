#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "mvar.hpp"

namespace eegsim {

using ComplexMatrix = Eigen::MatrixXcd;

/// How the transfer matrix is obtained from A(lambda).
enum class TransferConvention {
  Inverse,             // H = A(lambda)^-1 (standard DTF)
  ComplementInverse,   // H = (I - A(lambda))^-1
};

inline constexpr std::size_t kDefaultFrequencyCount = 129;

/// `count` evenly spaced normalized frequencies on [0, 0.5].
inline std::vector<double> frequency_grid(std::size_t count = kDefaultFrequencyCount) {
  if (count == 0) throw InvalidValue("frequency_grid: count must be positive");
  std::vector<double> f(count, 0.0);
  for (std::size_t i = 1; i < count; ++i)
    f[i] = 0.5 * static_cast<double>(i) / static_cast<double>(count - 1);
  return f;
}

struct SpectralTransform {
  std::vector<ComplexMatrix> A_lambda;
  std::vector<ComplexMatrix> H_lambda;
  std::vector<std::size_t> singular;  // frequency indices that fell back to a pseudo-inverse
};

namespace detail {

inline ComplexMatrix invert_or_pinv(const ComplexMatrix& a, bool& singular) {
  Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  singular = !(smax > 0.0) || s(s.size() - 1) <= 1e-12 * smax;
  if (!singular) return a.inverse();
  Eigen::VectorXcd inv = Eigen::VectorXcd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-12 * smax && s(i) > 0.0) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace detail

/// A(lambda) = I - sum_s A_s exp(-2 pi i s lambda) and the transfer matrix.
inline SpectralTransform spectral_transform(const MvarModel& model, const std::vector<double>& freqs,
                                            TransferConvention conv = TransferConvention::Inverse) {
  const Eigen::Index d = model.dim;
  SpectralTransform out;
  out.A_lambda.reserve(freqs.size());
  out.H_lambda.reserve(freqs.size());
  const ComplexMatrix eye = ComplexMatrix::Identity(d, d);
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    const double lambda = freqs[f];
    if (std::abs(lambda) > 0.5) throw InvalidValue("spectral_transform: |lambda| must be <= 0.5");
    ComplexMatrix a = eye;
    for (Eigen::Index s = 1; s <= model.order; ++s) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(s) * lambda;
      // exact +-1 at the grid endpoints keeps A(0) and A(0.5) real
      std::complex<double> z(std::cos(phase), std::sin(phase));
      if (lambda == 0.0) z = 1.0;
      else if (std::abs(lambda) == 0.5) z = (s % 2 == 0) ? 1.0 : -1.0;
      a -= model.coeffs[static_cast<std::size_t>(s - 1)].cast<std::complex<double>>() * z;
    }
    bool singular = false;
    ComplexMatrix h = detail::invert_or_pinv(conv == TransferConvention::Inverse ? a : eye - a,
                                             singular);
    if (singular) out.singular.push_back(f);
    out.A_lambda.push_back(std::move(a));
    out.H_lambda.push_back(std::move(h));
  }
  return out;
}

/// |X_ij| / sqrt(sum_i |X_ij|^2): columns of the result have unit norm.
inline Matrix column_normalized(const ComplexMatrix& x, double lambda) {
  Matrix mag = x.cwiseAbs();
  for (Eigen::Index j = 0; j < mag.cols(); ++j) {
    const double n = mag.col(j).norm();
    if (!(n > 0.0))
      throw ZeroColumn("column " + std::to_string(j) + " of A(lambda) vanishes at lambda=" +
                       std::to_string(lambda));
    mag.col(j) /= n;
  }
  return mag;
}

/// |X_ji| / sqrt(sum_i |X_ji|^2): rows of the result have unit norm.
inline Matrix row_normalized(const ComplexMatrix& x, double lambda) {
  Matrix mag = x.cwiseAbs();
  for (Eigen::Index j = 0; j < mag.rows(); ++j) {
    const double n = mag.row(j).norm();
    if (!(n > 0.0))
      throw ZeroRow("row " + std::to_string(j) + " of H(lambda) vanishes at lambda=" +
                    std::to_string(lambda));
    mag.row(j) /= n;
  }
  return mag;
}

struct ConnectivitySpectrum {
  std::vector<double> freqs;
  std::vector<Matrix> pdc;  // pdc[f](i, j): j -> i
  std::vector<Matrix> dtf;  // dtf[f](j, i): inflow from i to j
  std::vector<ComplexMatrix> A_lambda, H_lambda;
  std::vector<std::size_t> singular;
};

inline std::vector<Matrix> pdc(const MvarModel& model, const std::vector<double>& freqs) {
  const auto t = spectral_transform(model, freqs);
  std::vector<Matrix> out;
  out.reserve(freqs.size());
  for (std::size_t f = 0; f < freqs.size(); ++f)
    out.push_back(column_normalized(t.A_lambda[f], freqs[f]));
  return out;
}

inline std::vector<Matrix> dtf(const MvarModel& model, const std::vector<double>& freqs,
                               TransferConvention conv = TransferConvention::Inverse) {
  const auto t = spectral_transform(model, freqs, conv);
  std::vector<Matrix> out;
  out.reserve(freqs.size());
  for (std::size_t f = 0; f < freqs.size(); ++f)
    out.push_back(row_normalized(t.H_lambda[f], freqs[f]));
  return out;
}

inline ConnectivitySpectrum connectivity(const MvarModel& model, const std::vector<double>& freqs,
                                         TransferConvention conv = TransferConvention::Inverse) {
  auto t = spectral_transform(model, freqs, conv);
  ConnectivitySpectrum c;
  c.freqs = freqs;
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    c.pdc.push_back(column_normalized(t.A_lambda[f], freqs[f]));
    c.dtf.push_back(row_normalized(t.H_lambda[f], freqs[f]));
  }
  c.A_lambda = std::move(t.A_lambda);
  c.H_lambda = std::move(t.H_lambda);
  c.singular = std::move(t.singular);
  return c;
}

/// sqrt(sum_f |X_f - Y_f|_F^2).
inline double spectrum_distance(const std::vector<Matrix>& x, const std::vector<Matrix>& y) {
  if (x.size() != y.size()) throw ShapeMismatch("spectrum_distance: frequency counts differ");
  double acc = 0.0;
  for (std::size_t f = 0; f < x.size(); ++f) acc += (x[f] - y[f]).squaredNorm();
  return std::sqrt(acc);
}

/// Long-format rows: measure,i,j,lambda,value (1-based channel indices).
inline void write_connectivity_csv(std::ostream& os, const ConnectivitySpectrum& c) {
  os << "measure,i,j,lambda,value\n";
  auto dump = [&](const char* name, const std::vector<Matrix>& t) {
    for (std::size_t f = 0; f < t.size(); ++f)
      for (Eigen::Index i = 0; i < t[f].rows(); ++i)
        for (Eigen::Index j = 0; j < t[f].cols(); ++j) {
          char buf[96];
          std::snprintf(buf, sizeof buf, "%s,%ld,%ld,%.17g,%.17g\n", name, static_cast<long>(i + 1),
                        static_cast<long>(j + 1), c.freqs[f], t[f](i, j));
          os << buf;
        }
  };
  dump("pdc", c.pdc);
  dump("dtf", c.dtf);
}

}  // namespace eegsim
