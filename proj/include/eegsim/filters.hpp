#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "forward_model.hpp"
#include "linalg.hpp"
#include "random.hpp"
#include "source_model.hpp"

namespace eegsim {

/// Second-moment matrices. R and N come from the recording (pst and pre),
/// the source-side ones from the simulator's ground truth.
struct CovarianceSet {
  Matrix R;        // m x m
  Matrix N;        // m x m
  Matrix Q;        // l x l
  Matrix Q_c;      // (l+k) x (l+k)
  Matrix Q_cross;  // l x (l+k), E[q q_c^t]
};

inline CovarianceSet estimate_covariances(const Recording& rec, const SourceSignals& sig) {
  const auto n = static_cast<double>(rec.y_pst.cols());
  if (rec.y_pst.cols() < 2) throw InvalidValue("estimate_covariances: need at least 2 samples");
  Matrix q_c(sig.q_pst.rows() + sig.qi_pst.rows(), sig.q_pst.cols());
  q_c << sig.q_pst, sig.qi_pst;

  CovarianceSet c;
  c.R = rec.y_pst * rec.y_pst.transpose() / n;
  c.N = rec.y_pre * rec.y_pre.transpose() / n;
  c.Q = sig.q_pst * sig.q_pst.transpose() / n;
  c.Q_c = q_c * q_c.transpose() / n;
  c.Q_cross = sig.q_pst * q_c.transpose() / n;
  return c;
}

enum class FilterKind {
  LCMV_R,
  LCMV_N,
  EIG_LCMV_R,
  EIG_LCMV_N,
  NL,
  MMSE_F,
  MMSE_I,
  ZF,
  RANDN,
  MVP_F_1,
  MVP_F_2,
  MVP_F_3,
  MVP_I_1,
  MVP_I_2,
  MVP_I_3,
};

inline constexpr std::array<std::pair<FilterKind, std::string_view>, 15> kFilterNames{{
    {FilterKind::LCMV_R, "LCMV_R"},
    {FilterKind::LCMV_N, "LCMV_N"},
    {FilterKind::EIG_LCMV_R, "EIG_LCMV_R"},
    {FilterKind::EIG_LCMV_N, "EIG_LCMV_N"},
    {FilterKind::NL, "NL"},
    {FilterKind::MMSE_F, "MMSE_F"},
    {FilterKind::MMSE_I, "MMSE_I"},
    {FilterKind::ZF, "ZF"},
    {FilterKind::RANDN, "RANDN"},
    {FilterKind::MVP_F_1, "MVP_F_1"},
    {FilterKind::MVP_F_2, "MVP_F_2"},
    {FilterKind::MVP_F_3, "MVP_F_3"},
    {FilterKind::MVP_I_1, "MVP_I_1"},
    {FilterKind::MVP_I_2, "MVP_I_2"},
    {FilterKind::MVP_I_3, "MVP_I_3"},
}};

inline std::string_view kind_name(FilterKind k) {
  for (const auto& [kind, name] : kFilterNames)
    if (kind == k) return name;
  return "?";
}

inline bool is_mv_pure(FilterKind k) {
  return k >= FilterKind::MVP_F_1 && k <= FilterKind::MVP_I_3;
}

struct FilterSpec {
  FilterKind kind = FilterKind::LCMV_R;
  std::optional<Eigen::Index> rank;     // MV-PURE r
  std::optional<Eigen::Index> sig_dim;  // eigenspace dimension

  /// "<kind>" or "<kind>_r<rank>"; also the export file stem.
  std::string name() const {
    std::string s(kind_name(kind));
    if (rank) s += "_r" + std::to_string(*rank);
    return s;
  }

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

/// Parses "LCMV_R", "MVP_F_2", "MVP_I_1_r2", ...
inline FilterSpec parse_filter_spec(std::string_view text) {
  FilterSpec spec;
  std::string_view base = text;
  if (const auto pos = text.rfind("_r"); pos != std::string_view::npos && pos + 2 < text.size()) {
    const auto digits = text.substr(pos + 2);
    if (digits.find_first_not_of("0123456789") == std::string_view::npos) {
      base = text.substr(0, pos);
      spec.rank = std::stol(std::string(digits));
    }
  }
  for (const auto& [kind, name] : kFilterNames) {
    if (name == base) {
      spec.kind = kind;
      if (spec.rank && !is_mv_pure(kind))
        throw InvalidValue("filter '" + std::string(text) + "': only MV-PURE filters take a rank");
      if (spec.rank && *spec.rank < 1)
        throw InvalidValue("filter '" + std::string(text) + "': rank must be positive");
      return spec;
    }
  }
  throw InvalidValue("unknown filter '" + std::string(text) + "'");
}

inline std::vector<FilterSpec> all_filter_specs() {
  std::vector<FilterSpec> out;
  for (const auto& [kind, name] : kFilterNames) out.push_back({kind, {}, {}});
  return out;
}

struct SpatialFilter {
  Matrix W;  // l x m
  FilterSpec spec;
  double constraint_residual = 0.0;  // |W H_f - I|_F against the filter-facing H
  Eigen::Index numerical_rank = 0;
};

namespace detail {

inline SpatialFilter finish(Matrix w, FilterSpec spec, const Matrix& h_f) {
  SpatialFilter f{std::move(w), spec, 0.0, 0};
  if (f.W.cols() == h_f.rows() && f.W.rows() == h_f.cols())
    f.constraint_residual = (f.W * h_f - Matrix::Identity(h_f.cols(), h_f.cols())).norm();
  f.numerical_rank = linalg::numerical_rank(f.W);
  return f;
}

inline void require_full_column_rank(const Matrix& h, const char* what) {
  const Vector s = linalg::singular_values(h);
  if (h.cols() == 0 || s.size() < h.cols() || !(s(0) > 0.0) ||
      s(s.size() - 1) <= 1e-12 * s(0))
    throw RankDeficientLeadfield(std::string(what) + ": lead-field is not of full column rank");
}

/// (H^t M^-1 H)^-1 H^t M^-1
inline Matrix constrained_min_variance(const Matrix& h, const Matrix& m, const char* what) {
  if (m.rows() != h.rows() || m.cols() != h.rows())
    throw ShapeMismatch(std::string(what) + ": covariance does not match lead-field rows");
  require_full_column_rank(h, what);
  const Matrix m_inv = linalg::invert_symmetric(m, what).inverse;
  const Matrix ht_minv = h.transpose() * m_inv;
  const Matrix gram = ht_minv * h;
  return gram.ldlt().solve(ht_minv);
}

}  // namespace detail

/// LCMV with covariance M (R or N).
inline SpatialFilter lcmv(const Matrix& h_f, const Matrix& m, FilterKind kind = FilterKind::LCMV_R) {
  return detail::finish(detail::constrained_min_variance(h_f, m, "lcmv"), {kind, {}, {}}, h_f);
}

/// Nulling filter: unit gain on the first `l` columns of H_c, zero gain on
/// the rest.
inline SpatialFilter nulling(const Matrix& h_c, const Matrix& r, Eigen::Index l) {
  if (l < 1 || l > h_c.cols()) throw InvalidValue("nulling: l outside [1, cols(H_c)]");
  const Matrix full = detail::constrained_min_variance(h_c, r, "nulling");
  return detail::finish(full.topRows(l), {FilterKind::NL, {}, {}}, h_c.leftCols(l));
}

enum class WienerVariant { InterferenceFree, WithInterference };

inline SpatialFilter wiener(const CovarianceSet& cov, const LeadfieldSet& lf, WienerVariant variant) {
  const Matrix r_inv = linalg::invert_symmetric(cov.R, "wiener").inverse;
  if (variant == WienerVariant::InterferenceFree) {
    if (cov.Q.rows() != lf.H_f.cols()) throw ShapeMismatch("wiener: Q does not match H");
    return detail::finish(cov.Q * lf.H_f.transpose() * r_inv, {FilterKind::MMSE_F, {}, {}}, lf.H_f);
  }
  if (cov.Q_cross.cols() != lf.H_c.cols()) throw ShapeMismatch("wiener: Q_cross does not match H_c");
  return detail::finish(cov.Q_cross * lf.H_c.transpose() * r_inv, {FilterKind::MMSE_I, {}, {}},
                        lf.H_f);
}

inline SpatialFilter zero_forcing(const Matrix& h_f) {
  return detail::finish(linalg::pinv(h_f, 1e-12), {FilterKind::ZF, {}, {}}, h_f);
}

/// Base filter times the projection onto the `sig_dim` dominant
/// eigenvectors of R.
inline SpatialFilter eig_lcmv(const SpatialFilter& base, const Matrix& r, Eigen::Index sig_dim,
                              const Matrix& h_f) {
  if (sig_dim < 1 || sig_dim > r.rows()) throw InvalidValue("eig_lcmv: sig_dim outside [1, m]");
  const Matrix p = linalg::eigen_projection(r, sig_dim, linalg::EigenOrder::Largest);
  const FilterKind kind =
      base.spec.kind == FilterKind::LCMV_N ? FilterKind::EIG_LCMV_N : FilterKind::EIG_LCMV_R;
  return detail::finish(base.W * p, {kind, {}, sig_dim}, h_f);
}

enum class MvPureFamily { F, I };

/// Symmetric matrix whose r smallest eigenvectors define the MV-PURE
/// projection. Variant 1: W_R R W_R^t - 2Q, 2: W_R R W_R^t, 3: W_N N W_N^t.
/// The interference family uses the same expressions.
inline Matrix mv_pure_criterion(const Matrix& w_lcmv_r, const Matrix& w_lcmv_n,
                                const CovarianceSet& cov, int variant) {
  switch (variant) {
    case 1: return w_lcmv_r * cov.R * w_lcmv_r.transpose() - 2.0 * cov.Q;
    case 2: return w_lcmv_r * cov.R * w_lcmv_r.transpose();
    case 3: return w_lcmv_n * cov.N * w_lcmv_n.transpose();
    default: throw InvalidValue("mv_pure: variant must be 1, 2 or 3");
  }
}

inline SpatialFilter mv_pure(const SpatialFilter& lcmv_r, const SpatialFilter& lcmv_n,
                             const SpatialFilter& nl, const CovarianceSet& cov, MvPureFamily family,
                             int variant, Eigen::Index rank, const Matrix& h_f) {
  const Eigen::Index l = lcmv_r.W.rows();
  if (rank < 1 || rank > l) throw InvalidValue("mv_pure: rank outside [1, l]");
  const Matrix crit = mv_pure_criterion(lcmv_r.W, lcmv_n.W, cov, variant);
  const Matrix p = linalg::eigen_projection(crit, rank, linalg::EigenOrder::Smallest);

  const Matrix& base = family == MvPureFamily::I ? nl.W : (variant == 3 ? lcmv_n.W : lcmv_r.W);
  const int offset = (family == MvPureFamily::F ? static_cast<int>(FilterKind::MVP_F_1)
                                                : static_cast<int>(FilterKind::MVP_I_1)) +
                     variant - 1;
  return detail::finish(p * base, {static_cast<FilterKind>(offset), rank, {}}, h_f);
}

inline SpatialFilter randn_baseline(Eigen::Index l, Eigen::Index m, Rng& rng) {
  Matrix w = rng.normal_matrix(l, m) / std::sqrt(static_cast<double>(m));
  SpatialFilter f{std::move(w), {FilterKind::RANDN, {}, {}}, 0.0, 0};
  f.numerical_rank = linalg::numerical_rank(f.W);
  return f;
}

inline Matrix reconstruct(const SpatialFilter& filter, const Matrix& y_pst) {
  if (filter.W.cols() != y_pst.rows())
    throw ShapeMismatch("reconstruct: filter has " + std::to_string(filter.W.cols()) +
                        " columns but data has " + std::to_string(y_pst.rows()) + " channels");
  return filter.W * y_pst;
}

struct FilterBankOptions {
  Eigen::Index sig_dim = 0;                // eigenspace dimension; 0 means l
  std::optional<Eigen::Index> mvp_rank;    // default MV-PURE rank when a spec has none
};

/// Default MV-PURE rank: one below full, so the projection actually acts.
inline Eigen::Index default_mv_pure_rank(Eigen::Index l) { return l > 1 ? l - 1 : 1; }

/// Builds the requested filters in list order. The shared LCMV/NL bases are
/// computed once and only when needed.
inline std::vector<SpatialFilter> build_filters(const std::vector<FilterSpec>& specs,
                                                const CovarianceSet& cov, const LeadfieldSet& lf,
                                                const FilterBankOptions& opt, Rng& rng) {
  const Matrix& h = lf.H_f;
  const Eigen::Index l = h.cols();
  const Eigen::Index m = h.rows();
  std::optional<SpatialFilter> w_r, w_n, w_nl;
  auto base_r = [&]() -> const SpatialFilter& {
    if (!w_r) w_r = lcmv(h, cov.R, FilterKind::LCMV_R);
    return *w_r;
  };
  auto base_n = [&]() -> const SpatialFilter& {
    if (!w_n) w_n = lcmv(h, cov.N, FilterKind::LCMV_N);
    return *w_n;
  };
  auto base_nl = [&]() -> const SpatialFilter& {
    if (!w_nl) w_nl = nulling(lf.H_c, cov.R, l);
    return *w_nl;
  };

  std::vector<SpatialFilter> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    const Eigen::Index sig = spec.sig_dim.value_or(opt.sig_dim > 0 ? opt.sig_dim : l);
    const Eigen::Index rank = spec.rank.value_or(opt.mvp_rank.value_or(default_mv_pure_rank(l)));
    switch (spec.kind) {
      case FilterKind::LCMV_R: out.push_back(base_r()); break;
      case FilterKind::LCMV_N: out.push_back(base_n()); break;
      case FilterKind::EIG_LCMV_R: out.push_back(eig_lcmv(base_r(), cov.R, sig, h)); break;
      case FilterKind::EIG_LCMV_N: out.push_back(eig_lcmv(base_n(), cov.R, sig, h)); break;
      case FilterKind::NL: out.push_back(base_nl()); break;
      case FilterKind::MMSE_F: out.push_back(wiener(cov, lf, WienerVariant::InterferenceFree)); break;
      case FilterKind::MMSE_I: out.push_back(wiener(cov, lf, WienerVariant::WithInterference)); break;
      case FilterKind::ZF: out.push_back(zero_forcing(h)); break;
      case FilterKind::RANDN: out.push_back(randn_baseline(l, m, rng)); break;
      default: {
        const int k = static_cast<int>(spec.kind);
        const bool f_family = k <= static_cast<int>(FilterKind::MVP_F_3);
        const int variant = k - static_cast<int>(f_family ? FilterKind::MVP_F_1 : FilterKind::MVP_I_1) + 1;
        out.push_back(mv_pure(base_r(), base_n(), base_nl(), cov,
                              f_family ? MvPureFamily::F : MvPureFamily::I, variant, rank, h));
      }
    }
  }
  return out;
}

}  // namespace eegsim
