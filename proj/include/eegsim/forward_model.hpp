#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "linalg.hpp"
#include "random.hpp"
#include "source_model.hpp"

namespace eegsim {

/// Homogeneous conducting sphere.
struct HeadModel {
  double radius = 0.09;        // m
  double conductivity = 0.33;  // S/m
};

struct ElectrodeMontage {
  std::vector<Vec3> positions;
  std::vector<std::string> labels;

  Eigen::Index size() const { return static_cast<Eigen::Index>(positions.size()); }
};

/// `m` electrodes on a Fibonacci spiral covering z >= -R/2.
inline ElectrodeMontage fibonacci_montage(Eigen::Index m, double head_radius) {
  if (m < 4) throw InvalidValue("fibonacci_montage: at least 4 electrodes required");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  ElectrodeMontage out;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double z = 1.0 - 1.5 * (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    Vec3 p(rho * std::cos(phi), rho * std::sin(phi), z);
    out.positions.push_back(head_radius * p.normalized());
    char label[24];
    std::snprintf(label, sizeof label, "E%03ld", static_cast<long>(i + 1));
    out.labels.emplace_back(label);
  }
  return out;
}

/// Scalp potential at `electrode` (on the sphere surface) of a dipole with
/// moment `moment` at `source`, without re-referencing.
///
/// Uses the Legendre expansion of the insulated-sphere Neumann solution,
///   V = 1/(4 pi sigma) sum_{n>=1} (2n+1)/n R^{-(n+1)} moment . grad_src(b^n P_n(cos g)),
/// truncated once a bound on the remaining term magnitude drops below 1e-12
/// of the running scale.
inline double dipole_potential(const Vec3& source, const Vec3& moment, const Vec3& electrode,
                               const HeadModel& head) {
  const double radius = head.radius;
  const double b = source.norm();
  if (!(b < radius)) throw SourceOutsideHead("dipole source lies on or outside the head sphere");
  const Vec3 e_hat = electrode.normalized();
  const double scale = 1.0 / (4.0 * std::numbers::pi * head.conductivity * radius * radius);

  if (b <= 1e-15 * radius) return scale * 3.0 * moment.dot(e_hat);

  const Vec3 s_hat = source / b;
  const double t = b / radius;
  const double u = std::clamp(s_hat.dot(e_hat), -1.0, 1.0);
  const double p_radial = moment.dot(s_hat);
  const double p_tangent = moment.dot(e_hat) - u * p_radial;
  const double p_norm = moment.norm();

  double sum = 0.0;
  double legendre_prev = 1.0, legendre = u;  // P_0, P_1
  double deriv_prev = 0.0, deriv = 1.0;      // P_0', P_1'
  double t_pow = 1.0;                        // t^(n-1)
  for (int n = 1; n < 100000; ++n) {
    const double nd = n;
    const double term = (2.0 * nd + 1.0) / nd * t_pow * (nd * legendre * p_radial + deriv * p_tangent);
    sum += term;
    const double bound = (2.0 * nd + 1.0) / nd * t_pow * t * (nd + 1.0) * (nd + 2.0) * p_norm;
    if (bound <= 1e-12 * std::max(std::abs(sum), 3.0 * p_norm)) break;
    const double next = ((2.0 * nd + 1.0) * u * legendre - nd * legendre_prev) / (nd + 1.0);
    const double next_deriv = deriv_prev + (2.0 * nd + 1.0) * legendre;
    legendre_prev = legendre;
    legendre = next;
    deriv_prev = deriv;
    deriv = next_deriv;
    t_pow *= t;
  }
  return scale * sum;
}

/// Subtracts the cross-electrode mean from every column.
inline void average_reference(Matrix& h) {
  if (h.rows() == 0) return;
  h.rowwise() -= h.colwise().mean();
}

/// Average-referenced lead-field for the listed sources, one column each.
inline Matrix leadfield_columns(const std::vector<Vec3>& positions,
                                const std::vector<Vec3>& orientations,
                                const std::vector<std::size_t>& which,
                                const ElectrodeMontage& montage, const HeadModel& head) {
  Matrix h(montage.size(), static_cast<Eigen::Index>(which.size()));
  for (std::size_t c = 0; c < which.size(); ++c)
    for (Eigen::Index e = 0; e < montage.size(); ++e)
      h(e, static_cast<Eigen::Index>(c)) =
          dipole_potential(positions[which[c]], orientations[which[c]],
                           montage.positions[static_cast<std::size_t>(e)], head);
  average_reference(h);
  return h;
}

struct LeadfieldSet {
  Matrix H, H_i, H_b;
  Matrix H_pert, Hi_pert, Hb_pert;
  // filter-facing selection (original or perturbed, optionally rank-reduced)
  Matrix H_f, Hi_f;
  Matrix H_c;  // [H_f Hi_f]
};

inline LeadfieldSet leadfield_sphere(const PerturbedGeometry& geom,
                                     const ElectrodeMontage& montage, const HeadModel& head) {
  const auto& g = geom.base;
  const auto interest = g.indices(ChannelRole::Interest);
  const auto interference = g.indices(ChannelRole::Interference);
  const auto background = g.indices(ChannelRole::Background);

  LeadfieldSet lf;
  lf.H = leadfield_columns(g.positions, g.orientations, interest, montage, head);
  lf.H_i = leadfield_columns(g.positions, g.orientations, interference, montage, head);
  lf.H_b = leadfield_columns(g.positions, g.orientations, background, montage, head);
  lf.H_pert = leadfield_columns(geom.positions_pert, geom.orientations_pert, interest, montage, head);
  lf.Hi_pert =
      leadfield_columns(geom.positions_pert, geom.orientations_pert, interference, montage, head);
  lf.Hb_pert =
      leadfield_columns(geom.positions_pert, geom.orientations_pert, background, montage, head);
  lf.H_f = lf.H;
  lf.Hi_f = lf.H_i;
  lf.H_c.resize(lf.H.rows(), lf.H.cols() + lf.H_i.cols());
  lf.H_c << lf.H_f, lf.Hi_f;
  return lf;
}

inline LeadfieldSet leadfield_sphere(const SourceGeometry& geom, const ElectrodeMontage& montage,
                                     const HeadModel& head) {
  return leadfield_sphere(PerturbedGeometry{geom, geom.positions, geom.orientations}, montage,
                          head);
}

/// Best rank-`rank` approximation in Frobenius norm.
inline Matrix reduce_rank(const Matrix& h, Eigen::Index rank) {
  if (rank < 1 || rank > std::min(h.rows(), h.cols()))
    throw InvalidValue("reduce_rank: rank must lie in [1, min(rows, cols)]");
  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(rank) * svd.singularValues().head(rank).asDiagonal() *
         svd.matrixV().leftCols(rank).transpose();
}

/// Rescales `target` so that 10 log10(|reference|_F^2 / |y|_F^2) = snr_db.
inline Matrix adjust_snr(const Matrix& reference, const Matrix& target, double snr_db) {
  const double target_norm = target.norm();
  if (!(target_norm > 0.0)) throw ZeroTargetSignal("adjust_snr: target signal has zero norm");
  return (target / target_norm) * reference.norm() / std::pow(10.0, 0.5 * snr_db / 10.0);
}

/// Achieved ratio in dB, the inverse of adjust_snr.
inline double snr_db(const Matrix& reference, const Matrix& scaled) {
  return 10.0 * std::log10(reference.squaredNorm() / scaled.squaredNorm());
}

struct SegmentFlags {
  bool signal = true;
  bool interference = true;
  bool background = true;
  bool noise = true;
};

struct MeasurementConfig {
  double sinr_db = 5.0;
  double sbnr_db = 5.0;
  double smnr_db = 20.0;  // +inf disables measurement noise
  SegmentFlags pre{false, true, true, true};
  SegmentFlags pst{true, true, true, true};
  bool src_perturbed = false;  // filters see H_pert instead of H
  bool int_perturbed = false;  // filters see Hi_pert instead of H_i
  std::optional<Eigen::Index> interference_rank;
};

struct SensorComponents {
  Matrix interest, interference, background, noise;
};

struct Recording {
  Matrix y_pre, y_pst;
  SensorComponents pre, pst;
  double sinr_db = 0.0, sbnr_db = 0.0, smnr_db = 0.0;
};

/// Sum of the enabled components, always accumulated in the same order.
inline Matrix sum_components(const SensorComponents& c, const SegmentFlags& f) {
  Matrix y = Matrix::Zero(c.interest.rows(), c.interest.cols());
  if (f.signal) y += c.interest;
  if (f.interference) y += c.interference;
  if (f.background) y += c.background;
  if (f.noise) y += c.noise;
  return y;
}

/// Fills the filter-facing lead-fields from the perturbation flags and the
/// optional interference rank.
inline void select_filter_leadfields(LeadfieldSet& lf, const MeasurementConfig& cfg) {
  lf.H_f = cfg.src_perturbed ? lf.H_pert : lf.H;
  lf.Hi_f = cfg.int_perturbed ? lf.Hi_pert : lf.H_i;
  if (cfg.interference_rank && lf.Hi_f.cols() > 0)
    lf.Hi_f = reduce_rank(lf.Hi_f, *cfg.interference_rank);
  lf.H_c.resize(lf.H_f.rows(), lf.H_f.cols() + lf.Hi_f.cols());
  lf.H_c << lf.H_f, lf.Hi_f;
}

/// Forms y_pre / y_pst from the original lead-fields and updates the
/// filter-facing selection in `lf`.
inline Recording compose_measurement(const SourceSignals& s, LeadfieldSet& lf,
                                     const MeasurementConfig& cfg, Rng& rng) {
  const Eigen::Index n = s.q_pst.cols();
  const Eigen::Index m = lf.H.rows();
  auto check = [](bool ok, const char* what) {
    if (!ok) throw ShapeMismatch(std::string("compose_measurement: ") + what);
  };
  check(lf.H.cols() == s.q_pst.rows() && lf.H.cols() == s.q_pre.rows(), "H vs q");
  check(lf.H_i.cols() == s.qi_pst.rows() && lf.H_i.cols() == s.qi_pre.rows(), "H_i vs q_i");
  check(lf.H_b.cols() == s.qb_pst.rows() && lf.H_b.cols() == s.qb_pre.rows(), "H_b vs q_b");
  check(lf.H_i.rows() == m && lf.H_b.rows() == m, "lead-field row counts");
  check(s.q_pre.cols() == n && s.qi_pre.cols() == n && s.qi_pst.cols() == n &&
            s.qb_pre.cols() == n && s.qb_pst.cols() == n,
        "segment lengths");

  auto joined = [n](const Matrix& pre, const Matrix& pst) {
    Matrix out(pre.rows(), 2 * n);
    out << pre, pst;
    return out;
  };
  // powers are matched over both segments at once so pre and pst share one scale
  const Matrix sig = lf.H * joined(s.q_pre, s.q_pst);
  Matrix itf = lf.H_i * joined(s.qi_pre, s.qi_pst);
  Matrix bcg = lf.H_b * joined(s.qb_pre, s.qb_pst);
  Matrix mes = rng.normal_matrix(m, 2 * n);

  if (lf.H_i.cols() > 0) itf = adjust_snr(sig, itf, cfg.sinr_db);
  if (lf.H_b.cols() > 0) bcg = adjust_snr(sig, bcg, cfg.sbnr_db);
  if (std::isinf(cfg.smnr_db) && cfg.smnr_db > 0)
    mes.setZero();
  else
    mes = adjust_snr(sig, mes, cfg.smnr_db);

  Recording r;
  r.pre = {sig.leftCols(n), itf.leftCols(n), bcg.leftCols(n), mes.leftCols(n)};
  r.pst = {sig.rightCols(n), itf.rightCols(n), bcg.rightCols(n), mes.rightCols(n)};
  r.y_pre = sum_components(r.pre, cfg.pre);
  r.y_pst = sum_components(r.pst, cfg.pst);
  r.sinr_db = cfg.sinr_db;
  r.sbnr_db = cfg.sbnr_db;
  r.smnr_db = cfg.smnr_db;

  select_filter_leadfields(lf, cfg);
  return r;
}

}  // namespace eegsim
