#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "mvar.hpp"
#include "random.hpp"

namespace eegsim {

using Vec3 = Eigen::Vector3d;

struct SourceCounts {
  Eigen::Index interest = 3;
  Eigen::Index interference = 2;
  Eigen::Index background = 10;
  // how many of each role are deep (taken from the end of the role block)
  Eigen::Index deep_interest = 0;
  Eigen::Index deep_interference = 0;
  Eigen::Index deep_background = 0;

  Eigen::Index total() const { return interest + interference + background; }
};

/// Parametric stand-in for the cortical mesh: a shell for cortical sources
/// and a central ball for deep ones.
struct SourceSpace {
  double head_radius = 0.09;   // m
  double cortex_fraction = 0.8;
  double deep_fraction = 0.3;

  double cortex_radius() const { return cortex_fraction * head_radius; }
  double deep_radius() const { return deep_fraction * head_radius; }
};

struct SourceGeometry {
  std::vector<Vec3> positions;
  std::vector<Vec3> orientations;
  std::vector<ChannelRole> roles;
  std::vector<bool> deep;
  double head_radius = 0.09;

  std::size_t size() const { return positions.size(); }

  Eigen::Index count(ChannelRole role) const {
    return static_cast<Eigen::Index>(std::count(roles.begin(), roles.end(), role));
  }

  /// Indices of the sources carrying `role`, in geometry order.
  std::vector<std::size_t> indices(ChannelRole role) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roles.size(); ++i)
      if (roles[i] == role) out.push_back(i);
    return out;
  }
};

struct PerturbedGeometry {
  SourceGeometry base;
  std::vector<Vec3> positions_pert;
  std::vector<Vec3> orientations_pert;

  /// The perturbed sources as a geometry of their own.
  SourceGeometry perturbed() const {
    SourceGeometry g = base;
    g.positions = positions_pert;
    g.orientations = orientations_pert;
    return g;
  }
};

namespace detail {

inline Vec3 random_unit(Rng& rng) {
  for (;;) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

}  // namespace detail

inline SourceGeometry sample_geometry(const SourceCounts& counts, const SourceSpace& space,
                                      Rng& rng) {
  if (counts.interest < 1) throw InvalidValue("sample_geometry: at least one interest source required");
  if (counts.interference < 0 || counts.background < 0 || counts.deep_interest < 0 ||
      counts.deep_interference < 0 || counts.deep_background < 0)
    throw InvalidValue("sample_geometry: negative source count");
  if (counts.deep_interest > counts.interest || counts.deep_interference > counts.interference ||
      counts.deep_background > counts.background)
    throw InvalidValue("sample_geometry: deep count exceeds role count");

  SourceGeometry g;
  g.head_radius = space.head_radius;
  auto add_role = [&](ChannelRole role, Eigen::Index n, Eigen::Index n_deep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool is_deep = i >= n - n_deep;
      Vec3 pos, ori;
      for (;;) {
        if (!is_deep) {
          const Vec3 dir = detail::random_unit(rng);
          pos = space.cortex_radius() * dir;
          ori = dir;
        } else {
          const double r = space.deep_radius() * std::cbrt(rng.uniform(0.0, 1.0));
          pos = r * detail::random_unit(rng);
          ori = detail::random_unit(rng);
        }
        bool distinct = true;
        for (const auto& p : g.positions) distinct = distinct && (p - pos).norm() > 1e-9;
        if (distinct) break;
      }
      g.positions.push_back(pos);
      g.orientations.push_back(ori);
      g.roles.push_back(role);
      g.deep.push_back(is_deep);
    }
  };
  add_role(ChannelRole::Interest, counts.interest, counts.deep_interest);
  add_role(ChannelRole::Interference, counts.interference, counts.deep_interference);
  add_role(ChannelRole::Background, counts.background, counts.deep_background);
  return g;
}

/// Rotates `o` by `azimuth` and `elevation` in the tangent frame at `o`.
/// The result satisfies dot(o, result) = cos(azimuth) * cos(elevation).
inline Vec3 rotate_orientation(const Vec3& o, double azimuth, double elevation) {
  Vec3 t1 = Vec3::UnitZ().cross(o);
  if (t1.norm() < 1e-8) t1 = Vec3::UnitX().cross(o);
  t1.normalize();
  const Vec3 t2 = o.cross(t1);
  const Vec3 r = std::cos(elevation) * (std::cos(azimuth) * o + std::sin(azimuth) * t1) +
                 std::sin(elevation) * t2;
  return r.normalized();
}

inline PerturbedGeometry perturb_geometry(const SourceGeometry& geom, double cube_edge,
                                          double cone_half_angle, Rng& rng) {
  if (cube_edge < 0.0) throw InvalidValue("perturb_geometry: cube_edge must be >= 0");
  if (cone_half_angle < 0.0 || cone_half_angle >= std::numbers::pi / 2)
    throw InvalidValue("perturb_geometry: cone half-angle must lie in [0, pi/2)");

  PerturbedGeometry out{geom, geom.positions, geom.orientations};
  const double half = 0.5 * cube_edge;
  // keep perturbed sources clear of the scalp surface
  const double max_radius = 0.98 * geom.head_radius;
  for (std::size_t i = 0; i < geom.size(); ++i) {
    if (cube_edge > 0.0) {
      Vec3 p = geom.positions[i];
      for (int c = 0; c < 3; ++c) p(c) += rng.uniform(-half, half);
      if (p.norm() > max_radius) p *= max_radius / p.norm();
      out.positions_pert[i] = p;
    }
    if (cone_half_angle > 0.0) {
      const double az = rng.uniform(-cone_half_angle, cone_half_angle);
      const double el = rng.uniform(-cone_half_angle, cone_half_angle);
      out.orientations_pert[i] = rotate_orientation(geom.orientations[i], az, el);
    }
  }
  return out;
}

/// First derivative of a Gaussian, sign-flipped so that the waveform rises
/// first: w[t] = -amplitude * z * exp(-z^2/2), z = (t - center) / width.
inline Vector erp_waveform(Eigen::Index n, double amplitude, double center, double width) {
  if (!(width > 0.0)) throw InvalidValue("erp_waveform: width must be positive");
  Vector w(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double z = (static_cast<double>(t) - center) / width;
    w(t) = -amplitude * z * std::exp(-0.5 * z * z);
  }
  return w;
}

struct SignalConfig {
  Eigen::Index n00 = 2000;
  Eigen::Index interest_order = 6;
  Eigen::Index background_order = 6;
  double frac_ones = 0.2;
  double stab_limit = 0.95;
  CoeffRange range{-0.3, 0.3};
  int iter_limit = 1000;
  Eigen::Index burn_in = kDefaultBurnIn;
  bool erps = false;
  // ERP placement inside the pst segment, as fractions of n00
  double erp_center_fraction = 0.5;
  double erp_width_fraction = 0.05;
};

/// Generators for the interest and background activity. The background
/// model is absent when there are no background sources.
struct SourceModels {
  MvarModel interest;
  std::optional<MvarModel> background;
};

struct SourceSignals {
  Matrix q_pre, q_pst;
  Matrix qi_pre, qi_pst;
  Matrix qb_pre, qb_pst;
  Matrix erp;
  SourceModels models;
};

/// Composite A00 view over the interest, interference and background
/// channels. Interference rows are derived, not autoregressive, so their
/// block is zero.
inline CompositeMvar composite_model(const SourceModels& models, Eigen::Index interference) {
  const Eigen::Index l = models.interest.dim;
  const Eigen::Index pb = models.background ? models.background->dim : 0;
  const Eigen::Index order =
      std::max(models.interest.order, models.background ? models.background->order : 0);
  const Eigen::Index dim = l + interference + pb;

  CompositeMvar c;
  c.blocks = MvarModel::zeros(dim, order);
  c.blocks.noise_cov.setZero();
  c.blocks.noise_cov.topLeftCorner(l, l) = models.interest.noise_cov;
  for (Eigen::Index s = 0; s < models.interest.order; ++s)
    c.blocks.coeffs[static_cast<std::size_t>(s)].topLeftCorner(l, l) =
        models.interest.coeffs[static_cast<std::size_t>(s)];
  if (models.background) {
    c.blocks.noise_cov.bottomRightCorner(pb, pb) = models.background->noise_cov;
    for (Eigen::Index s = 0; s < models.background->order; ++s)
      c.blocks.coeffs[static_cast<std::size_t>(s)].bottomRightCorner(pb, pb) =
          models.background->coeffs[static_cast<std::size_t>(s)];
  }
  c.channel_roles.assign(static_cast<std::size_t>(l), ChannelRole::Interest);
  c.channel_roles.insert(c.channel_roles.end(), static_cast<std::size_t>(interference),
                         ChannelRole::Interference);
  c.channel_roles.insert(c.channel_roles.end(), static_cast<std::size_t>(pb),
                         ChannelRole::Background);
  return c;
}

inline SourceModels sample_source_models(const SourceGeometry& geom, const SignalConfig& cfg,
                                         Rng& rng) {
  const Eigen::Index l = geom.count(ChannelRole::Interest);
  const Eigen::Index pb = geom.count(ChannelRole::Background);
  if (l < 1) throw InvalidValue("generate_source_signals: no interest sources");
  SourceModels m;
  const MaskMatrix mask_q = make_mask(l, cfg.frac_ones, rng);
  m.interest = sample_stable_mvar(l, cfg.interest_order, mask_q, cfg.stab_limit, cfg.range,
                                  cfg.iter_limit, rng);
  if (pb > 0) {
    const MaskMatrix mask_b = make_mask(pb, cfg.frac_ones, rng);
    m.background = sample_stable_mvar(pb, cfg.background_order, mask_b, cfg.stab_limit,
                                      cfg.range, cfg.iter_limit, rng);
  }
  return m;
}

namespace detail {

inline double row_power(const Eigen::Ref<const Vector>& row) {
  return row.size() ? row.squaredNorm() / static_cast<double>(row.size()) : 0.0;
}

/// White Gaussian row rescaled to mean power `power` exactly.
inline Vector matched_noise(Eigen::Index n, double power, Rng& rng) {
  Vector v(n);
  for (Eigen::Index t = 0; t < n; ++t) v(t) = rng.normal();
  const double p = row_power(v);
  if (power <= 0.0 || p <= 0.0) return Vector::Zero(n);
  return v * std::sqrt(power / p);
}

/// q_i = -q + n_i with power(n_i) = power(q) per row. Rows past l are pure
/// noise matched to the mean interest power.
inline Matrix interference_from(const Matrix& q, Eigen::Index k, Rng& rng) {
  const Eigen::Index l = q.rows();
  const Eigen::Index n = q.cols();
  Matrix qi(k, n);
  double mean_power = 0.0;
  for (Eigen::Index r = 0; r < l; ++r) mean_power += row_power(q.row(r).transpose());
  mean_power /= static_cast<double>(std::max<Eigen::Index>(l, 1));
  for (Eigen::Index r = 0; r < k; ++r) {
    if (r < l) {
      const double p = row_power(q.row(r).transpose());
      qi.row(r) = -q.row(r) + matched_noise(n, p, rng).transpose();
    } else {
      qi.row(r) = matched_noise(n, mean_power, rng).transpose();
    }
  }
  return qi;
}

}  // namespace detail

/// Draws one realization of source activity from fixed generators.
inline SourceSignals simulate_source_signals(const SourceModels& models,
                                             const SourceGeometry& geom,
                                             const SignalConfig& cfg, Rng& rng) {
  const Eigen::Index l = geom.count(ChannelRole::Interest);
  const Eigen::Index k = geom.count(ChannelRole::Interference);
  const Eigen::Index pb = geom.count(ChannelRole::Background);
  const Eigen::Index n = cfg.n00;
  if (models.interest.dim != l)
    throw ShapeMismatch("simulate_source_signals: interest model dim differs from geometry");
  if ((pb > 0) != models.background.has_value() || (pb > 0 && models.background->dim != pb))
    throw ShapeMismatch("simulate_source_signals: background model differs from geometry");

  SourceSignals s;
  s.models = models;
  const Matrix q = simulate(models.interest, 2 * n, cfg.burn_in, rng);
  s.q_pre = q.leftCols(n);
  s.q_pst = q.rightCols(n);

  if (pb > 0) {
    const Matrix qb = simulate(*models.background, 2 * n, cfg.burn_in, rng);
    s.qb_pre = qb.leftCols(n);
    s.qb_pst = qb.rightCols(n);
  } else {
    s.qb_pre = s.qb_pst = Matrix(0, n);
  }

  s.qi_pre = detail::interference_from(s.q_pre, k, rng);
  s.qi_pst = detail::interference_from(s.q_pst, k, rng);

  s.erp = Matrix::Zero(l, n);
  if (cfg.erps) {
    const double center = cfg.erp_center_fraction * static_cast<double>(n);
    const double width = cfg.erp_width_fraction * static_cast<double>(n);
    for (Eigen::Index r = 0; r < l; ++r) {
      const auto row = s.q_pst.row(r);
      const double sd = std::sqrt((row.array() - row.mean()).square().mean());
      s.erp.row(r) = erp_waveform(n, sd, center, width).transpose();
    }
    s.q_pst += s.erp;
  }
  return s;
}

inline SourceSignals generate_source_signals(const SourceGeometry& geom, const SignalConfig& cfg,
                                             Rng& rng) {
  const SourceModels models = sample_source_models(geom, cfg, rng);
  return simulate_source_signals(models, geom, cfg, rng);
}

/// CSV with columns role,deep,x,y,z,ox,oy,oz (meters, unit orientations).
inline void write_geometry_csv(std::ostream& os, const std::vector<Vec3>& positions,
                               const std::vector<Vec3>& orientations, const SourceGeometry& g) {
  os << "role,deep,x,y,z,ox,oy,oz\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    char buf[256];
    const Vec3& p = positions[i];
    const Vec3& o = orientations[i];
    std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", to_string(g.roles[i]),
                  g.deep[i] ? 1 : 0, p.x(), p.y(), p.z(), o.x(), o.y(), o.z());
    os << buf;
  }
}

inline void write_geometry_csv(std::ostream& os, const SourceGeometry& g) {
  write_geometry_csv(os, g.positions, g.orientations, g);
}

}  // namespace eegsim
