#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "connectivity.hpp"
#include "errors.hpp"
#include "filters.hpp"
#include "forward_model.hpp"
#include "matrix_io.hpp"
#include "metrics.hpp"
#include "model_json.hpp"
#include "random.hpp"
#include "source_model.hpp"

namespace eegsim {

/// Failure inside one realization, tagged with where it happened.
class StageError : public Error {
 public:
  StageError(int realization, std::string stage, const std::string& what)
      : Error("realization " + std::to_string(realization) + ", stage '" + stage + "': " + what),
        realization_(realization),
        stage_(std::move(stage)) {}

  int realization() const { return realization_; }
  const std::string& stage() const { return stage_; }

 private:
  int realization_;
  std::string stage_;
};

/// Stream seeds derived from the root SEED. Each depends only on
/// (root, index, tag), so realizations can run in any order.
struct StreamSeeds {
  std::uint64_t root = 0;
  std::uint64_t geometry = 0;
  std::uint64_t models = 0;
  std::vector<std::uint64_t> realizations;  // index r-1 holds realization r

  static StreamSeeds derive(std::uint64_t root, int realizations) {
    StreamSeeds s;
    s.root = root;
    s.geometry = derive_seed(root, 0, "geometry");
    s.models = derive_seed(root, 0, "models");
    for (int r = 1; r <= realizations; ++r)
      s.realizations.push_back(derive_seed(root, static_cast<std::uint64_t>(r), "realization"));
    return s;
  }
};

/// Everything shared by all realizations of a run.
struct RunContext {
  SetupConfig config;
  StreamSeeds seeds;
  SourceGeometry geometry;
  PerturbedGeometry perturbed;
  ElectrodeMontage montage;
  LeadfieldSet leadfields;
  SourceModels models;
  std::vector<double> freqs;
};

inline RunContext prepare_run(const SetupConfig& config) {
  validate(config);
  RunContext ctx;
  ctx.config = config;
  ctx.seeds = StreamSeeds::derive(config.SEED, config.K00);

  Rng geo_rng(ctx.seeds.geometry);
  ctx.geometry = sample_geometry(config.srcs, config.source_space(), geo_rng);
  ctx.perturbed = perturb_geometry(ctx.geometry, config.CUBE, config.CONE, geo_rng);
  ctx.montage = fibonacci_montage(config.montage_size, config.head.radius);
  ctx.leadfields = leadfield_sphere(ctx.perturbed, ctx.montage, config.head);

  Rng model_rng(ctx.seeds.models);
  ctx.models = sample_source_models(ctx.geometry, config.signal_config(), model_rng);
  ctx.freqs = frequency_grid(config.PDC_RES);
  return ctx;
}

struct RealizationResult {
  std::vector<ErrorRow> rows;
  std::vector<SpatialFilter> filters;
};

/// One pass of generate -> measure -> filter -> reconstruct -> evaluate.
inline RealizationResult run_realization(const RunContext& ctx, int r) {
  const SetupConfig& cfg = ctx.config;
  Rng rng(ctx.seeds.realizations.at(static_cast<std::size_t>(r - 1)));
  std::string stage;
  try {
    stage = "signals";
    const SourceSignals sig =
        simulate_source_signals(ctx.models, ctx.geometry, cfg.signal_config(), rng);

    stage = "measurement";
    LeadfieldSet lf = ctx.leadfields;
    const Recording rec = compose_measurement(sig, lf, cfg.measurement_config(), rng);

    stage = "covariances";
    const CovarianceSet cov = estimate_covariances(rec, sig);

    stage = "filters";
    FilterBankOptions opt;
    opt.sig_dim = cfg.RANK_EIG;
    opt.mvp_rank = cfg.MVP_RANK;
    RealizationResult out;
    out.filters = build_filters(cfg.filters, cov, lf, opt, rng);

    stage = "evaluation";
    for (const auto& f : out.filters) {
      const Matrix q_hat = reconstruct(f, rec.y_pst);
      ErrorRow row = evaluate(sig.q_pst, q_hat, ctx.models.interest, cfg.P00, ctx.freqs, cfg.transfer);
      row.filter = f.spec;
      row.realization = r;
      out.rows.push_back(std::move(row));
    }
    return out;
  } catch (const std::exception& e) {
    throw StageError(r, stage, e.what());
  }
}

struct RunOptions {
  int jobs = 1;
  bool dump_filters = false;
};

struct RunOutput {
  std::vector<ErrorRow> rows;       // realization-major, filter order within
  std::vector<SummaryRow> summary;
  RunContext context;
  std::vector<SpatialFilter> first_filters;  // filters of realization 1
};

/// Runs all realizations, on up to `jobs` threads. Results are collected by
/// realization index, so the output does not depend on `jobs`.
inline RunOutput simulate_run(const SetupConfig& config, int jobs = 1) {
  RunOutput out;
  out.context = prepare_run(config);
  const int k = config.K00;
  std::vector<RealizationResult> results(static_cast<std::size_t>(k));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
  std::atomic<int> next{1};

  auto worker = [&]() {
    for (int r = next++; r <= k; r = next++) {
      try {
        results[static_cast<std::size_t>(r - 1)] = run_realization(out.context, r);
      } catch (...) {
        errors[static_cast<std::size_t>(r - 1)] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, k);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (auto& res : results)
    out.rows.insert(out.rows.end(), res.rows.begin(), res.rows.end());
  out.first_filters = std::move(results.front().filters);
  out.summary = aggregate(out.rows);
  return out;
}

inline nlohmann::ordered_json make_manifest(const RunOutput& run, const RunOptions& opt) {
  using nlohmann::ordered_json;
  const RunContext& ctx = run.context;
  ordered_json m;
  m["format"] = "eegsim-run/1";
  m["config"] = to_json(ctx.config);
  auto unsupported = ordered_json::array();
  for (auto k : kUnsupportedKeys) unsupported.push_back(std::string(k));
  m["unsupported_keys"] = unsupported;

  ordered_json seeds;
  seeds["root"] = ctx.seeds.root;
  seeds["geometry"] = ctx.seeds.geometry;
  seeds["models"] = ctx.seeds.models;
  auto per = ordered_json::array();
  for (std::size_t i = 0; i < ctx.seeds.realizations.size(); ++i)
    per.push_back({{"realization", i + 1}, {"seed", ctx.seeds.realizations[i]}});
  seeds["realizations"] = per;
  m["seeds"] = seeds;

  ordered_json models;
  models["interest"] = to_json(ctx.models.interest);
  models["background"] = ctx.models.background ? to_json(*ctx.models.background) : ordered_json();
  {
    const auto st = is_stable(ctx.models.interest, ctx.config.STAB);
    models["interest_spectral_radius"] = st.spectral_radius;
  }
  m["models"] = models;

  m["geometry"] = {{"interest", ctx.geometry.count(ChannelRole::Interest)},
                   {"interference", ctx.geometry.count(ChannelRole::Interference)},
                   {"background", ctx.geometry.count(ChannelRole::Background)},
                   {"electrodes", ctx.montage.size()}};
  auto files = ordered_json::array({"manifest.json", "geometry.csv", "geometry_perturbed.csv",
                                    "results.csv", "summary.csv"});
  if (opt.dump_filters)
    for (const auto& f : run.first_filters) files.push_back("filters/" + f.spec.name() + ".csv");
  m["files"] = files;
  return m;
}

namespace detail {

template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  fn(os);
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Runs the benchmark and persists it into `out_dir`.
inline RunOutput run(const SetupConfig& config, const std::filesystem::path& out_dir,
                     const RunOptions& opt = {}) {
  RunOutput out = simulate_run(config, opt.jobs);
  std::filesystem::create_directories(out_dir);
  const RunContext& ctx = out.context;

  detail::write_file(out_dir / "geometry.csv",
                     [&](std::ostream& os) { write_geometry_csv(os, ctx.geometry); });
  detail::write_file(out_dir / "geometry_perturbed.csv", [&](std::ostream& os) {
    write_geometry_csv(os, ctx.perturbed.positions_pert, ctx.perturbed.orientations_pert, ctx.geometry);
  });
  detail::write_file(out_dir / "results.csv", [&](std::ostream& os) { write_results_csv(os, out.rows); });
  detail::write_file(out_dir / "summary.csv",
                     [&](std::ostream& os) { write_summary_csv(os, out.summary); });
  if (opt.dump_filters) {
    std::filesystem::create_directories(out_dir / "filters");
    for (const auto& f : out.first_filters) save_matrix_csv(out_dir / "filters" / (f.spec.name() + ".csv"), f.W);
  }
  detail::write_file(out_dir / "manifest.json",
                     [&](std::ostream& os) { os << make_manifest(out, opt).dump(2) << '\n'; });
  return out;
}

/// Fixed-width comparison table: filters as rows, measures as columns,
/// cells "mean (std)" with 4 significant digits.
inline std::string render_summary(const std::vector<SummaryRow>& rows) {
  std::vector<std::string> filters, measures_seen;
  std::map<std::pair<std::string, std::string>, std::string> cells;
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    if (std::find(filters.begin(), filters.end(), r.filter) == filters.end()) filters.push_back(r.filter);
    if (std::find(measures_seen.begin(), measures_seen.end(), r.measure) == measures_seen.end())
      measures_seen.push_back(r.measure);
    cells[{r.filter, r.measure}] = fmt(r.mean) + " (" + fmt(r.std) + ")";
  }
  std::size_t first_width = std::string("filter").size();
  for (const auto& f : filters) first_width = std::max(first_width, f.size());
  std::vector<std::size_t> widths;
  for (const auto& m : measures_seen) {
    std::size_t w = m.size();
    for (const auto& f : filters) {
      const auto it = cells.find({f, m});
      if (it != cells.end()) w = std::max(w, it->second.size());
    }
    widths.push_back(w);
  }
  std::ostringstream os;
  auto pad = [&](const std::string& s, std::size_t w, bool left) {
    if (left) os << s << std::string(w - s.size(), ' ');
    else os << std::string(w - s.size(), ' ') << s;
  };
  pad("filter", first_width, true);
  for (std::size_t c = 0; c < measures_seen.size(); ++c) {
    os << "  ";
    pad(measures_seen[c], widths[c], false);
  }
  os << '\n';
  std::size_t total = first_width;
  for (auto w : widths) total += 2 + w;
  os << std::string(total, '-') << '\n';
  for (const auto& f : filters) {
    pad(f, first_width, true);
    for (std::size_t c = 0; c < measures_seen.size(); ++c) {
      os << "  ";
      const auto it = cells.find({f, measures_seen[c]});
      pad(it == cells.end() ? std::string("-") : it->second, widths[c], false);
    }
    os << '\n';
  }
  return os.str();
}

inline std::string report(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "summary.csv";
  std::ifstream is(path);
  if (!is) throw MissingRun("no summary.csv in '" + run_dir.string() + "'");
  return render_summary(read_summary_csv(is, path.string()));
}

enum class LeadfieldRole { Interest, Interference, Background, All };

/// Lead-field of the run geometry implied by `config`, as exported by the
/// CLI. `perturbed` selects the perturbed source positions.
inline Matrix export_leadfield(const SetupConfig& config, LeadfieldRole role, bool perturbed = false) {
  validate(config);
  const StreamSeeds seeds = StreamSeeds::derive(config.SEED, 0);
  Rng geo_rng(seeds.geometry);
  const SourceGeometry geom = sample_geometry(config.srcs, config.source_space(), geo_rng);
  const PerturbedGeometry pg = perturb_geometry(geom, config.CUBE, config.CONE, geo_rng);
  const ElectrodeMontage montage = fibonacci_montage(config.montage_size, config.head.radius);
  const LeadfieldSet lf = leadfield_sphere(pg, montage, config.head);
  const Matrix& h = perturbed ? lf.H_pert : lf.H;
  const Matrix& hi = perturbed ? lf.Hi_pert : lf.H_i;
  const Matrix& hb = perturbed ? lf.Hb_pert : lf.H_b;
  switch (role) {
    case LeadfieldRole::Interest: return h;
    case LeadfieldRole::Interference: return hi;
    case LeadfieldRole::Background: return hb;
    case LeadfieldRole::All: {
      Matrix all(h.rows(), h.cols() + hi.cols() + hb.cols());
      all << h, hi, hb;
      return all;
    }
  }
  return h;
}

}  // namespace eegsim
