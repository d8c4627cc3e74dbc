// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>

#include "eegsim/eegsim.hpp"
#include "test_support.hpp"

using namespace eegsim;
namespace fs = std::filesystem;

namespace {

// criterion 1
constexpr int kConstraintInstances = 50;
constexpr Eigen::Index kM = 32, kL = 5, kK = 3;
constexpr double kConstraintTol = 1e-8;
constexpr double kConstraintSeconds = 10.0;
// criterion 2
constexpr int kNormalizationModels = 20;
constexpr std::size_t kFrequencies = 129;
constexpr double kNormalizationTol = 1e-10;
constexpr double kNormalizationSeconds = 10.0;
// criterion 3
constexpr Eigen::Index kFitDim = 5, kFitOrder = 2, kFitSamples = 20000;
constexpr int kFitSeeds = 10;
constexpr double kFitTol = 0.05;
constexpr double kFitSeconds = 30.0;
// criterion 4
constexpr double kDegeneracyTol = 1e-8;
// criterion 5
constexpr Eigen::Index kElectrodes = 128;
constexpr double kCentralTol = 1e-10;
constexpr double kEquivarianceTol = 1e-9;
// criterion 6
constexpr int kSnrPairs = 100;
constexpr double kSnrTol = 1e-9;
// criterion 7
constexpr double kLcmvCorrMin = 0.9;
constexpr double kLcmvOverRandnMin = 0.3;
constexpr double kEndToEndSeconds = 120.0;

int failures = 0;

void report_line(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::vector<testkit::FilterInstance> constraint_instances() {
  std::vector<testkit::FilterInstance> out;
  for (int i = 0; i < kConstraintInstances; ++i) {
    Rng rng(derive_seed(2024, static_cast<std::uint64_t>(i), "constraint"));
    out.push_back(testkit::random_instance(kM, kL, kK, rng));
  }
  return out;
}

void constraint_suite(const std::vector<testkit::FilterInstance>& instances) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0, worst_null = 0.0;
  for (const auto& inst : instances) {
    const Matrix& h = inst.lf.H_f;
    const Matrix eye = Matrix::Identity(kL, kL);
    const SpatialFilter nl = nulling(inst.lf.H_c, inst.cov.R, kL);
    for (const Matrix& w : {lcmv(h, inst.cov.R, FilterKind::LCMV_R).W, lcmv(h, inst.cov.N, FilterKind::LCMV_N).W,
                            nl.W, zero_forcing(h).W})
      worst = std::max(worst, (w * h - eye).norm());
    worst_null = std::max(worst_null, (nl.W * inst.lf.Hi_f).norm());
  }
  const double secs = seconds_since(t0);
  report_line(1, "constraint suite",
              worst <= kConstraintTol && worst_null <= kConstraintTol && secs < kConstraintSeconds,
              fmt("max |WH-I|_F %.3g, max |W_NL H_i|_F %.3g (tol %g), %.2f s (limit %g s)", worst,
                  worst_null, kConstraintTol, secs, kConstraintSeconds));
}

void normalization_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index dims[] = {2, 5, 9};
  const Eigen::Index orders[] = {1, 6};
  const auto freqs = frequency_grid(kFrequencies);
  double worst = 0.0;
  for (int i = 0; i < kNormalizationModels; ++i) {
    const Eigen::Index d = dims[i % 3];
    const Eigen::Index p = orders[(i / 3) % 2];
    Rng rng(derive_seed(2024, static_cast<std::uint64_t>(i), "normalization"));
    const MaskMatrix mask = make_mask(d, 0.2, rng);
    const MvarModel m = sample_stable_mvar(d, p, mask, 0.95, {-0.3, 0.3}, 10000, rng);
    const auto c = connectivity(m, freqs);
    for (std::size_t f = 0; f < freqs.size(); ++f) {
      worst = std::max(worst, (c.pdc[f].colwise().squaredNorm().array() - 1.0).abs().maxCoeff());
      worst = std::max(worst, (c.dtf[f].rowwise().squaredNorm().array() - 1.0).abs().maxCoeff());
    }
  }
  const double secs = seconds_since(t0);
  report_line(2, "PDC/DTF normalization", worst <= kNormalizationTol && secs < kNormalizationSeconds,
              fmt("max |sum-1| %.3g over %d models x %zu frequencies (tol %g), %.2f s (limit %g s)", worst,
                  kNormalizationModels, kFrequencies, kNormalizationTol, secs, kNormalizationSeconds));
}

void fit_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int monotone = 0;
  for (int s = 0; s < kFitSeeds; ++s) {
    Rng rng(derive_seed(2024, static_cast<std::uint64_t>(s), "fit"));
    const MaskMatrix mask = make_mask(kFitDim, 0.2, rng);
    const MvarModel truth = sample_stable_mvar(kFitDim, kFitOrder, mask, 0.95, {-0.3, 0.3}, 10000, rng);
    const Matrix x = simulate(truth, 4 * kFitSamples, kDefaultBurnIn, rng);
    const auto err = [&](Eigen::Index n) {
      return (fit(x.leftCols(n), kFitOrder).stacked() - truth.stacked()).cwiseAbs().maxCoeff();
    };
    const double e1 = err(kFitSamples);
    const double e4 = err(4 * kFitSamples);
    worst = std::max(worst, e1);
    if (e4 < e1) ++monotone;
  }
  const double secs = seconds_since(t0);
  report_line(3, "MVAR fit recovery", worst <= kFitTol && monotone == kFitSeeds && secs < kFitSeconds,
              fmt("max-abs error %.4f at n=%ld (tol %g), 4n improves %d/%d seeds, %.2f s (limit %g s)", worst,
                  static_cast<long>(kFitSamples), kFitTol, monotone, kFitSeeds, secs, kFitSeconds));
}

void mv_pure_degeneracy(const std::vector<testkit::FilterInstance>& instances) {
  double worst = 0.0;
  for (const auto& inst : instances) {
    const Matrix& h = inst.lf.H_f;
    const SpatialFilter r = lcmv(h, inst.cov.R, FilterKind::LCMV_R);
    const SpatialFilter n = lcmv(h, inst.cov.N, FilterKind::LCMV_N);
    const SpatialFilter nl = nulling(inst.lf.H_c, inst.cov.R, kL);
    for (int v = 1; v <= 3; ++v) {
      const Matrix& paired = v == 3 ? n.W : r.W;
      worst = std::max(worst, (mv_pure(r, n, nl, inst.cov, MvPureFamily::F, v, kL, h).W - paired).norm());
      worst = std::max(worst, (mv_pure(r, n, nl, inst.cov, MvPureFamily::I, v, kL, h).W - nl.W).norm());
    }
  }
  report_line(4, "MV-PURE degeneracy", worst <= kDegeneracyTol,
              fmt("max |W_MVP - W_paired|_F %.3g at rank l (tol %g)", worst, kDegeneracyTol));
}

void sphere_oracle() {
  const HeadModel head;
  const auto electrodes = fibonacci_montage(kElectrodes, head.radius).positions;
  const double scale = 3.0 / (4.0 * std::numbers::pi * head.conductivity * head.radius * head.radius);
  double central = 0.0;
  for (const Vec3& p : {Vec3(0, 0, 1), Vec3(0.3, -0.5, 0.8).normalized()})
    for (const auto& e : electrodes)
      central = std::max(central, std::abs(dipole_potential(Vec3::Zero(), p, e, head) -
                                           scale * p.dot(e.normalized())));

  double equivariance = 0.0, closed_form = 0.0;
  Rng rng(derive_seed(2024, 0, "sphere"));
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 src = rng.uniform(0.05, 0.9) * head.radius *
                     Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Vec3 p = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Matrix rot = testkit::rotation(Vec3(rng.normal(), rng.normal(), rng.normal()), rng.uniform(0, 3));
    for (const auto& e : electrodes) {
      const double v = dipole_potential(src, p, e, head);
      equivariance = std::max(equivariance, std::abs(v - dipole_potential(rot * src, rot * p, rot * e, head)));
      const double oracle = testkit::closed_form_potential(src, p, e, head);
      closed_form = std::max(closed_form, std::abs(v - oracle) / std::max(1.0, std::abs(oracle)));
    }
  }
  report_line(5, "sphere oracle",
              central <= kCentralTol && equivariance <= kEquivarianceTol && closed_form <= kEquivarianceTol,
              fmt("central-dipole error %.3g (tol %g), rotation error %.3g (tol %g), closed-form rel. error %.3g",
                  central, kCentralTol, equivariance, kEquivarianceTol, closed_form));
}

void snr_exactness() {
  double worst = 0.0;
  for (int i = 0; i < kSnrPairs; ++i) {
    Rng rng(derive_seed(2024, static_cast<std::uint64_t>(i), "snr"));
    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.index(40));
    const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng.index(500));
    const Matrix ref = std::exp(rng.uniform(-5, 5)) * rng.normal_matrix(rows, cols);
    const Matrix target = std::exp(rng.uniform(-5, 5)) * rng.normal_matrix(rows, cols);
    for (double db : {-20.0, 0.0, 20.0})
      worst = std::max(worst, std::abs(snr_db(ref, adjust_snr(ref, target, db)) - db));
  }
  report_line(6, "SNR exactness", worst <= kSnrTol,
              fmt("max |achieved - requested| %.3g dB over %d pairs x 3 levels (tol %g)", worst, kSnrPairs,
                  kSnrTol));
}

double summary_mean(const std::vector<SummaryRow>& rows, const std::string& filter, const std::string& measure) {
  for (const auto& r : rows)
    if (r.filter == filter && r.measure == measure) return r.mean;
  return std::numeric_limits<double>::quiet_NaN();
}

void end_to_end_and_determinism() {
  const SetupConfig cfg;  // defaults
  const fs::path base = fs::temp_directory_path() / "eegsim_acceptance";
  fs::remove_all(base);
  const int many = 8;

  const auto t0 = std::chrono::steady_clock::now();
  const RunOutput first = run(cfg, base / "jobs8_a", {many, false});
  const double secs = seconds_since(t0);
  const double lcmv_corr = summary_mean(first.summary, "LCMV_R", "signal_corr_mean");
  const double randn_corr = summary_mean(first.summary, "RANDN", "signal_corr_mean");
  report_line(7, "end-to-end ordering",
              lcmv_corr >= kLcmvCorrMin && lcmv_corr - randn_corr >= kLcmvOverRandnMin && secs < kEndToEndSeconds,
              fmt("LCMV_R corr %.4f (min %g), LCMV_R - RANDN %.4f (min %g), %.2f s (limit %g s)", lcmv_corr,
                  kLcmvCorrMin, lcmv_corr - randn_corr, kLcmvOverRandnMin, secs, kEndToEndSeconds));

  run(cfg, base / "jobs8_b", {many, false});
  run(cfg, base / "jobs1_a", {1, false});
  run(cfg, base / "jobs1_b", {1, false});
  bool same = true;
  for (const char* file : {"results.csv", "summary.csv"}) {
    const std::string ref = slurp(base / "jobs8_a" / file);
    same = same && !ref.empty();
    for (const char* dir : {"jobs8_b", "jobs1_a", "jobs1_b"}) same = same && slurp(base / dir / file) == ref;
  }
  report_line(8, "determinism", same,
              same ? "results.csv and summary.csv byte-identical across 2 runs at --jobs 1 and 2 at --jobs 8"
                   : "outputs differ between runs");
}

}  // namespace

int main() {
  try {
    const auto instances = constraint_instances();
    constraint_suite(instances);
    normalization_suite();
    fit_recovery();
    mv_pure_degeneracy(instances);
    sphere_oracle();
    snr_exactness();
    end_to_end_and_determinism();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
