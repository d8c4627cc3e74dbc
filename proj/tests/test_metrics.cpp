#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eegsim/metrics.hpp"

using namespace eegsim;

namespace {

struct Truth {
  MvarModel model;
  Matrix q;
};

Truth make_truth(std::uint64_t seed) {
  Rng rng(seed);
  const MaskMatrix mask = make_mask(3, 0.3, rng);
  Truth t{sample_stable_mvar(3, 2, mask, 0.95, {-0.3, 0.3}, 1000, rng), {}};
  t.q = simulate(t.model, 3000, kDefaultBurnIn, rng);
  return t;
}

ErrorRow row(const char* filter, int r, double euclid, double corr) {
  ErrorRow e;
  e.filter = parse_filter_spec(filter);
  e.realization = r;
  e.signal_euclid = euclid;
  e.signal_corr = {corr, corr};
  e.signal_corr_mean = corr;
  e.mvar_coeff_err = euclid * 2;
  e.pdc_err = euclid * 3;
  e.dtf_err = euclid * 4;
  return e;
}

}  // namespace

TEST(Pearson, ConstantRowIsZero) {
  EXPECT_EQ(pearson(Vector::Ones(10), Vector::LinSpaced(10, 0, 1)), 0.0);
  EXPECT_NEAR(pearson(Vector::LinSpaced(10, 0, 1), Vector::LinSpaced(10, 5, 3)), -1.0, 1e-15);
}

TEST(Evaluate, PerfectReconstruction) {
  const Truth t = make_truth(1);
  const MvarModel fitted = fit(t.q, 2);
  const ErrorRow e = evaluate(t.q, t.q, fitted, 2, frequency_grid(33));
  EXPECT_EQ(e.signal_euclid, 0.0);
  for (double c : e.signal_corr) EXPECT_NEAR(c, 1.0, 1e-12);
  EXPECT_TRUE(e.fit_ok);
  EXPECT_LT(e.mvar_coeff_err, 1e-12);
  EXPECT_LT(e.pdc_err, 1e-12);
  EXPECT_LT(e.dtf_err, 1e-12);
}

TEST(Evaluate, ScalingChangesEuclidOnly) {
  const Truth t = make_truth(2);
  const auto freqs = frequency_grid(33);
  const ErrorRow a = evaluate(t.q, t.q, t.model, 2, freqs);
  const ErrorRow b = evaluate(t.q, 2.0 * t.q, t.model, 2, freqs);
  EXPECT_NEAR(b.signal_euclid, 1.0, 1e-12);
  EXPECT_NEAR(b.signal_corr_mean, 1.0, 1e-12);
  EXPECT_NEAR(b.mvar_coeff_err, a.mvar_coeff_err, 1e-10);
  EXPECT_NEAR(b.pdc_err, a.pdc_err, 1e-10);
}

TEST(Evaluate, WhiteNoiseIsUncorrelated) {
  const Truth t = make_truth(3);
  Rng rng(4);
  const ErrorRow e = evaluate(t.q, rng.normal_matrix(3, 3000), t.model, 2, frequency_grid(33));
  for (double c : e.signal_corr) EXPECT_LT(std::abs(c), 0.1);
  EXPECT_GT(e.mvar_coeff_err, 0.1);
}

TEST(Evaluate, RankDeficientReconstructionIsFlagged) {
  const Truth t = make_truth(5);
  Matrix q_hat = t.q;
  q_hat.row(2) = q_hat.row(1);
  const ErrorRow e = evaluate(t.q, q_hat, t.model, 2, frequency_grid(9));
  EXPECT_FALSE(e.fit_ok);
  EXPECT_TRUE(std::isnan(e.mvar_coeff_err));
  EXPECT_TRUE(std::isnan(e.pdc_err));
  EXPECT_TRUE(std::isfinite(e.signal_corr_mean));
}

TEST(Evaluate, ShapeMismatch) {
  const Truth t = make_truth(6);
  EXPECT_THROW(evaluate(t.q, t.q.leftCols(10), t.model, 2, frequency_grid(9)), ShapeMismatch);
}

TEST(Aggregate, SingleRealizationHasZeroStd) {
  const auto s = aggregate({row("ZF", 1, 0.5, 0.8)});
  ASSERT_FALSE(s.empty());
  for (const auto& r : s) {
    EXPECT_EQ(r.filter, "ZF");
    EXPECT_EQ(r.std, 0.0);
  }
  EXPECT_EQ(s.front().measure, "signal_euclid");
  EXPECT_EQ(s.front().mean, 0.5);
}

TEST(Aggregate, MeanAndSampleStd) {
  const auto s = aggregate({row("NL", 1, 1.0, 0.5), row("NL", 2, 3.0, 0.5), row("NL", 3, 5.0, 0.5)});
  EXPECT_EQ(s[0].mean, 3.0);
  EXPECT_EQ(s[0].std, 2.0);
  EXPECT_EQ(s[1].measure, "signal_corr_mean");
  EXPECT_EQ(s[1].std, 0.0);
}

TEST(Aggregate, SkipsFailedRefits) {
  ErrorRow bad = row("MVP_F_1", 2, 9.0, 0.1);
  bad.fit_ok = false;
  bad.mvar_coeff_err = bad.pdc_err = bad.dtf_err = std::numeric_limits<double>::quiet_NaN();
  const auto s = aggregate({row("MVP_F_1", 1, 1.0, 0.5), bad});
  const auto it = std::find_if(s.begin(), s.end(), [](const SummaryRow& r) { return r.measure == "pdc_err"; });
  ASSERT_NE(it, s.end());
  EXPECT_EQ(it->mean, 3.0);
  const auto ok = std::find_if(s.begin(), s.end(), [](const SummaryRow& r) { return r.measure == "fit_ok"; });
  EXPECT_EQ(ok->mean, 0.5);
}

TEST(Aggregate, IndependentOfInputOrder) {
  std::vector<ErrorRow> rows;
  for (int r = 1; r <= 6; ++r) {
    rows.push_back(row("LCMV_R", r, 0.1 * r + 0.013, 1.0 / (r + 1.7)));
    rows.push_back(row("RANDN", r, 1.0 + 0.37 * r, 0.01 * r));
  }
  const auto a = aggregate(rows);
  std::reverse(rows.begin(), rows.end());
  std::swap(rows[1], rows[7]);
  const auto b = aggregate(rows);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].filter, b[i].filter);
    EXPECT_EQ(a[i].mean, b[i].mean);
    EXPECT_EQ(a[i].std, b[i].std);
  }
  EXPECT_EQ(a.front().filter, "LCMV_R");
}

TEST(Csv, SummaryRoundTrip) {
  const auto s = aggregate({row("NL", 1, 1.0 / 3.0, 0.5), row("NL", 2, 0.7, 0.25)});
  std::ostringstream os;
  write_summary_csv(os, s);
  std::istringstream is(os.str());
  const auto back = read_summary_csv(is);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].measure, s[i].measure);
    EXPECT_EQ(back[i].mean, s[i].mean);
    EXPECT_EQ(back[i].std, s[i].std);
  }
}

TEST(Csv, ResultsSortedByRealizationWithNan) {
  ErrorRow bad = row("ZF", 1, 0.2, 0.9);
  bad.pdc_err = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream os;
  write_results_csv(os, {row("ZF", 2, 0.1, 0.9), row("LCMV_R", 2, 0.3, 0.8), bad});
  std::istringstream is(os.str());
  const auto cells = read_results_csv(is);
  ASSERT_FALSE(cells.empty());
  EXPECT_EQ(cells.front().realization, 1);
  EXPECT_EQ(cells.back().realization, 2);
  EXPECT_EQ(cells.back().filter, "ZF");
  const auto nan_cell = std::find_if(cells.begin(), cells.end(), [](const ResultCell& c) {
    return c.realization == 1 && c.measure == "pdc_err";
  });
  EXPECT_TRUE(std::isnan(nan_cell->value));
}

TEST(Csv, CorruptSummaryNamesLine) {
  std::istringstream is("filter,measure,mean,std\nNL,signal_euclid,0.5,0\nNL,pdc_err,abc,0\n");
  try {
    read_summary_csv(is, "summary.csv");
    FAIL() << "no exception";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("summary.csv:3"), std::string::npos);
  }
  std::istringstream header("filter;measure\n");
  EXPECT_THROW(read_summary_csv(header), ParseError);
}
