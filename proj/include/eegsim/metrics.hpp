#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "connectivity.hpp"
#include "errors.hpp"
#include "filters.hpp"
#include "matrix_io.hpp"
#include "mvar.hpp"

namespace eegsim {

/// Scores of one filter on one realization.
struct ErrorRow {
  FilterSpec filter;
  int realization = 0;
  double signal_euclid = 0.0;       // |q_hat - q|_F / |q|_F
  std::vector<double> signal_corr;  // per-source Pearson correlation
  double signal_corr_mean = 0.0;
  double mvar_coeff_err = 0.0;      // |[A_1..A_p] - [A_1..A_p]_fit|_F
  double pdc_err = 0.0;
  double dtf_err = 0.0;
  bool fit_ok = true;               // false when the refit on q_hat failed
};

/// Centered Pearson correlation; 0 when either row is constant.
inline double pearson(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double den = std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  if (!(den > 0.0)) return 0.0;
  return std::clamp(xc.dot(yc) / den, -1.0, 1.0);
}

inline ErrorRow evaluate(const Matrix& q_true, const Matrix& q_hat, const MvarModel& true_model,
                         Eigen::Index fit_order, const std::vector<double>& freqs,
                         TransferConvention conv = TransferConvention::Inverse) {
  if (q_true.rows() != q_hat.rows() || q_true.cols() != q_hat.cols())
    throw ShapeMismatch("evaluate: q_true and q_hat differ in shape");
  if (true_model.dim != q_true.rows())
    throw ShapeMismatch("evaluate: true model dim differs from source count");

  ErrorRow row;
  const double ref = q_true.norm();
  row.signal_euclid = ref > 0.0 ? (q_hat - q_true).norm() / ref
                                : std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q_true.rows(); ++i) {
    const double c = pearson(q_true.row(i).transpose(), q_hat.row(i).transpose());
    row.signal_corr.push_back(c);
    acc += c;
  }
  row.signal_corr_mean = acc / static_cast<double>(q_true.rows());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    const MvarModel fitted = fit(q_hat, fit_order);
    Matrix a_true = true_model.stacked();
    Matrix a_fit = fitted.stacked();
    // orders may differ; compare on the common zero-padded width
    const Eigen::Index w = std::max(a_true.cols(), a_fit.cols());
    a_true.conservativeResizeLike(Matrix::Zero(a_true.rows(), w));
    a_fit.conservativeResizeLike(Matrix::Zero(a_fit.rows(), w));
    row.mvar_coeff_err = (a_true - a_fit).norm();

    const auto c_true = connectivity(true_model, freqs, conv);
    const auto c_fit = connectivity(fitted, freqs, conv);
    row.pdc_err = spectrum_distance(c_true.pdc, c_fit.pdc);
    row.dtf_err = spectrum_distance(c_true.dtf, c_fit.dtf);
  } catch (const RankDeficientRegressor&) {
    row.fit_ok = false;
  } catch (const ZeroColumn&) {
    row.fit_ok = false;
  } catch (const ZeroRow&) {
    row.fit_ok = false;
  }
  if (!row.fit_ok) row.mvar_coeff_err = row.pdc_err = row.dtf_err = nan;
  return row;
}

/// (measure, value) pairs in output order.
inline std::vector<std::pair<std::string, double>> measures(const ErrorRow& r) {
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("signal_euclid", r.signal_euclid);
  out.emplace_back("signal_corr_mean", r.signal_corr_mean);
  for (std::size_t i = 0; i < r.signal_corr.size(); ++i)
    out.emplace_back("signal_corr_" + std::to_string(i + 1), r.signal_corr[i]);
  out.emplace_back("mvar_coeff_err", r.mvar_coeff_err);
  out.emplace_back("pdc_err", r.pdc_err);
  out.emplace_back("dtf_err", r.dtf_err);
  out.emplace_back("fit_ok", r.fit_ok ? 1.0 : 0.0);
  return out;
}

/// Filter enum order, then rank.
inline bool filter_before(const FilterSpec& a, const FilterSpec& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  return a.rank.value_or(0) < b.rank.value_or(0);
}

struct SummaryRow {
  std::string filter;
  std::string measure;
  double mean = 0.0;
  double std = 0.0;
};

/// Per-filter mean and sample standard deviation of every measure over the
/// realizations. Rows are sorted by (filter, realization) before folding,
/// so the result does not depend on input order. Non-finite values (failed
/// refits) are skipped.
inline std::vector<SummaryRow> aggregate(std::vector<ErrorRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ErrorRow& a, const ErrorRow& b) {
    if (a.filter != b.filter) return filter_before(a.filter, b.filter);
    return a.realization < b.realization;
  });
  std::vector<SummaryRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].filter == rows[i].filter) ++j;
    const auto names = measures(rows[i]);
    for (std::size_t k = 0; k < names.size(); ++k) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t r = i; r < j; ++r) {
        const auto ms = measures(rows[r]);
        if (k < ms.size() && std::isfinite(ms[k].second)) {
          sum += ms[k].second;
          ++n;
        }
      }
      SummaryRow s{rows[i].filter.name(), names[k].first, std::numeric_limits<double>::quiet_NaN(), 0.0};
      if (n > 0) {
        s.mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t r = i; r < j; ++r) {
          const auto ms = measures(rows[r]);
          if (k < ms.size() && std::isfinite(ms[k].second)) ss += (ms[k].second - s.mean) * (ms[k].second - s.mean);
        }
        s.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      }
      out.push_back(std::move(s));
    }
    i = j;
  }
  return out;
}

inline void write_results_csv(std::ostream& os, std::vector<ErrorRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ErrorRow& a, const ErrorRow& b) {
    if (a.realization != b.realization) return a.realization < b.realization;
    return filter_before(a.filter, b.filter);
  });
  os << "filter,realization,measure,value\n";
  for (const auto& r : rows)
    for (const auto& [name, value] : measures(r))
      os << r.filter.name() << ',' << r.realization << ',' << name << ',' << format_double(value)
         << '\n';
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "filter,measure,mean,std\n";
  for (const auto& r : rows)
    os << r.filter << ',' << r.measure << ',' << format_double(r.mean) << ','
       << format_double(r.std) << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_measure_value(const std::string& text, const std::string& where) {
  if (text == "nan" || text == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_double(text, where);
}

}  // namespace detail

inline std::vector<SummaryRow> read_summary_csv(std::istream& is, const std::string& name = "summary.csv") {
  std::string line;
  if (!std::getline(is, line) || line != "filter,measure,mean,std")
    throw ParseError(name + ":1: unexpected header");
  std::vector<SummaryRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 4) throw ParseError(where + ": expected 4 fields");
    rows.push_back({cells[0], cells[1], detail::parse_measure_value(cells[2], where),
                    detail::parse_measure_value(cells[3], where)});
  }
  return rows;
}

/// Long-format results as (filter, realization, measure, value) tuples.
struct ResultCell {
  std::string filter;
  int realization = 0;
  std::string measure;
  double value = 0.0;
};

inline std::vector<ResultCell> read_results_csv(std::istream& is, const std::string& name = "results.csv") {
  std::string line;
  if (!std::getline(is, line) || line != "filter,realization,measure,value")
    throw ParseError(name + ":1: unexpected header");
  std::vector<ResultCell> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 4) throw ParseError(where + ": expected 4 fields");
    out.push_back({cells[0], static_cast<int>(detail::parse_measure_value(cells[1], where)), cells[2],
                   detail::parse_measure_value(cells[3], where)});
  }
  return out;
}

}  // namespace eegsim
