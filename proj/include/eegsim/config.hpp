#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "connectivity.hpp"
#include "errors.hpp"
#include "filters.hpp"
#include "forward_model.hpp"
#include "matrix_io.hpp"
#include "source_model.hpp"

namespace eegsim {

/// Full configuration of a benchmark run.
struct SetupConfig {
  SourceCounts srcs{3, 2, 10, 0, 0, 0};
  Eigen::Index n00 = 2000;
  int K00 = 20;
  Eigen::Index P00 = 6;
  Eigen::Index background_order = 6;
  double FRAC = 0.2;  // fraction of off-diagonal mask entries equal to one
  double STAB = 0.95;
  CoeffRange RNG{-0.3, 0.3};
  int ITER = 1000;
  std::size_t PDC_RES = kDefaultFrequencyCount;
  std::uint64_t SEED = 0;
  double SINR = 5.0;
  double SBNR = 5.0;
  double SMNR = 20.0;
  double CUBE = 0.010;                  // m, full edge length
  double CONE = std::numbers::pi / 32;  // rad
  bool H_Src_pert = false;
  bool H_Int_pert = false;
  std::optional<Eigen::Index> IntLfgRANK;
  bool ERPs = false;
  Eigen::Index RANK_EIG = 0;  // 0: number of interest sources
  std::optional<Eigen::Index> MVP_RANK;
  SegmentFlags pre{false, true, true, true};
  SegmentFlags pst{true, true, true, true};
  std::vector<FilterSpec> filters = all_filter_specs();
  Eigen::Index montage_size = 128;
  HeadModel head{};
  Eigen::Index burn_in = kDefaultBurnIn;
  TransferConvention transfer = TransferConvention::Inverse;
  std::string out_dir = "run";

  SignalConfig signal_config() const {
    SignalConfig s;
    s.n00 = n00;
    s.interest_order = P00;
    s.background_order = background_order;
    s.frac_ones = FRAC;
    s.stab_limit = STAB;
    s.range = RNG;
    s.iter_limit = ITER;
    s.burn_in = burn_in;
    s.erps = ERPs;
    return s;
  }

  MeasurementConfig measurement_config() const {
    MeasurementConfig m;
    m.sinr_db = SINR;
    m.sbnr_db = SBNR;
    m.smnr_db = SMNR;
    m.pre = pre;
    m.pst = pst;
    m.src_perturbed = H_Src_pert;
    m.int_perturbed = H_Int_pert;
    m.interference_rank = IntLfgRANK;
    return m;
  }

  SourceSpace source_space() const { return SourceSpace{head.radius, 0.8, 0.3}; }
};

/// Recognized keys without an implementation here; rejected with UnknownKey.
inline constexpr std::array<std::string_view, 21> kUnsupportedKeys{
    "rROI", "rPNT",     "TELL",      "PLOT",           "SCRN",           "DISP",
    "SEEDS", "fltREMOVE", "SHOWori", "supSwitch",      "thalamus",       "DEBUG",
    "PATH", "SRATE",    "WhtNoiseAddFlg", "WhtNoiseAddSNR", "DATE",      "NAME",
    "SINR_RNG", "SBNR_RNG", "SMNR_RNG"};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(v);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

struct ValueParser {
  std::string key;
  std::string value;

  [[noreturn]] void fail(const std::string& why) const {
    throw InvalidValue(key + " = '" + value + "': " + why);
  }

  double real(const std::string& text) const {
    // "pi/N" and "pi" are accepted for angles
    if (text == "pi") return std::numbers::pi;
    if (text.rfind("pi/", 0) == 0) {
      const double d = real(text.substr(3));
      if (!(d != 0.0)) fail("division by zero");
      return std::numbers::pi / d;
    }
    try {
      return parse_double(text, key);
    } catch (const ParseError&) {
      fail("not a number");
    }
  }
  double real() const { return real(value); }

  long long integer(const std::string& text) const {
    const double d = real(text);
    if (!std::isfinite(d) || d != std::floor(d)) fail("not an integer");
    return static_cast<long long>(d);
  }
  long long integer() const { return integer(value); }

  bool boolean() const {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    fail("expected 0 or 1");
  }

  std::vector<long long> integers(std::size_t n) const {
    const auto cells = split_list(value);
    if (cells.size() != n) fail("expected " + std::to_string(n) + " comma-separated integers");
    std::vector<long long> out;
    for (const auto& c : cells) out.push_back(integer(c));
    return out;
  }
};

}  // namespace detail

/// Checks every cross-field constraint. Throws InvalidValue naming the key.
inline void validate(const SetupConfig& c) {
  auto bad = [](const std::string& key, const std::string& why) {
    throw InvalidValue(key + ": " + why);
  };
  if (c.srcs.interest < 1) bad("SRCS", "need at least one source of interest");
  if (c.srcs.interference < 0 || c.srcs.background < 0) bad("SRCS", "counts must be >= 0");
  if (c.srcs.deep_interest < 0 || c.srcs.deep_interest > c.srcs.interest ||
      c.srcs.deep_interference < 0 || c.srcs.deep_interference > c.srcs.interference ||
      c.srcs.deep_background < 0 || c.srcs.deep_background > c.srcs.background)
    bad("DEEP", "each deep count must lie in [0, SRCS count]");
  if (c.K00 < 1) bad("K00", "must be >= 1");
  if (c.P00 < 1) bad("P00", "must be >= 1");
  if (c.background_order < 1) bad("P_BCG", "must be >= 1");
  if (c.n00 < 8 * c.P00) bad("n00", "must be at least 8 * P00");
  if (!(c.FRAC >= 0.0 && c.FRAC <= 1.0)) bad("FRAC", "must lie in [0, 1]");
  if (!(c.STAB > 0.0 && c.STAB <= 1.0)) bad("STAB", "stability limit must lie in (0, 1]");
  if (!(c.RNG.lo <= c.RNG.hi) || !std::isfinite(c.RNG.lo) || !std::isfinite(c.RNG.hi))
    bad("RNG", "need finite lo <= hi");
  if (c.ITER < 1) bad("ITER", "must be >= 1");
  if (c.PDC_RES < 2) bad("PDC_RES", "need at least 2 frequencies");
  if (!std::isfinite(c.SINR)) bad("SINR", "must be finite");
  if (!std::isfinite(c.SBNR)) bad("SBNR", "must be finite");
  if (!std::isfinite(c.SMNR)) bad("SMNR", "must be finite");
  if (!(c.CUBE >= 0.0) || !std::isfinite(c.CUBE)) bad("CUBE", "must be >= 0");
  if (!(c.CONE >= 0.0 && c.CONE < std::numbers::pi / 2)) bad("CONE", "must lie in [0, pi/2)");
  if (c.montage_size < 4) bad("M", "need at least 4 electrodes");
  if (c.srcs.interest + c.srcs.interference >= c.montage_size)
    bad("M", "need more electrodes than interest plus interference sources");
  if (c.IntLfgRANK && (*c.IntLfgRANK < 1 || *c.IntLfgRANK > std::min(c.montage_size, c.srcs.interference)))
    bad("IntLfgRANK", "must lie in [1, min(M, interference count)]");
  if (c.RANK_EIG < 0 || c.RANK_EIG > c.montage_size) bad("RANK_EIG", "must lie in [0, M]");
  if (c.MVP_RANK && (*c.MVP_RANK < 1 || *c.MVP_RANK > c.srcs.interest))
    bad("MVP_RANK", "must lie in [1, number of interest sources]");
  for (const auto& f : c.filters)
    if (f.rank && *f.rank > c.srcs.interest)
      bad("FILTERS", "rank of " + f.name() + " exceeds the number of interest sources");
  if (c.filters.empty()) bad("FILTERS", "empty filter list");
  if (!(c.head.radius > 0.0)) bad("R_HEAD", "must be positive");
  if (!(c.head.conductivity > 0.0)) bad("SIGMA", "must be positive");
  if (c.burn_in < 0) bad("BURN_IN", "must be >= 0");
}

/// Applies one `key = value` assignment.
inline void apply_setting(SetupConfig& c, const std::string& key, const std::string& value) {
  const detail::ValueParser v{key, value};
  if (std::find(kUnsupportedKeys.begin(), kUnsupportedKeys.end(), key) != kUnsupportedKeys.end())
    throw UnknownKey(key + ": key is recognized but not supported");

  if (key == "SRCS") {
    const auto n = v.integers(3);
    c.srcs.interest = n[0];
    c.srcs.interference = n[1];
    c.srcs.background = n[2];
  } else if (key == "DEEP") {
    const auto n = v.integers(3);
    c.srcs.deep_interest = n[0];
    c.srcs.deep_interference = n[1];
    c.srcs.deep_background = n[2];
  } else if (key == "n00") c.n00 = v.integer();
  else if (key == "K00") c.K00 = static_cast<int>(v.integer());
  else if (key == "P00") c.P00 = v.integer();
  else if (key == "P_BCG") c.background_order = v.integer();
  else if (key == "FRAC") c.FRAC = v.real();
  else if (key == "STAB") c.STAB = v.real();
  else if (key == "RNG") {
    const auto cells = detail::split_list(value);
    if (cells.size() != 2) v.fail("expected 'lo, hi'");
    c.RNG = {v.real(cells[0]), v.real(cells[1])};
  } else if (key == "ITER") c.ITER = static_cast<int>(v.integer());
  else if (key == "PDC_RES") {
    const auto n = v.integer();
    if (n < 0) v.fail("must be positive");
    c.PDC_RES = static_cast<std::size_t>(n);
  } else if (key == "SEED") {
    const auto n = v.integer();
    if (n < 0) v.fail("must be non-negative");
    c.SEED = static_cast<std::uint64_t>(n);
  } else if (key == "SINR") c.SINR = v.real();
  else if (key == "SBNR") c.SBNR = v.real();
  else if (key == "SMNR") c.SMNR = v.real();
  else if (key == "CUBE") c.CUBE = v.real();
  else if (key == "CONE") c.CONE = v.real();
  else if (key == "H_Src_pert") c.H_Src_pert = v.boolean();
  else if (key == "H_Int_pert") c.H_Int_pert = v.boolean();
  else if (key == "IntLfgRANK") {
    const auto n = v.integer();
    if (n < 0) v.fail("must be >= 0 (0 disables rank reduction)");
    c.IntLfgRANK = n > 0 ? std::optional<Eigen::Index>(n) : std::nullopt;
  } else if (key == "ERPs") c.ERPs = v.boolean();
  else if (key == "RANK_EIG") c.RANK_EIG = v.integer();
  else if (key == "MVP_RANK") {
    const auto n = v.integer();
    c.MVP_RANK = n > 0 ? std::optional<Eigen::Index>(n) : std::nullopt;
  } else if (key == "SigPre") c.pre.signal = v.boolean();
  else if (key == "IntPre") c.pre.interference = v.boolean();
  else if (key == "BcgPre") c.pre.background = v.boolean();
  else if (key == "MesPre") c.pre.noise = v.boolean();
  else if (key == "SigPst") c.pst.signal = v.boolean();
  else if (key == "IntPst") c.pst.interference = v.boolean();
  else if (key == "BcgPst") c.pst.background = v.boolean();
  else if (key == "MesPst") c.pst.noise = v.boolean();
  else if (key == "FILTERS") {
    c.filters.clear();
    try {
      for (const auto& name : detail::split_list(value)) c.filters.push_back(parse_filter_spec(name));
    } catch (const InvalidValue& e) {
      throw InvalidValue(key + ": " + e.what());
    }
  } else if (key == "M") c.montage_size = v.integer();
  else if (key == "R_HEAD") c.head.radius = v.real();
  else if (key == "SIGMA") c.head.conductivity = v.real();
  else if (key == "BURN_IN") c.burn_in = v.integer();
  else if (key == "DTF_TRANSFER") {
    if (value == "inverse") c.transfer = TransferConvention::Inverse;
    else if (value == "complement") c.transfer = TransferConvention::ComplementInverse;
    else v.fail("expected 'inverse' or 'complement'");
  } else if (key == "OUT_DIR") c.out_dir = value;
  else throw UnknownKey(key + ": unknown configuration key");
}

/// Flat `key = value` text; '#' starts a comment. Omitted keys keep their
/// defaults.
inline SetupConfig parse_config(std::istream& is, const std::string& name = "<config>") {
  SetupConfig c;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = name + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (!seen.insert(key).second) throw InvalidValue(key + ": given more than once (" + where + ")");
    apply_setting(c, key, value);
  }
  validate(c);
  return c;
}

inline SetupConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open config '" + path.string() + "'");
  return parse_config(is, path.string());
}

inline nlohmann::ordered_json to_json(const SetupConfig& c) {
  using nlohmann::ordered_json;
  auto filters = ordered_json::array();
  for (const auto& f : c.filters) filters.push_back(f.name());
  auto flag = [](bool b) { return b ? 1 : 0; };
  ordered_json j;
  j["SRCS"] = {c.srcs.interest, c.srcs.interference, c.srcs.background};
  j["DEEP"] = {c.srcs.deep_interest, c.srcs.deep_interference, c.srcs.deep_background};
  j["ERPs"] = flag(c.ERPs);
  j["n00"] = c.n00;
  j["K00"] = c.K00;
  j["P00"] = c.P00;
  j["P_BCG"] = c.background_order;
  j["FRAC"] = c.FRAC;
  j["STAB"] = c.STAB;
  j["RNG"] = {c.RNG.lo, c.RNG.hi};
  j["ITER"] = c.ITER;
  j["PDC_RES"] = c.PDC_RES;
  j["SEED"] = c.SEED;
  j["SINR"] = c.SINR;
  j["SBNR"] = c.SBNR;
  j["SMNR"] = c.SMNR;
  j["CUBE"] = c.CUBE;
  j["CONE"] = c.CONE;
  j["H_Src_pert"] = flag(c.H_Src_pert);
  j["H_Int_pert"] = flag(c.H_Int_pert);
  j["IntLfgRANK"] = c.IntLfgRANK ? *c.IntLfgRANK : 0;
  j["RANK_EIG"] = c.RANK_EIG;
  j["MVP_RANK"] = c.MVP_RANK ? *c.MVP_RANK : 0;
  j["SigPre"] = flag(c.pre.signal);
  j["IntPre"] = flag(c.pre.interference);
  j["BcgPre"] = flag(c.pre.background);
  j["MesPre"] = flag(c.pre.noise);
  j["SigPst"] = flag(c.pst.signal);
  j["IntPst"] = flag(c.pst.interference);
  j["BcgPst"] = flag(c.pst.background);
  j["MesPst"] = flag(c.pst.noise);
  j["FILTERS"] = filters;
  j["M"] = c.montage_size;
  j["R_HEAD"] = c.head.radius;
  j["SIGMA"] = c.head.conductivity;
  j["BURN_IN"] = c.burn_in;
  j["DTF_TRANSFER"] = c.transfer == TransferConvention::Inverse ? "inverse" : "complement";
  return j;
}

}  // namespace eegsim
