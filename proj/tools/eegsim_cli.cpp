#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eegsim/eegsim.hpp"

namespace {

eegsim::SetupConfig config_from(const std::string& path) {
  return path.empty() ? eegsim::SetupConfig{} : eegsim::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eegsim: EEG source reconstruction benchmark"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "simulate, reconstruct and score all realizations");
  std::string config_path, out_dir, filters;
  long long seed = -1;
  int jobs = 1;
  bool dump_filters = false;
  run_cmd->add_option("--config", config_path, "flat key = value configuration file");
  run_cmd->add_option("--seed", seed, "override SEED");
  run_cmd->add_option("--out", out_dir, "output directory (default: OUT_DIR from config)");
  run_cmd->add_option("--filters", filters, "comma-separated filter list, e.g. LCMV_R,NL,MVP_F_2_r2");
  run_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--dump-filters", dump_filters, "write W of realization 1 to filters/*.csv");

  auto* report_cmd = app.add_subcommand("report", "print the summary table of a finished run");
  std::string run_dir;
  report_cmd->add_option("run_dir", run_dir, "run directory")->required();

  auto* export_cmd = app.add_subcommand("export-leadfield", "write the lead-field of the configured geometry");
  std::string export_config, export_out, role = "interest";
  bool perturbed = false;
  export_cmd->add_option("--config", export_config, "configuration file");
  export_cmd->add_option("--out", export_out, "output CSV")->required();
  export_cmd->add_option("--role", role, "interest | interference | background | all")
      ->check(CLI::IsMember({"interest", "interference", "background", "all"}));
  export_cmd->add_flag("--perturbed", perturbed, "use perturbed source positions and orientations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      eegsim::SetupConfig cfg = config_from(config_path);
      if (seed >= 0) cfg.SEED = static_cast<std::uint64_t>(seed);
      if (!filters.empty()) eegsim::apply_setting(cfg, "FILTERS", filters);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      eegsim::validate(cfg);
      eegsim::run(cfg, cfg.out_dir, {jobs, dump_filters});
      std::cout << eegsim::report(cfg.out_dir);
    } else if (*report_cmd) {
      std::cout << eegsim::report(run_dir);
    } else if (*export_cmd) {
      const eegsim::SetupConfig cfg = config_from(export_config);
      const auto which = role == "interest"       ? eegsim::LeadfieldRole::Interest
                         : role == "interference" ? eegsim::LeadfieldRole::Interference
                         : role == "background"   ? eegsim::LeadfieldRole::Background
                                                  : eegsim::LeadfieldRole::All;
      eegsim::save_matrix_csv(export_out, eegsim::export_leadfield(cfg, which, perturbed));
    }
  } catch (const std::exception& e) {
    std::cerr << "eegsim: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
