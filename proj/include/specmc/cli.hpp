#pragma once

#include "specmc/diagnostics.hpp"
#include "specmc/error.hpp"
#include "specmc/mcmc.hpp"
#include "specmc/models.hpp"
#include "specmc/prior.hpp"
#include "specmc/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace specmc {

struct DataConfig {
  std::filesystem::path path;
  bool header = true;
  bool interpolate = true;
  bool log_shift = false;
  bool demean = true;
  double dt = 1.0;
  bool cache = true;  // periodogram cache in the output directory
};

struct SimulateConfig {
  std::optional<ModelParams> params;
  Eigen::Index T = 1000;
  Eigen::Index burnin = 500;
};

struct CompareConfig {
  std::vector<ModelShape> models;
  BicPenalty penalty = BicPenalty::time_points;
};

struct DiagnoseConfig {
  std::filesystem::path full;       // draws CSV of a full-data chain
  std::filesystem::path subsample;  // draws CSV of a subsampling chain
  Eigen::Index grid = 512;
  Eigen::Index max_draws = 2000;
  Eigen::Index draws_per_theta = 100;
  Eigen::Index predictive_draws = 200;
};

struct RunConfig {
  std::optional<DataConfig> data;
  std::optional<ModelShape> model;
  MinnesotaConfig prior;
  int prior_ar_order = 4;
  McmcSettings mcmc;
  std::string mode = "subsample";
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = available cores
  std::filesystem::path out = "out";
  SimulateConfig simulate;
  CompareConfig compare;
  DiagnoseConfig diagnose;
};

/// Parses a config document. Unknown keys anywhere raise Errc::config.
RunConfig config_from_json(const Json& j);
/// Every field, defaults included; config_from_json reads it back unchanged.
Json config_to_json(const RunConfig& config);

/// Command-line values that take precedence over the config file.
struct CliOverrides {
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::filesystem::path> out;
};

void apply_overrides(RunConfig& config, const CliOverrides& overrides);

/// 2 for configuration errors, 3 for data errors, 4 for numerical failures.
int exit_code(Errc code);

/// Each command checks the whole config before doing any work, writes only inside
/// config.out and removes the files it created when it fails.
void cmd_simulate(const RunConfig& config, std::ostream& log);
void cmd_fit(const RunConfig& config, std::ostream& log);
void cmd_compare(const RunConfig& config, std::ostream& log);
void cmd_diagnose(const RunConfig& config, std::ostream& log);

/// Runs one subcommand and maps library errors onto exit codes, reporting on `log`.
int run_command(const std::string& command, const RunConfig& config, std::ostream& log);

/// Full front end: argument parsing, config loading, overrides and dispatch.
int cli_main(int argc, char** argv);

}  // namespace specmc
