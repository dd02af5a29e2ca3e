#pragma once

#include "specmc/diagnostics.hpp"
#include "specmc/mcmc.hpp"
#include "specmc/models.hpp"
#include "specmc/prior.hpp"

#include <json.hpp>

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

namespace specmc {

using Json = nlohmann::ordered_json;

/// Throws Errc::config naming the first key of `object` outside `allowed`.
void require_keys(const Json& object, std::initializer_list<const char*> allowed, const std::string& where);

/// {"kind", "r", "p", "q", "shared_lambda"}
Json shape_to_json(const ModelShape& shape);
ModelShape shape_from_json(const Json& j);

/// Structured view: {"kind", "mu", "ar", "ma", "sigma_chol", "d", "lambda"}, matrices as
/// arrays of rows. On input "sigma" (a covariance) may replace "sigma_chol"; missing
/// lag lists mean order zero and a scalar lambda means a shared one.
Json params_to_json(const ModelParams& params);
ModelParams params_from_json(const Json& j);

Json prior_to_json(const MinnesotaConfig& cfg);
MinnesotaConfig prior_from_json(const Json& j);

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& what);

/// Settings, counters, warnings and the resolved model of one chain.
Json chain_metadata(const ChainOutput& chain, const ModelShape& shape);
Json efficiency_to_json(const EfficiencyReport& report);

/// Header row of parameter names, then one row per post burn-in draw with 17 significant digits.
void write_draws(const ChainOutput& chain, const std::filesystem::path& path);

struct DrawsFile {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;
};

/// Throws Errc::parse naming the row of a short line or a bad cell.
DrawsFile read_draws(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);

}  // namespace specmc
