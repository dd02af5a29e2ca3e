#include "specmc/serialize.hpp"

#include "specmc/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace specmc {
namespace {

using Eigen::Index;

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::config, where + "." + key + " is missing or has the wrong type");
  }
}

std::vector<Eigen::MatrixXd> lags_from_json(const Json& j, const std::string& what) {
  std::vector<Eigen::MatrixXd> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw Error(Errc::config, what + " must be a list of matrices");
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(matrix_from_json(j[i], what + "[" + std::to_string(i) + "]"));
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void require_keys(const Json& object, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!object.is_object()) throw Error(Errc::config, where + " must be a JSON object");
  for (const auto& item : object.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!known) throw Error(Errc::config, "unknown key \"" + item.key() + "\" in " + where);
  }
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw Error(Errc::config, what + " must be a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw Error(Errc::config, what + " has rows of unequal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw Error(Errc::config, what + " has a non-numeric entry");
      m(static_cast<Index>(i), static_cast<Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) throw Error(Errc::config, what + " must be a number or an array of numbers");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(Errc::config, what + " has a non-numeric entry");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json shape_to_json(const ModelShape& shape) {
  return Json{{"kind", to_string(shape.kind)}, {"r", shape.r}, {"p", shape.p}, {"q", shape.q}, {"shared_lambda", shape.shared_lambda}};
}

ModelShape shape_from_json(const Json& j) {
  require_keys(j, {"kind", "r", "p", "q", "shared_lambda"}, "model");
  ModelShape s;
  s.kind = parse_model_kind(get<std::string>(j, "kind", "model"));
  s.r = j.contains("r") ? get<int>(j, "r", "model") : 1;
  s.p = j.contains("p") ? get<int>(j, "p", "model") : 0;
  s.q = j.contains("q") ? get<int>(j, "q", "model") : 0;
  s.shared_lambda = j.contains("shared_lambda") ? get<bool>(j, "shared_lambda", "model") : true;
  if (s.r < 1 || s.p < 0 || s.q < 0) throw Error(Errc::config, "model needs r >= 1 and p, q >= 0");
  return s;
}

Json params_to_json(const ModelParams& params) {
  Json j;
  j["kind"] = to_string(params.kind);
  j["mu"] = vector_to_json(params.mu.size() ? params.mu : Eigen::VectorXd::Zero(params.dim()));
  Json ar = Json::array();
  for (const auto& m : params.ar.coeffs) ar.push_back(matrix_to_json(m));
  Json ma = Json::array();
  for (const auto& m : params.ma.coeffs) ma.push_back(matrix_to_json(m));
  j["ar"] = ar;
  j["ma"] = ma;
  j["sigma_chol"] = matrix_to_json(params.sigma_chol);
  if (params.kind == ModelKind::vartfima) {
    j["d"] = vector_to_json(params.d);
    j["lambda"] = params.lambda.size() == 1 ? Json(params.lambda(0)) : vector_to_json(params.lambda);
  }
  return j;
}

ModelParams params_from_json(const Json& j) {
  require_keys(j, {"kind", "mu", "ar", "ma", "sigma_chol", "sigma", "d", "lambda"}, "params");
  ModelParams p;
  p.kind = parse_model_kind(get<std::string>(j, "kind", "params"));
  if (j.contains("sigma_chol") == j.contains("sigma")) throw Error(Errc::config, "params needs exactly one of sigma_chol and sigma");
  if (j.contains("sigma_chol")) {
    p.sigma_chol = matrix_from_json(j["sigma_chol"], "params.sigma_chol");
  } else {
    const Eigen::MatrixXd S = matrix_from_json(j["sigma"], "params.sigma");
    if (S.rows() != S.cols()) throw Error(Errc::config, "params.sigma must be square");
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (S + S.transpose()));
    if (llt.info() != Eigen::Success) throw Error(Errc::domain, "params.sigma is not positive definite");
    p.sigma_chol = llt.matrixL();
  }
  const Index r = p.sigma_chol.rows();
  p.mu = j.contains("mu") ? vector_from_json(j["mu"], "params.mu") : Eigen::VectorXd::Zero(r);
  p.ar.coeffs = lags_from_json(j.value("ar", Json()), "params.ar");
  p.ma.coeffs = lags_from_json(j.value("ma", Json()), "params.ma");
  if (p.kind == ModelKind::vartfima) {
    if (!j.contains("d") || !j.contains("lambda")) throw Error(Errc::config, "VARTFIMA params need d and lambda");
    p.d = vector_from_json(j["d"], "params.d");
    p.lambda = vector_from_json(j["lambda"], "params.lambda");
  } else if (j.contains("d") || j.contains("lambda")) {
    throw Error(Errc::config, "d and lambda are only allowed for VARTFIMA params");
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("invalid params: ") + e.what());
  }
  return p;
}

Json prior_to_json(const MinnesotaConfig& cfg) {
  Json j{{"lambda0", cfg.lambda0}, {"theta0", cfg.theta0}};
  j["sigma2"] = cfg.sigma2.size() ? vector_to_json(cfg.sigma2) : Json();
  j["scalar_variance"] = cfg.scalar_variance;
  j["d_variance"] = cfg.d_variance;
  return j;
}

MinnesotaConfig prior_from_json(const Json& j) {
  MinnesotaConfig c;
  if (j.is_null()) return c;
  require_keys(j, {"lambda0", "theta0", "sigma2", "scalar_variance", "d_variance"}, "prior");
  if (j.contains("lambda0")) c.lambda0 = get<double>(j, "lambda0", "prior");
  if (j.contains("theta0")) c.theta0 = get<double>(j, "theta0", "prior");
  if (j.contains("sigma2") && !j["sigma2"].is_null()) c.sigma2 = vector_from_json(j["sigma2"], "prior.sigma2");
  if (j.contains("scalar_variance")) c.scalar_variance = get<double>(j, "scalar_variance", "prior");
  if (j.contains("d_variance")) c.d_variance = get<double>(j, "d_variance", "prior");
  return c;
}

Json chain_metadata(const ChainOutput& chain, const ModelShape& shape) {
  Json j;
  j["method"] = chain.method;
  j["model"] = shape_to_json(shape);
  j["names"] = chain.names;
  j["seed"] = chain.seed;
  j["iterations"] = chain.iterations;
  j["burnin"] = chain.burnin;
  j["retained_draws"] = chain.draws.rows();
  j["frequencies"] = chain.term_count;
  if (chain.method == "subsample") {
    j["groups"] = chain.groups;
    j["sample"] = chain.sample;
    j["blocks"] = chain.blocks;
  }
  j["acceptance_rate"] = chain.acceptance_rate();
  j["setup_evaluations"] = chain.setup_evaluations;
  j["total_evaluations"] = chain.total_evaluations();
  j["seconds"] = chain.seconds;
  j["theta_star"] = vector_to_json(chain.theta_star);
  j["posterior_mean"] = vector_to_json(chain.posterior_mean());
  j["posterior_sd"] = vector_to_json(chain.posterior_sd());
  j["final_covariance"] = matrix_to_json(chain.final_covariance);
  if (chain.method == "subsample" && !chain.sigma2.empty()) {
    double mean = 0.0;
    double mx = 0.0;
    for (double v : chain.sigma2) {
      mean += v;
      mx = std::max(mx, v);
    }
    j["sigma2_mean"] = mean / static_cast<double>(chain.sigma2.size());
    j["sigma2_max"] = mx;
  }
  j["warnings"] = chain.warnings;
  return j;
}

Json efficiency_to_json(const EfficiencyReport& report) {
  auto range = [](const RangeSummary& s) { return Json{{"min", s.min}, {"mean", s.mean}, {"max", s.max}}; };
  Json j;
  j["names"] = report.names;
  j["full"] = Json{{"iact", vector_to_json(report.full.iact)},
                   {"evaluations_per_iteration", report.full.evaluations_per_iteration},
                   {"ct", vector_to_json(report.full.ct)},
                   {"iact_summary", range(report.iact_full)}};
  if (report.subsample) {
    j["subsample"] = Json{{"iact", vector_to_json(report.subsample->iact)},
                          {"evaluations_per_iteration", report.subsample->evaluations_per_iteration},
                          {"ct", vector_to_json(report.subsample->ct)},
                          {"iact_summary", range(*report.iact_subsample)}};
    j["rct"] = vector_to_json(*report.rct);
    j["rct_summary"] = range(*report.rct_summary);
  } else {
    j["rct"] = nullptr;
    j["note"] = "RCT needs a full-data chain and a subsampling chain";
  }
  return j;
}

void write_draws(const ChainOutput& chain, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::format, "cannot write " + path.string());
  for (std::size_t i = 0; i < chain.names.size(); ++i) out << (i ? "," : "") << chain.names[i];
  out << '\n';
  for (Index t = 0; t < chain.draws.rows(); ++t) {
    for (Index c = 0; c < chain.draws.cols(); ++c) out << (c ? "," : "") << format_double(chain.draws(t, c));
    out << '\n';
  }
  if (!out) throw Error(Errc::format, "failed while writing " + path.string());
}

DrawsFile read_draws(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::format, "cannot open " + path.string());
  DrawsFile f;
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::format, path.string() + " is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.names.push_back(cell);
  }
  const std::size_t cols = f.names.size();
  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t pos = 0;
    while (true) {
      const std::size_t next = line.find(',', pos);
      const std::string cell = line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw Error(Errc::parse, "cannot parse \"" + cell + "\" at row " + std::to_string(row) + ", column " +
                                     std::to_string(count + 1) + " of " + path.string());
      }
      values.push_back(v);
      ++count;
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (count != cols) {
      throw Error(Errc::parse, "row " + std::to_string(row) + " of " + path.string() + " has " + std::to_string(count) +
                                   " values, expected " + std::to_string(cols));
    }
  }
  const Index n = static_cast<Index>(values.size() / std::max<std::size_t>(cols, 1));
  f.draws = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), n,
                                                                                                      static_cast<Index>(cols));
  return f;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::config, path.string() + " is not valid JSON: " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::format, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace specmc
