#include "specmc/cli.hpp"

#include "specmc/ingest.hpp"
#include "specmc/likelihood.hpp"
#include "specmc/parallel.hpp"
#include "specmc/spectral.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

namespace specmc {
namespace {

namespace fs = std::filesystem;
using Eigen::Index;

template <class T>
T field(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::config, where + "." + key + " has the wrong type");
  }
}

template <class T>
void maybe(const Json& j, const char* key, const std::string& where, T& target) {
  if (j.contains(key)) target = field<T>(j, key, where);
}

std::string penalty_name(BicPenalty p) { return p == BicPenalty::frequencies ? "frequencies" : "time_points"; }

BicPenalty penalty_from(const std::string& s) {
  if (s == "time_points") return BicPenalty::time_points;
  if (s == "frequencies") return BicPenalty::frequencies;
  throw Error(Errc::config, "compare.penalty must be time_points or frequencies");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Files written by one command; removed again unless the command completes.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dir_ = true;
    }
  }
  Outputs(const Outputs&) = delete;
  Outputs& operator=(const Outputs&) = delete;
  ~Outputs() {
    if (done_) return;
    std::error_code ec;
    for (const auto& p : created_) fs::remove(p, ec);
    if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
  }

  fs::path add(const fs::path& name) {
    fs::path p = dir_ / name;
    if (!p.parent_path().empty() && !fs::exists(p.parent_path())) {
      fs::create_directories(p.parent_path());
      created_.push_back(p.parent_path());
    }
    if (!fs::exists(p)) created_.insert(created_.begin(), p);
    return p;
  }
  void commit() { done_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> created_;
  bool created_dir_ = false;
  bool done_ = false;
};

void require_data(const RunConfig& c) {
  if (!c.data) throw Error(Errc::config, "data.path is required");
  if (c.data->path.empty()) throw Error(Errc::config, "data.path is required");
  if (!fs::exists(c.data->path)) throw Error(Errc::format, "data.path " + c.data->path.string() + " does not exist");
}

void check_common(const RunConfig& c) {
  if (c.threads < 0) throw Error(Errc::config, "threads must be >= 0");
  if (c.out.empty()) throw Error(Errc::config, "out must name a directory");
}

void check_shape(const ModelShape& s, const std::string& where) {
  if (s.r < 1 || s.p < 0 || s.q < 0) throw Error(Errc::config, where + " needs r >= 1 and p, q >= 0");
}

int resolve_threads(int threads) { return threads == 0 ? default_threads() : threads; }

MultiSeries load_data(const DataConfig& d) {
  MultiSeries s = load_csv(d.path, d.header);
  s.dt = d.dt;
  if (s.missing_count() > 0) {
    if (!d.interpolate) {
      throw Error(Errc::format, d.path.string() + " has " + std::to_string(s.missing_count()) +
                                    " missing values and data.interpolate is false");
    }
    s = interpolate_missing(std::move(s));
  }
  if (d.log_shift) s = log_shift_transform(std::move(s));
  if (d.demean) s = demean(std::move(s));
  return s;
}

PeriodogramSet cached_periodogram(const MultiSeries& s, const RunConfig& c, Outputs& outputs) {
  if (!c.data->cache) return periodogram(s);
  const std::uint64_t hash = content_hash(s);
  const fs::path path = c.out / "periodogram.cache";
  if (auto hit = load_periodogram(path, hash, s.length())) return std::move(*hit);
  PeriodogramSet pgram = periodogram(s);
  save_periodogram(pgram, hash, outputs.add("periodogram.cache"));
  return pgram;
}

ModelShape model_for(const RunConfig& c, const MultiSeries& s) {
  ModelShape shape = *c.model;
  if (shape.r != s.dim()) {
    throw Error(Errc::config, "model.r = " + std::to_string(shape.r) + " but the data have " + std::to_string(s.dim()) + " columns");
  }
  return shape;
}

MinnesotaConfig resolved_prior(const RunConfig& c, const MultiSeries& s) {
  MinnesotaConfig prior = c.prior;
  if (prior.sigma2.size() == 0) prior.sigma2 = residual_variances(s, c.prior_ar_order);
  prior.validate(static_cast<int>(s.dim()));
  return prior;
}

Json data_summary(const RunConfig& c, const MultiSeries& s) {
  return Json{{"path", c.data->path.string()},
              {"T", s.length()},
              {"r", s.dim()},
              {"labels", s.labels},
              {"content_hash", content_hash(s)}};
}

std::string panel_name(const SpectralPanel& p) {
  const std::string i = std::to_string(p.i + 1);
  const std::string j = std::to_string(p.j + 1);
  switch (p.kind) {
    case SpectralPanel::Kind::spectrum: return "spectrum_" + i;
    case SpectralPanel::Kind::coherence: return "coherence_" + i + "_" + j;
    case SpectralPanel::Kind::delay: return "delay_" + i + "_" + j;
  }
  return "panel";
}

void write_levels_csv(const fs::path& path, const Eigen::VectorXd& omega, const Eigen::MatrixXd& q, double scale,
                      const Eigen::VectorXd* observed = nullptr) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::format, "cannot write " + path.string());
  out << "omega" << (observed ? ",observed" : "") << ",q025,q50,q975\n";
  for (Index k = 0; k < omega.size(); ++k) {
    out << fmt(omega(k));
    if (observed) out << ',' << fmt((*observed)(k));
    for (Index l = 0; l < q.cols(); ++l) out << ',' << fmt(q(k, l) * scale);
    out << '\n';
  }
  if (!out) throw Error(Errc::format, "failed while writing " + path.string());
}

fs::path metadata_for(const fs::path& draws) {
  const std::string stem = draws.stem().string();
  if (stem.rfind("draws", 0) == 0) return draws.parent_path() / ("metadata" + stem.substr(5) + ".json");
  return draws.parent_path() / (stem + ".json");
}

struct LoadedChain {
  std::string method;
  DrawsFile draws;
  Json metadata;
  ChainEfficiency efficiency;
};

LoadedChain load_chain(const fs::path& draws_path, const std::string& method, const ModelShape* shape) {
  LoadedChain c;
  c.method = method;
  c.draws = read_draws(draws_path);
  const fs::path meta = metadata_for(draws_path);
  if (!fs::exists(meta)) throw Error(Errc::format, "no metadata " + meta.string() + " next to " + draws_path.string());
  c.metadata = read_json(meta);
  if (!c.metadata.contains("chain")) throw Error(Errc::format, meta.string() + " has no chain section");
  const Json& chain = c.metadata["chain"];
  if (shape && c.draws.draws.cols() != shape->dimension()) {
    throw Error(Errc::shape, draws_path.string() + " has " + std::to_string(c.draws.draws.cols()) + " columns but " +
                                 shape->label() + " has " + std::to_string(shape->dimension()) + " parameters");
  }
  try {
    c.efficiency = draws_efficiency(c.draws.draws, chain.at("total_evaluations").get<std::uint64_t>(),
                                    chain.at("iterations").get<Index>());
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::format, meta.string() + " lacks evaluation counts");
  }
  return c;
}

}  // namespace

RunConfig config_from_json(const Json& j) {
  require_keys(j, {"data", "model", "prior", "mcmc", "mode", "seed", "threads", "out", "simulate", "compare", "diagnose"},
               "config");
  RunConfig c;
  if (j.contains("data") && !j["data"].is_null()) {
    const Json& d = j["data"];
    require_keys(d, {"path", "header", "interpolate", "log_shift", "demean", "dt", "cache"}, "data");
    DataConfig dc;
    if (d.contains("path")) dc.path = field<std::string>(d, "path", "data");
    maybe(d, "header", "data", dc.header);
    maybe(d, "interpolate", "data", dc.interpolate);
    maybe(d, "log_shift", "data", dc.log_shift);
    maybe(d, "demean", "data", dc.demean);
    maybe(d, "dt", "data", dc.dt);
    maybe(d, "cache", "data", dc.cache);
    if (!(dc.dt > 0.0)) throw Error(Errc::config, "data.dt must be positive");
    c.data = dc;
  }
  if (j.contains("model") && !j["model"].is_null()) c.model = shape_from_json(j["model"]);
  if (j.contains("prior") && !j["prior"].is_null()) {
    Json p = j["prior"];
    if (p.is_object() && p.contains("ar_order")) {
      c.prior_ar_order = field<int>(p, "ar_order", "prior");
      p.erase("ar_order");
    }
    c.prior = prior_from_json(p);
    if (c.prior_ar_order < 1) throw Error(Errc::config, "prior.ar_order must be >= 1");
  }
  if (j.contains("mcmc")) {
    const Json& m = j["mcmc"];
    require_keys(m, {"iterations", "burnin", "groups", "sample", "blocks", "adapt_interval", "sticky_sigma2", "sticky_run",
                     "starts", "coarse_terms"},
                 "mcmc");
    maybe(m, "iterations", "mcmc", c.mcmc.iterations);
    maybe(m, "burnin", "mcmc", c.mcmc.burnin);
    maybe(m, "groups", "mcmc", c.mcmc.groups);
    maybe(m, "sample", "mcmc", c.mcmc.sample);
    maybe(m, "blocks", "mcmc", c.mcmc.blocks);
    maybe(m, "adapt_interval", "mcmc", c.mcmc.adapt_interval);
    maybe(m, "sticky_sigma2", "mcmc", c.mcmc.sticky_sigma2);
    maybe(m, "sticky_run", "mcmc", c.mcmc.sticky_run);
    maybe(m, "starts", "mcmc", c.mcmc.mode.starts);
    maybe(m, "coarse_terms", "mcmc", c.mcmc.mode.coarse_terms);
    if (c.mcmc.mode.starts < 1) throw Error(Errc::config, "mcmc.starts must be >= 1");
    if (c.mcmc.mode.coarse_terms < 1) throw Error(Errc::config, "mcmc.coarse_terms must be >= 1");
  }
  maybe(j, "mode", "config", c.mode);
  maybe(j, "seed", "config", c.seed);
  maybe(j, "threads", "config", c.threads);
  if (j.contains("out")) c.out = field<std::string>(j, "out", "config");
  if (j.contains("simulate")) {
    const Json& s = j["simulate"];
    require_keys(s, {"params", "T", "burnin"}, "simulate");
    if (s.contains("params") && !s["params"].is_null()) {
      try {
        c.simulate.params = params_from_json(s["params"]);
      } catch (const Error& e) {
        if (e.code() == Errc::config) throw;
        throw Error(Errc::config, std::string("simulate.params: ") + e.what());
      }
    }
    maybe(s, "T", "simulate", c.simulate.T);
    maybe(s, "burnin", "simulate", c.simulate.burnin);
  }
  if (j.contains("compare")) {
    const Json& s = j["compare"];
    require_keys(s, {"models", "penalty"}, "compare");
    if (s.contains("models")) {
      if (!s["models"].is_array()) throw Error(Errc::config, "compare.models must be an array");
      for (const auto& m : s["models"]) c.compare.models.push_back(shape_from_json(m));
    }
    if (s.contains("penalty")) c.compare.penalty = penalty_from(field<std::string>(s, "penalty", "compare"));
  }
  if (j.contains("diagnose")) {
    const Json& s = j["diagnose"];
    require_keys(s, {"full", "subsample", "grid", "max_draws", "draws_per_theta", "predictive_draws"}, "diagnose");
    if (s.contains("full") && !s["full"].is_null()) c.diagnose.full = field<std::string>(s, "full", "diagnose");
    if (s.contains("subsample") && !s["subsample"].is_null()) c.diagnose.subsample = field<std::string>(s, "subsample", "diagnose");
    maybe(s, "grid", "diagnose", c.diagnose.grid);
    maybe(s, "max_draws", "diagnose", c.diagnose.max_draws);
    maybe(s, "draws_per_theta", "diagnose", c.diagnose.draws_per_theta);
    maybe(s, "predictive_draws", "diagnose", c.diagnose.predictive_draws);
  }
  return c;
}

Json config_to_json(const RunConfig& c) {
  Json j;
  if (c.data) {
    j["data"] = Json{{"path", c.data->path.string()}, {"header", c.data->header},       {"interpolate", c.data->interpolate},
                     {"log_shift", c.data->log_shift},  {"demean", c.data->demean},     {"dt", c.data->dt},
                     {"cache", c.data->cache}};
  } else {
    j["data"] = nullptr;
  }
  j["model"] = c.model ? shape_to_json(*c.model) : Json();
  Json prior = prior_to_json(c.prior);
  prior["ar_order"] = c.prior_ar_order;
  j["prior"] = prior;
  j["mcmc"] = Json{{"iterations", c.mcmc.iterations},       {"burnin", c.mcmc.burnin},
                   {"groups", c.mcmc.groups},               {"sample", c.mcmc.sample},
                   {"blocks", c.mcmc.blocks},               {"adapt_interval", c.mcmc.adapt_interval},
                   {"sticky_sigma2", c.mcmc.sticky_sigma2}, {"sticky_run", c.mcmc.sticky_run},
                   {"starts", c.mcmc.mode.starts},          {"coarse_terms", c.mcmc.mode.coarse_terms}};
  j["mode"] = c.mode;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out.string();
  j["simulate"] = Json{{"params", c.simulate.params ? params_to_json(*c.simulate.params) : Json()},
                       {"T", c.simulate.T},
                       {"burnin", c.simulate.burnin}};
  Json models = Json::array();
  for (const auto& m : c.compare.models) models.push_back(shape_to_json(m));
  j["compare"] = Json{{"models", models}, {"penalty", penalty_name(c.compare.penalty)}};
  j["diagnose"] = Json{{"full", c.diagnose.full.empty() ? Json() : Json(c.diagnose.full.string())},
                       {"subsample", c.diagnose.subsample.empty() ? Json() : Json(c.diagnose.subsample.string())},
                       {"grid", c.diagnose.grid},
                       {"max_draws", c.diagnose.max_draws},
                       {"draws_per_theta", c.diagnose.draws_per_theta},
                       {"predictive_draws", c.diagnose.predictive_draws}};
  return j;
}

void apply_overrides(RunConfig& config, const CliOverrides& o) {
  if (o.mode) config.mode = *o.mode;
  if (o.seed) config.seed = *o.seed;
  if (o.threads) config.threads = *o.threads;
  if (o.out) config.out = *o.out;
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::config:
      return 2;
    case Errc::format:
    case Errc::parse:
    case Errc::endpoint:
    case Errc::too_short:
    case Errc::shape:
    case Errc::degenerate:
      return 3;
    default:
      return 4;
  }
}

void cmd_simulate(const RunConfig& c, std::ostream& log) {
  check_common(c);
  if (!c.simulate.params) throw Error(Errc::config, "simulate.params is required");
  if (c.simulate.T < 1 || c.simulate.burnin < 0) throw Error(Errc::config, "simulate needs T >= 1 and burnin >= 0");
  const ModelParams& params = *c.simulate.params;
  try {
    params.validate();
  } catch (const Error& e) {
    throw Error(Errc::config, std::string("simulate.params: ") + e.what());
  }
  if (!params.ar.coeffs.empty() && companion_spectral_radius(params.ar.coeffs) >= 1.0) {
    throw Error(Errc::config, "simulate.params: the AR part is not stationary");
  }

  Outputs outputs(c.out);
  const MultiSeries series = simulate_model(params, c.simulate.T, c.simulate.burnin, c.seed);
  write_csv(series, outputs.add("data.csv"));
  Json truth;
  truth["params"] = params_to_json(params);
  truth["model"] = shape_to_json(params.shape());
  truth["theta"] = vector_to_json(pack(params, params.shape()));
  truth["names"] = params.shape().parameter_names();
  truth["config"] = config_to_json(c);
  write_json(truth, outputs.add("truth.json"));
  outputs.commit();
  log << "simulated " << series.length() << " x " << series.dim() << " " << params.shape().label() << " series into "
      << (c.out / "data.csv").string() << '\n';
}

void cmd_fit(const RunConfig& c, std::ostream& log) {
  check_common(c);
  require_data(c);
  if (!c.model) throw Error(Errc::config, "model is required");
  check_shape(*c.model, "model");
  if (c.mode != "full" && c.mode != "subsample") throw Error(Errc::config, "mode must be full or subsample");
  c.mcmc.validate(c.mode == "subsample");
  if (c.prior.sigma2.size() != 0) c.prior.validate(c.model->r);

  const MultiSeries series = load_data(*c.data);
  const ModelShape shape = model_for(c, series);
  Outputs outputs(c.out);
  const PeriodogramSet pgram = cached_periodogram(series, c, outputs);

  RunConfig resolved = c;
  resolved.prior = resolved_prior(c, series);
  const LogPrior prior(shape, resolved.prior);
  const int threads = resolve_threads(c.threads);
  WhittleLikelihood loglik(pgram, shape, threads);

  McmcSettings settings = c.mcmc;
  settings.seed = c.seed;
  settings.mode.shape = &shape;
  const ChainOutput chain = c.mode == "full" ? run_full_mcmc(loglik, prior, settings, shape.parameter_names())
                                             : run_subsample_mcmc(loglik, prior, settings, shape.parameter_names());
  for (const auto& w : chain.warnings) log << "warning: " << w << '\n';

  write_draws(chain, outputs.add("draws_" + c.mode + ".csv"));
  Json meta;
  meta["config"] = config_to_json(resolved);
  meta["data"] = data_summary(c, series);
  meta["chain"] = chain_metadata(chain, shape);
  write_json(meta, outputs.add("metadata_" + c.mode + ".json"));
  outputs.commit();
  log << shape.label() << " " << c.mode << " chain: " << chain.iterations << " iterations, acceptance "
      << chain.acceptance_rate() << ", " << chain.total_evaluations() << " density evaluations\n";
}

void cmd_compare(const RunConfig& c, std::ostream& log) {
  check_common(c);
  require_data(c);
  if (c.compare.models.empty()) throw Error(Errc::config, "compare.models must list at least one model");
  for (const auto& m : c.compare.models) check_shape(m, "compare.models");

  const MultiSeries series = load_data(*c.data);
  std::vector<ModelShape> models;
  for (ModelShape m : c.compare.models) {
    if (m.r != series.dim()) {
      throw Error(Errc::config, "compare.models entry " + m.label() + " has r = " + std::to_string(m.r) + " but the data have " +
                                    std::to_string(series.dim()) + " columns");
    }
    if (!m.tempered()) m.shared_lambda = true;
    if (std::find(models.begin(), models.end(), m) != models.end()) {
      log << "warning: duplicate model " << m.label() << " dropped\n";
      continue;
    }
    models.push_back(m);
  }

  Outputs outputs(c.out);
  const PeriodogramSet pgram = cached_periodogram(series, c, outputs);
  const int threads = resolve_threads(c.threads);

  struct Row {
    ModelShape shape;
    std::optional<BicResult> result;
    double best_loglik = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
    bool tie = false;
  };
  std::vector<Row> rows;
  for (const auto& shape : models) {
    Row row{shape};
    ModeSearchOptions options = c.mcmc.mode;
    options.seed = c.seed;
    try {
      row.result = bic(pgram, shape, c.compare.penalty, options, threads);
      row.best_loglik = row.result->loglik;
    } catch (const ConvergenceError& e) {
      row.status = std::string("failed: ") + e.what();
      row.best_loglik = e.best_value();
    } catch (const Error& e) {
      row.status = std::string("failed: ") + e.what();
    }
    log << shape.label() << (shape.tempered() && !shape.shared_lambda ? " (per-series lambda)" : "") << ": " << row.status
        << (row.result ? ", BIC " + fmt(row.result->bic) : "") << '\n';
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.result.has_value() != b.result.has_value()) return a.result.has_value();
    return a.result && a.result->bic > b.result->bic;
  });
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i].result && rows[i + 1].result && rows[i].result->bic - rows[i + 1].result->bic <= 1.0) {
      rows[i].tie = true;
      rows[i + 1].tie = true;
    }
  }

  Json table = Json::array();
  const fs::path csv_path = outputs.add("bic.csv");
  std::ofstream csv(csv_path);
  if (!csv) throw Error(Errc::format, "cannot write " + csv_path.string());
  csv << "model,kind,p,q,shared_lambda,k,n,loglik,bic,tie,status\n";
  for (const auto& row : rows) {
    const ModelShape& s = row.shape;
    const Index k = s.dimension();
    Json r{{"model", s.label()}, {"kind", to_string(s.kind)}, {"p", s.p}, {"q", s.q}, {"shared_lambda", s.shared_lambda}, {"k", k}};
    r["n"] = row.result ? Json(row.result->n) : Json();
    r["loglik"] = std::isfinite(row.best_loglik) ? Json(row.best_loglik) : Json();
    r["bic"] = row.result ? Json(row.result->bic) : Json();
    r["tie"] = row.tie;
    r["status"] = row.status;
    std::string status = row.status;
    std::replace(status.begin(), status.end(), ',', ';');
    csv << s.label() << ',' << to_string(s.kind) << ',' << s.p << ',' << s.q << ',' << (s.shared_lambda ? "true" : "false") << ','
        << k << ',' << (row.result ? std::to_string(row.result->n) : "") << ','
        << (std::isfinite(row.best_loglik) ? fmt(row.best_loglik) : "") << ',' << (row.result ? fmt(row.result->bic) : "")
        << ',' << (row.tie ? "true" : "false") << ',' << status << '\n';
    table.push_back(r);
  }
  csv.close();
  if (!csv) throw Error(Errc::format, "failed while writing " + csv_path.string());
  Json report{{"penalty", penalty_name(c.compare.penalty)},
              {"tie_threshold", 1.0},
              {"rows", table},
              {"data", data_summary(c, series)},
              {"config", config_to_json(c)}};
  write_json(report, outputs.add("bic.json"));
  outputs.commit();
}

void cmd_diagnose(const RunConfig& c, std::ostream& log) {
  check_common(c);
  const DiagnoseConfig& d = c.diagnose;
  if (d.full.empty() && d.subsample.empty()) throw Error(Errc::config, "diagnose needs diagnose.full, diagnose.subsample or both");
  if (d.grid < 1 || d.max_draws < 1 || d.draws_per_theta < 1 || d.predictive_draws < 1) {
    throw Error(Errc::config, "diagnose sizes must be positive");
  }
  if (c.model) check_shape(*c.model, "model");
  if (c.data) require_data(c);

  std::vector<LoadedChain> chains;
  const ModelShape* configured = c.model ? &*c.model : nullptr;
  if (!d.full.empty()) chains.push_back(load_chain(d.full, "full", configured));
  if (!d.subsample.empty()) chains.push_back(load_chain(d.subsample, "subsample", configured));
  const ModelShape shape = c.model ? *c.model : shape_from_json(chains.front().metadata["chain"].at("model"));
  for (const auto& ch : chains) {
    if (ch.draws.draws.cols() != shape.dimension()) {
      throw Error(Errc::shape, "draws have " + std::to_string(ch.draws.draws.cols()) + " columns but " + shape.label() + " has " +
                                   std::to_string(shape.dimension()) + " parameters");
    }
  }
  if (chains.size() == 2 && chains[0].draws.names != chains[1].draws.names) {
    throw Error(Errc::shape, "the two draws files have different parameter names");
  }

  Outputs outputs(c.out);
  Json report;
  if (chains.size() == 2) {
    report["efficiency"] = efficiency_to_json(efficiency_report(chains[0].draws.names, chains[0].efficiency, chains[1].efficiency));
  } else {
    Json e = efficiency_to_json(efficiency_report(chains[0].draws.names, chains[0].efficiency, std::nullopt));
    if (chains[0].method != "full") {
      Json renamed;
      for (auto it = e.begin(); it != e.end(); ++it) renamed[it.key() == "full" ? chains[0].method : it.key()] = it.value();
      e = renamed;
    }
    report["efficiency"] = e;
  }

  double dt = 1.0;
  if (c.data) {
    dt = c.data->dt;
  } else if (chains.front().metadata.contains("config")) {
    const Json& cfg = chains.front().metadata["config"];
    if (cfg.contains("data") && cfg["data"].is_object() && cfg["data"].contains("dt")) dt = cfg["data"]["dt"].get<double>();
  }
  const int threads = resolve_threads(c.threads);
  std::optional<PeriodogramSet> pgram;
  if (c.data) {
    const MultiSeries series = load_data(*c.data);
    if (series.dim() != shape.r) {
      throw Error(Errc::shape, "the data have " + std::to_string(series.dim()) + " columns but " + shape.label() + " has r = " +
                                   std::to_string(shape.r));
    }
    pgram = cached_periodogram(series, c, outputs);
  }

  Json spectral = Json::object();
  Json predictive = Json::object();
  for (const auto& ch : chains) {
    const SpectralSummary s = spectral_summary(ch.draws.draws, shape, d.grid, d.max_draws, threads);
    Json files = Json::array();
    for (const auto& panel : s.panels) {
      const std::string name = "spectral_" + ch.method + "_" + panel_name(panel) + ".csv";
      write_levels_csv(outputs.add(name), s.omega, panel.quantiles, panel.kind == SpectralPanel::Kind::delay ? dt : 1.0);
      files.push_back(name);
    }
    spectral[ch.method] = Json{{"grid", d.grid}, {"draws_used", s.draws_used}, {"delay_unit", dt}, {"files", files}};
    if (pgram) {
      const PredictiveBands b = predictive_periodogram(ch.draws.draws, *pgram, shape, d.draws_per_theta, c.seed, d.predictive_draws);
      Json pfiles = Json::array();
      for (Index j = 0; j < shape.r; ++j) {
        const std::string name = "predictive_" + ch.method + "_" + std::to_string(j + 1) + ".csv";
        const Eigen::VectorXd obs = b.observed.col(j);
        write_levels_csv(outputs.add(name), b.omega, b.bands[static_cast<std::size_t>(j)], 1.0, &obs);
        pfiles.push_back(name);
      }
      predictive[ch.method] = Json{{"draws_used", b.draws_used}, {"draws_per_theta", d.draws_per_theta}, {"files", pfiles}};
    }
  }
  report["spectral"] = spectral;
  report["predictive"] = pgram ? predictive : Json("skipped: no data section in the config");
  report["model"] = shape_to_json(shape);
  report["config"] = config_to_json(c);
  write_json(report, outputs.add("diagnostics.json"));
  outputs.commit();
  const auto& e = report["efficiency"];
  if (e.contains("rct_summary")) {
    log << "RCT min " << e["rct_summary"]["min"].get<double>() << " mean " << e["rct_summary"]["mean"].get<double>() << " max "
        << e["rct_summary"]["max"].get<double>() << '\n';
  } else {
    log << "single chain: IACT and CT only\n";
  }
}

int run_command(const std::string& command, const RunConfig& config, std::ostream& log) {
  try {
    if (command == "simulate") {
      cmd_simulate(config, log);
    } else if (command == "fit") {
      cmd_fit(config, log);
    } else if (command == "compare") {
      cmd_compare(config, log);
    } else if (command == "diagnose") {
      cmd_diagnose(config, log);
    } else {
      log << "error: unknown command " << command << '\n';
      return 2;
    }
  } catch (const Error& e) {
    log << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Bayesian spectral subsampling MCMC for multivariate time series"};
  std::string command;
  std::string config_path;
  std::string mode;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  app.add_option("command", command, "simulate | fit | compare | diagnose")
      ->required()
      ->check(CLI::IsMember({"simulate", "fit", "compare", "diagnose"}));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  auto* mode_opt = app.add_option("--mode", mode, "fit method")->check(CLI::IsMember({"full", "subsample"}));
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  auto* out_opt = app.add_option("--out", out, "output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunConfig config;
  try {
    config = config_from_json(read_json(config_path));
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  }
  CliOverrides overrides;
  if (*mode_opt) overrides.mode = mode;
  if (*seed_opt) overrides.seed = seed;
  if (*threads_opt) overrides.threads = threads;
  if (*out_opt) overrides.out = out;
  apply_overrides(config, overrides);
  return run_command(command, config, std::cerr);
}

}  // namespace specmc
