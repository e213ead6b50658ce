// Command-line front end: simulate count datasets, fit movement
// parameters, bootstrap CIs, estimate vote-transfer matrices, and run
// replicated simulation studies.  Exit codes: 0 success, 1 config/IO
// error, 2 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ecm/inference.hpp"
#include "ecm/io.hpp"
#include "ecm/moments.hpp"
#include "ecm/movement.hpp"
#include "ecm/rng.hpp"
#include "ecm/simulate.hpp"
#include "ecm/types.hpp"
#include "ecm/vote_transfer.hpp"

using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config loading

json parse_override_value(const std::string& raw) {
  json v = json::parse(raw, nullptr, false);
  if (v.is_discarded()) return json(raw);  // bare strings need no quotes
  return v;
}

void apply_override(json& cfg, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set needs key.path=value, got '" + item + "'");
  const std::string path = item.substr(0, eq);
  json* node = &cfg;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) keys.push_back(key);
  if (keys.empty()) throw ConfigError("--set: empty key in '" + item + "'");
  for (std::size_t i = 0; i + 1 < keys.size(); ++i)
    node = &((*node)[keys[i]]);
  (*node)[keys.back()] = parse_override_value(item.substr(eq + 1));
}

json load_config(const std::string& path,
                 const std::vector<std::string>& overrides) {
  json cfg;
  try {
    cfg = json::parse(ecm::io::read_text(path));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const std::string& item : overrides) apply_override(cfg, item);
  if (!cfg.is_object()) throw ConfigError("config: top level must be an object");
  if (cfg.value("format_version", -1) != ecm::io::kFormatVersion)
    throw ConfigError("config: format_version must be " +
                      std::to_string(ecm::io::kFormatVersion));
  return cfg;
}

const json& need(const json& j, const std::string& key,
                 const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(ctx + ": missing key '" + key + "'");
  return *it;
}

double need_num(const json& j, const std::string& key,
                const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_number()) throw ConfigError(ctx + "." + key + ": not a number");
  return v.get<double>();
}

std::int64_t need_int(const json& j, const std::string& key,
                      const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_number_integer())
    throw ConfigError(ctx + "." + key + ": not an integer");
  return v.get<std::int64_t>();
}

std::string need_str(const json& j, const std::string& key,
                     const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_string()) throw ConfigError(ctx + "." + key + ": not a string");
  return v.get<std::string>();
}

std::array<double, 2> need_point(const json& j, const std::string& key,
                                 const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() ||
      !v[1].is_number())
    throw ConfigError(ctx + "." + key + ": want [x, y]");
  return {v[0].get<double>(), v[1].get<double>()};
}

// ---------------------------------------------------------------------------
// Model / design / size blocks

ecm::move::MovementModel parse_model(const json& j) {
  const std::string kind = need_str(j, "kind", "model");
  if (kind == "ou") {
    ecm::move::OUParams p{need_num(j, "tau", "model"),
                          need_num(j, "sigma", "model"),
                          need_point(j, "z", "model")};
    p.validate();
    return p;
  }
  if (kind == "conditioned_ou") {
    ecm::move::ConditionedOUParams p{
        {need_num(j, "tau", "model"), need_num(j, "sigma", "model"),
         need_point(j, "z", "model")},
        need_num(j, "t0", "model"),
        need_point(j, "x0", "model")};
    p.validate();
    return p;
  }
  if (kind == "brownian") {
    ecm::move::BrownianParams p{need_num(j, "sigma", "model"),
                                need_num(j, "t0", "model"),
                                need_point(j, "x0", "model")};
    p.validate();
    return p;
  }
  if (kind == "mixture") {
    const double sigma = need_num(j, "sigma", "model");
    const double t0 = need_num(j, "t0", "model");
    const auto x0 = need_point(j, "x0", "model");
    ecm::move::MixtureParams p{
        need_num(j, "alpha", "model"),
        {sigma, t0, x0},
        {{need_num(j, "tau", "model"), sigma, need_point(j, "z", "model")},
         t0,
         x0}};
    p.validate();
    return p;
  }
  throw ConfigError("model.kind: unknown kind '" + kind + "'");
}

json model_to_json(const ecm::move::MovementModel& model) {
  json j;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ecm::move::OUParams>) {
          j = {{"kind", "ou"}, {"tau", p.tau}, {"sigma", p.sigma},
               {"z", {p.z[0], p.z[1]}}};
        } else if constexpr (std::is_same_v<T,
                                            ecm::move::ConditionedOUParams>) {
          j = {{"kind", "conditioned_ou"}, {"tau", p.base.tau},
               {"sigma", p.base.sigma}, {"z", {p.base.z[0], p.base.z[1]}},
               {"t0", p.t0}, {"x0", {p.x0[0], p.x0[1]}}};
        } else if constexpr (std::is_same_v<T, ecm::move::BrownianParams>) {
          j = {{"kind", "brownian"}, {"sigma", p.sigma}, {"t0", p.t0},
               {"x0", {p.x0[0], p.x0[1]}}};
        } else {
          j = {{"kind", "mixture"}, {"alpha", p.alpha}, {"tau", p.ou.base.tau},
               {"sigma", p.brownian.sigma},
               {"z", {p.ou.base.z[0], p.ou.base.z[1]}}, {"t0", p.brownian.t0},
               {"x0", {p.brownian.x0[0], p.brownian.x0[1]}}};
        }
      },
      model);
  return j;
}

ecm::sim::DesignSpec parse_design_spec(const json& j) {
  ecm::sim::DesignSpec spec;
  spec.n_times = static_cast<int>(need_int(j, "n_times", "design"));
  const json& win = need(j, "time_window", "design");
  if (!win.is_array() || win.size() != 2)
    throw ConfigError("design.time_window: want [lo, hi]");
  spec.time_window = {win[0].get<double>(), win[1].get<double>()};
  const json& cpt = need(j, "cells_per_time", "design");
  if (!cpt.is_array() || cpt.size() != 2)
    throw ConfigError("design.cells_per_time: want [min, max]");
  spec.min_cells_per_time = cpt[0].get<int>();
  spec.max_cells_per_time = cpt[1].get<int>();
  spec.cell_side = need_num(j, "cell_side", "design");
  const json& dom = need(j, "domain", "design");
  const json& dx = need(dom, "x", "design.domain");
  const json& dy = need(dom, "y", "design.domain");
  if (!dx.is_array() || dx.size() != 2 || !dy.is_array() || dy.size() != 2)
    throw ConfigError("design.domain: want x:[lo,hi], y:[lo,hi]");
  spec.placement_domain = {{dx[0].get<double>(), dx[1].get<double>()},
                           {dy[0].get<double>(), dy[1].get<double>()}};
  spec.validate();
  return spec;
}

ecm::PopulationSize parse_sim_size(const json& j) {
  const std::string kind = need_str(j, "kind", "size");
  if (kind == "known")
    return ecm::PopulationSize::known(need_int(j, "n", "size"));
  if (kind == "poisson")
    return ecm::PopulationSize::poisson_rate(need_num(j, "lambda", "size"));
  throw ConfigError("size.kind: want 'known' or 'poisson'");
}

// ---------------------------------------------------------------------------
// Fit setup shared by fit, bootstrap and study

struct FamilyLayout {
  std::vector<std::string> names;          // transformed-scale names
  std::vector<ecm::infer::Transform> transforms;
};

FamilyLayout family_layout(const std::string& family) {
  using T = ecm::infer::Transform;
  if (family == "ou" || family == "conditioned_ou")
    return {{"log_tau", "log_sigma", "z1", "z2"},
            {T::kLog, T::kLog, T::kIdentity, T::kIdentity}};
  if (family == "brownian") return {{"log_sigma"}, {T::kLog}};
  if (family == "mixture")
    return {{"logit_alpha", "log_tau", "log_sigma", "z1", "z2"},
            {T::kLogit, T::kLog, T::kLog, T::kIdentity, T::kIdentity}};
  throw ConfigError("family: unknown family '" + family + "'");
}

// Natural-scale parameter vector -> movement model.
ecm::move::MovementModel family_model(const std::string& family,
                                      const Eigen::VectorXd& nat,
                                      double t0,
                                      const std::array<double, 2>& x0) {
  if (family == "ou")
    return ecm::move::OUParams{nat[0], nat[1], {nat[2], nat[3]}};
  if (family == "conditioned_ou")
    return ecm::move::ConditionedOUParams{
        {nat[0], nat[1], {nat[2], nat[3]}}, t0, x0};
  if (family == "brownian")
    return ecm::move::BrownianParams{nat[0], t0, x0};
  if (family == "mixture")
    return ecm::move::MixtureParams{
        nat[0],
        {nat[2], t0, x0},
        {{nat[1], nat[2], {nat[3], nat[4]}}, t0, x0}};
  throw ConfigError("family: unknown family '" + family + "'");
}

struct FitSetup {
  ecm::infer::EstimatorKind kind = ecm::infer::EstimatorKind::kComposite;
  std::string family;
  ecm::infer::ParamSpace space;
  ecm::infer::ModelBinding binding;
  bool fits_lambda = false;
};

ecm::infer::EstimatorKind parse_estimator(const json& cfg) {
  const std::string est = need_str(cfg, "estimator", "config");
  if (est == "mgle") return ecm::infer::EstimatorKind::kGaussian;
  if (est == "mcle") return ecm::infer::EstimatorKind::kComposite;
  throw ConfigError("estimator: want 'mgle' or 'mcle'");
}

FitSetup build_fit_setup(const json& cfg, const ecm::sim::SurveyDesign& design) {
  FitSetup setup;
  setup.kind = parse_estimator(cfg);
  setup.family = need_str(cfg, "family", "config");
  FamilyLayout layout = family_layout(setup.family);

  double t0 = 0.0;
  std::array<double, 2> x0{0.0, 0.0};
  if (setup.family != "ou") {
    const json& fixed = need(cfg, "fixed", "config");
    t0 = need_num(fixed, "t0", "fixed");
    x0 = need_point(fixed, "x0", "fixed");
  }

  const json& size = need(cfg, "size", "config");
  const std::string size_kind = need_str(size, "kind", "size");
  std::optional<ecm::PopulationSize> fixed_size;
  if (size_kind == "known") {
    fixed_size = ecm::PopulationSize::known(need_int(size, "n", "size"));
  } else if (size_kind == "poisson_known") {
    fixed_size =
        ecm::PopulationSize::poisson_rate(need_num(size, "lambda", "size"));
  } else if (size_kind == "poisson") {
    setup.fits_lambda = true;
    layout.names.push_back("log_lambda");
    layout.transforms.push_back(ecm::infer::Transform::kLog);
  } else {
    throw ConfigError("size.kind: want 'known', 'poisson_known' or 'poisson'");
  }

  const json& space_j = need(cfg, "space", "config");
  const int dim = static_cast<int>(layout.names.size());
  setup.space.names = layout.names;
  setup.space.transforms = layout.transforms;
  setup.space.box.lower.resize(dim);
  setup.space.box.upper.resize(dim);
  std::size_t n_starts = 0;
  std::vector<std::vector<double>> start_cols(dim);
  for (int i = 0; i < dim; ++i) {
    const json& pj = need(space_j, layout.names[i], "space");
    const json& b = need(pj, "bounds", "space." + layout.names[i]);
    if (!b.is_array() || b.size() != 2)
      throw ConfigError("space." + layout.names[i] + ".bounds: want [lo, hi]");
    setup.space.box.lower[i] = b[0].get<double>();
    setup.space.box.upper[i] = b[1].get<double>();
    const json& s = need(pj, "starts", "space." + layout.names[i]);
    if (!s.is_array() || s.empty())
      throw ConfigError("space." + layout.names[i] +
                        ".starts: want a nonempty array");
    if (i == 0) n_starts = s.size();
    if (s.size() != n_starts)
      throw ConfigError("space: all starts arrays must have equal length");
    for (const json& v : s) start_cols[i].push_back(v.get<double>());
  }
  for (std::size_t si = 0; si < n_starts; ++si) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = start_cols[i][si];
    setup.space.starts.push_back(v);
  }
  setup.space.validate();

  const std::string family = setup.family;
  const bool fits_lambda = setup.fits_lambda;
  setup.binding.table = [design, family, t0, x0,
                         fits_lambda](const Eigen::VectorXd& nat) {
    const Eigen::Index n_model = nat.size() - (fits_lambda ? 1 : 0);
    return ecm::move::build_path_table(
        family_model(family, nat.head(n_model), t0, x0), design);
  };
  if (fixed_size.has_value()) {
    const ecm::PopulationSize sz = *fixed_size;
    setup.binding.size = [sz](const Eigen::VectorXd&) { return sz; };
  } else {
    setup.binding.size = [](const Eigen::VectorXd& nat) {
      return ecm::PopulationSize::poisson_rate(nat[nat.size() - 1]);
    };
  }
  return setup;
}

void warn_if_mgle_low_counts(const FitSetup& setup,
                             const ecm::CountArrangement& counts) {
  if (setup.kind != ecm::infer::EstimatorKind::kGaussian) return;
  double total = 0.0;
  const int n = counts.schedule.n_times();
  for (int k = 0; k < n; ++k)
    total += static_cast<double>(counts.total_at(k));
  if (total / n < 1000.0)
    std::fprintf(stderr,
                 "warning: Gaussian pseudo-likelihood is unreliable when mean "
                 "total counts per time (%.1f) are below 1000; prefer the "
                 "composite estimator\n",
                 total / n);
}

// ---------------------------------------------------------------------------
// JSON result shapes

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json fit_result_json(const ecm::infer::FitResult& fr,
                     const std::string& estimator,
                     const std::string& family) {
  json starts = json::array();
  for (const auto& s : fr.starts)
    starts.push_back({{"index", s.start_index},
                      {"converged", s.run.converged},
                      {"status", s.run.status},
                      {"objective", s.run.f},
                      {"iterations", s.run.iterations},
                      {"evaluations", s.run.evaluations},
                      {"x", vector_json(s.run.x)}});
  return {{"format_version", ecm::io::kFormatVersion},
          {"estimator", estimator},
          {"family", family},
          {"names", fr.names},
          {"estimate_transformed", vector_json(fr.x_transformed)},
          {"estimate_natural", vector_json(fr.x_natural)},
          {"loglik", fr.loglik},
          {"hessian", matrix_json(fr.hessian)},
          {"min_hessian_eigenvalue", fr.min_hessian_eigenvalue},
          {"erratic", fr.erratic},
          {"winner_start", fr.winner_start},
          {"iterations", fr.iterations},
          {"evaluations", fr.evaluations},
          {"starts", starts}};
}

void write_json_atomic(const std::string& path, const json& j) {
  ecm::io::write_text_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const json& cfg, int replicates, bool replicates_given) {
  const std::uint64_t seed =
      static_cast<std::uint64_t>(need_int(cfg, "seed", "config"));
  ecm::move::MovementModel model = parse_model(need(cfg, "model", "config"));
  ecm::PopulationSize size = parse_sim_size(need(cfg, "size", "config"));
  const json& out_j = need(cfg, "output", "config");
  const std::string counts_path = need_str(out_j, "counts", "output");
  const std::string times_path = need_str(out_j, "times", "output");
  const std::string meta_path = need_str(out_j, "metadata", "output");

  const json& design_j = need(cfg, "design", "config");
  ecm::sim::SurveyDesign design;
  if (design_j.contains("files")) {
    const json& files = design_j["files"];
    design = ecm::io::read_counts_csv(need_str(files, "counts", "design.files"),
                                      need_str(files, "times", "design.files"))
                 .design;
  } else {
    ecm::sim::DesignSpec spec = parse_design_spec(design_j);
    ecm::RngStream design_rng = ecm::RngStream::derive(seed, {0xDE51});
    design = ecm::sim::generate_design(spec, design_rng);
  }

  ecm::io::write_times_csv(times_path, design.times);

  json meta = {{"format_version", ecm::io::kFormatVersion},
               {"seed", seed},
               {"model", model_to_json(model)},
               {"size", size.is_known()
                            ? json{{"kind", "known"}, {"n", size.count()}}
                            : json{{"kind", "poisson"}, {"lambda", size.rate()}}},
               {"times", times_path},
               {"design",
                {{"n_times", design.times.size()},
                 {"cells_per_time",
                  [&] {
                    json a = json::array();
                    for (const auto& row : design.cells) a.push_back(row.size());
                    return a;
                  }()}}}};

  json files = json::array();
  auto run_one = [&](std::uint64_t scenario_seed, const std::string& path) {
    ecm::sim::ScenarioResult res = ecm::sim::simulate_scenario(
        {model, design, size, scenario_seed});
    ecm::io::write_counts_csv(path, design, res.counts);
    json entry = {{"counts", path},
                  {"seed", scenario_seed},
                  {"realized_n", res.realized_n}};
    if (!res.explorer.empty()) {
      std::int64_t ne = 0;
      for (auto f : res.explorer) ne += f;
      entry["explorer_count"] = ne;
    }
    files.push_back(entry);
  };

  if (!replicates_given) {
    run_one(seed, counts_path);
  } else {
    meta["replicates"] = replicates;
    for (int r = 0; r < replicates; ++r) {
      ecm::RngStream s = ecm::RngStream::derive(seed, {0x5CE0,
                                                       static_cast<std::uint64_t>(r)});
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "_%04d", r);
      std::string path = counts_path;
      const auto dot = path.rfind('.');
      if (dot == std::string::npos)
        path += suffix;
      else
        path.insert(dot, suffix);
      run_one(s.next_u64(), path);
    }
  }
  meta["files"] = files;
  write_json_atomic(meta_path, meta);
  return 0;
}

// ---------------------------------------------------------------------------
// fit

int cmd_fit(const json& cfg) {
  ecm::io::CountsFile data = ecm::io::read_counts_csv(
      need_str(cfg, "counts", "config"), need_str(cfg, "times", "config"));
  FitSetup setup = build_fit_setup(cfg, data.design);
  warn_if_mgle_low_counts(setup, data.counts);

  ecm::infer::FitResult fr;
  try {
    fr = ecm::infer::fit(setup.kind, data.counts, setup.binding, setup.space);
  } catch (const std::runtime_error& e) {
    throw NumericalError(e.what());
  }
  const std::string est =
      setup.kind == ecm::infer::EstimatorKind::kGaussian ? "mgle" : "mcle";
  write_json_atomic(need_str(need(cfg, "output", "config"), "fit", "output"),
                    fit_result_json(fr, est, setup.family));
  if (fr.erratic)
    std::fprintf(stderr,
                 "warning: fit is erratic (min Hessian eigenvalue %.3e)\n",
                 fr.min_hessian_eigenvalue);
  return 0;
}

// ---------------------------------------------------------------------------
// bootstrap

std::string ci_markdown(const std::vector<std::string>& names,
                        const ecm::infer::BootstrapResult& br) {
  std::ostringstream md;
  md << "| Parameter | 2.5% | 97.5% |\n|---|---|---|\n";
  for (std::size_t i = 0; i < names.size(); ++i)
    md << "| " << names[i] << " | "
       << ecm::io::format_double(br.ci_lower[static_cast<Eigen::Index>(i)])
       << " | "
       << ecm::io::format_double(br.ci_upper[static_cast<Eigen::Index>(i)])
       << " |\n";
  return md.str();
}

std::string ci_csv(const std::vector<std::string>& names,
                   const ecm::infer::BootstrapResult& br) {
  std::ostringstream out;
  out << "format_version," << ecm::io::kFormatVersion << "\n";
  out << "parameter,lower,upper\n";
  for (std::size_t i = 0; i < names.size(); ++i)
    out << names[i] << ','
        << ecm::io::format_double(br.ci_lower[static_cast<Eigen::Index>(i)])
        << ','
        << ecm::io::format_double(br.ci_upper[static_cast<Eigen::Index>(i)])
        << "\n";
  return out.str();
}

json bootstrap_result_json(const std::vector<std::string>& names,
                           const ecm::infer::BootstrapResult& br) {
  json ci = json::array();
  for (std::size_t i = 0; i < names.size(); ++i)
    ci.push_back({{"name", names[i]},
                  {"lower", br.ci_lower[static_cast<Eigen::Index>(i)]},
                  {"upper", br.ci_upper[static_cast<Eigen::Index>(i)]}});
  return {{"format_version", ecm::io::kFormatVersion},
          {"names", names},
          {"n_requested", br.n_requested},
          {"n_retained", br.n_retained},
          {"low_retention", br.low_retention},
          {"ci", ci},
          {"samples", matrix_json(br.samples)}};
}

int cmd_bootstrap(const json& cfg, int jobs) {
  json fit_j;
  try {
    fit_j = json::parse(ecm::io::read_text(need_str(cfg, "fit", "config")));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("fit file: ") + e.what());
  }
  if (fit_j.value("erratic", true))
    throw NumericalError("input fit is erratic; bootstrap refused");

  ecm::io::CountsFile data = ecm::io::read_counts_csv(
      need_str(cfg, "counts", "config"), need_str(cfg, "times", "config"));
  FitSetup setup = build_fit_setup(cfg, data.design);

  ecm::infer::FitResult fitted;
  fitted.names = setup.space.names;
  const json& nat = need(fit_j, "estimate_natural", "fit file");
  if (!nat.is_array() ||
      nat.size() != static_cast<std::size_t>(setup.space.dim()))
    throw ConfigError("fit file: estimate_natural has the wrong length");
  fitted.x_natural.resize(setup.space.dim());
  for (int i = 0; i < setup.space.dim(); ++i)
    fitted.x_natural[i] = nat[i].get<double>();
  fitted.x_transformed = setup.space.transformed(fitted.x_natural);
  fitted.erratic = false;

  const int n = static_cast<int>(need_int(cfg, "n", "config"));
  const std::uint64_t seed =
      static_cast<std::uint64_t>(need_int(cfg, "seed", "config"));

  const std::string family = setup.family;
  const bool fits_lambda = setup.fits_lambda;
  const ecm::sim::SurveyDesign design = data.design;
  const ecm::infer::ModelBinding binding = setup.binding;
  double fixed_t0 = 0.0;
  std::array<double, 2> fixed_x0{0.0, 0.0};
  if (family != "ou") {
    const json& fixed = need(cfg, "fixed", "config");
    fixed_t0 = need_num(fixed, "t0", "fixed");
    fixed_x0 = need_point(fixed, "x0", "fixed");
  }
  ecm::infer::Regenerator regen = [design, family, fits_lambda, binding,
                                   fixed_t0,
                                   fixed_x0](const Eigen::VectorXd& nat_v,
                                             ecm::RngStream& stream) {
    const double t0 = fixed_t0;
    const std::array<double, 2>& x0 = fixed_x0;
    const Eigen::Index n_model = nat_v.size() - (fits_lambda ? 1 : 0);
    ecm::move::MovementModel model =
        family_model(family, nat_v.head(n_model), t0, x0);
    ecm::PopulationSize size = binding.size(nat_v);
    std::int64_t count = size.is_known() ? size.count()
                                         : stream.poisson(size.rate());
    ecm::sim::TrajectorySet traj = ecm::sim::sample_trajectories(
        model, design.times, static_cast<int>(count), stream);
    return ecm::sim::count_arrangement(traj, design);
  };

  ecm::infer::BootstrapResult br;
  try {
    br = ecm::infer::parametric_bootstrap(fitted, regen, setup.kind, binding,
                                          setup.space, n, seed, jobs);
  } catch (const std::exception& e) {
    throw NumericalError(e.what());
  }
  if (br.low_retention)
    std::fprintf(stderr, "warning: only %d of %d bootstrap refits usable\n",
                 br.n_retained, br.n_requested);

  const json& out_j = need(cfg, "output", "config");
  write_json_atomic(need_str(out_j, "bootstrap", "output"),
                    bootstrap_result_json(setup.space.names, br));
  if (out_j.contains("ci_markdown"))
    ecm::io::write_text_atomic(out_j["ci_markdown"].get<std::string>(),
                               ci_markdown(setup.space.names, br));
  if (out_j.contains("ci_csv"))
    ecm::io::write_text_atomic(out_j["ci_csv"].get<std::string>(),
                               ci_csv(setup.space.names, br));
  return 0;
}

// ---------------------------------------------------------------------------
// vote transfer

std::string percent_cell(double p) {
  if (p < 0.0005) return "~0 %";
  if (p > 0.9995) return "~100 %";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f %%", 100.0 * p);
  return buf;
}

int cmd_vote_transfer(const json& cfg, int jobs) {
  ecm::vote::LoadReport report =
      ecm::vote::load_districts(need_str(cfg, "districts", "config"));
  for (const auto& rej : report.rejected)
    std::fprintf(stderr, "warning: rejected district '%s' (line %d): %s\n",
                 rej.id.c_str(), rej.line, rej.reason.c_str());

  const int n_starts = static_cast<int>(cfg.value("n_starts", 3));
  const std::uint64_t seed =
      static_cast<std::uint64_t>(need_int(cfg, "seed", "config"));
  const int boot_n = static_cast<int>(cfg.value("bootstrap_n", 0));

  std::vector<std::string> first_labels, second_labels;
  if (cfg.contains("labels")) {
    const json& lj = cfg["labels"];
    if (lj.contains("first"))
      first_labels = lj["first"].get<std::vector<std::string>>();
    if (lj.contains("second"))
      second_labels = lj["second"].get<std::vector<std::string>>();
  }
  for (int l = static_cast<int>(first_labels.size()); l < report.m1; ++l)
    first_labels.push_back("opt_" + std::to_string(l + 1));
  for (int c = static_cast<int>(second_labels.size()); c < 3; ++c)
    second_labels.push_back("res_" + std::to_string(c + 1));

  ecm::vote::TransferFitResult fr;
  try {
    fr = ecm::vote::fit_transfer(report.districts, n_starts, seed);
  } catch (const std::runtime_error& e) {
    throw NumericalError(e.what());
  }

  std::optional<ecm::infer::BootstrapResult> br;
  if (boot_n > 0) {
    if (fr.erratic)
      throw NumericalError("transfer fit is erratic; bootstrap refused");
    try {
      br = ecm::vote::transfer_bootstrap(fr, report.districts, boot_n, seed,
                                         n_starts, jobs);
    } catch (const std::exception& e) {
      throw NumericalError(e.what());
    }
  }

  json j = {{"format_version", ecm::io::kFormatVersion},
            {"n_districts", report.districts.size()},
            {"rejected_rows", report.rejected.size()},
            {"first_options", first_labels},
            {"second_options", second_labels},
            {"matrix", matrix_json(fr.matrix.p)},
            {"logits", vector_json(fr.logits)},
            {"loglik", fr.loglik},
            {"min_hessian_eigenvalue", fr.min_hessian_eigenvalue},
            {"erratic", fr.erratic},
            {"winner_start", fr.winner_start},
            {"skipped_districts", fr.skipped_districts},
            {"evaluations", fr.evaluations}};
  if (br.has_value()) {
    json ci = json::array();
    for (int l = 0; l < report.m1; ++l)
      for (int c = 0; c < 3; ++c)
        ci.push_back({{"row", first_labels[l]},
                      {"col", second_labels[c]},
                      {"lower", br->ci_lower[3 * l + c]},
                      {"upper", br->ci_upper[3 * l + c]}});
    j["bootstrap"] = {{"n_requested", br->n_requested},
                      {"n_retained", br->n_retained},
                      {"low_retention", br->low_retention},
                      {"ci", ci}};
  }

  const json& out_j = need(cfg, "output", "config");
  write_json_atomic(need_str(out_j, "fit", "output"), j);

  if (out_j.contains("table_markdown")) {
    std::ostringstream md;
    md << "|  |";
    for (const auto& s : second_labels) md << ' ' << s << " |";
    md << "\n|---|";
    for (std::size_t c = 0; c < second_labels.size(); ++c) md << "---|";
    md << "\n";
    for (int l = 0; l < report.m1; ++l) {
      md << "| " << first_labels[l] << " |";
      for (int c = 0; c < 3; ++c) {
        md << ' ' << percent_cell(fr.matrix.p(l, c));
        if (br.has_value())
          md << " [" << percent_cell(br->ci_lower[3 * l + c]) << ", "
             << percent_cell(br->ci_upper[3 * l + c]) << "]";
        md << " |";
      }
      md << "\n";
    }
    ecm::io::write_text_atomic(out_j["table_markdown"].get<std::string>(),
                               md.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// study

struct StudySetting {
  std::string estimator;
  ecm::PopulationSize size = ecm::PopulationSize::known(1);
  bool fit_lambda = false;
  bool narrow_lambda = false;
};

struct RepRecord {
  int setting = 0;
  int replicate = 0;
  std::string status;  // ok | erratic | failed
  std::vector<double> transformed;
  std::vector<double> natural;
  double loglik = 0.0;
};

// Appendix-style protocol: tau starts at half the true value, the mean
// reversion rate is scanned across orders of magnitude, the center
// starts at the origin, lambda at half the true rate.
ecm::infer::ParamSpace study_space(const ecm::move::OUParams& truth,
                                   const StudySetting& st) {
  using T = ecm::infer::Transform;
  ecm::infer::ParamSpace space;
  space.names = {"log_tau", "log_sigma", "z1", "z2"};
  space.transforms = {T::kLog, T::kLog, T::kIdentity, T::kIdentity};
  std::vector<double> lo = {-8.0, -8.0, -1.0, -1.0};
  std::vector<double> hi = {6.0, 10.0, 1.0, 1.0};

  const double theta = truth.theta();
  std::vector<double> theta0 = {theta / 20.0, theta / 2.0, 5.0 * theta};
  const bool poisson = !st.size.is_known();
  if (poisson) theta0.push_back(50.0 * theta);

  if (st.fit_lambda) {
    space.names.push_back("log_lambda");
    space.transforms.push_back(T::kLog);
    const double lambda = st.size.rate();
    if (st.narrow_lambda) {
      lo.push_back(std::log(lambda / 5.0));
      hi.push_back(std::log(6.0 * lambda));
    } else {
      lo.push_back(std::log(lambda / 10.0));
      hi.push_back(std::log(10.0 * lambda));
    }
  }

  const int dim = static_cast<int>(space.names.size());
  space.box.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), dim);
  space.box.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), dim);
  const double tau0 = truth.tau / 2.0;
  for (double th0 : theta0) {
    Eigen::VectorXd s(dim);
    s[0] = std::log(tau0);
    s[1] = std::log(tau0 * std::sqrt(2.0 * th0));
    s[2] = 0.0;
    s[3] = 0.0;
    if (st.fit_lambda) s[4] = std::log(st.size.rate() / 2.0);
    space.starts.push_back(s);
  }
  space.validate();
  return space;
}

int cmd_study(const json& cfg, int jobs, bool resume) {
  const std::uint64_t seed =
      static_cast<std::uint64_t>(need_int(cfg, "seed", "config"));
  const json& model_j = need(cfg, "model", "config");
  if (need_str(model_j, "kind", "model") != "ou")
    throw ConfigError("study: only the steady OU family is supported");
  ecm::move::OUParams truth{need_num(model_j, "tau", "model"),
                            need_num(model_j, "sigma", "model"),
                            need_point(model_j, "z", "model")};
  truth.validate();

  ecm::sim::DesignSpec spec = parse_design_spec(need(cfg, "design", "config"));
  const int replicates = static_cast<int>(need_int(cfg, "replicates", "config"));
  const json& grid_j = need(cfg, "grid", "config");
  if (!grid_j.is_array()) throw ConfigError("grid: want an array");

  std::vector<StudySetting> settings;
  for (const json& g : grid_j) {
    StudySetting st;
    st.estimator = need_str(g, "estimator", "grid");
    if (st.estimator != "mgle" && st.estimator != "mcle")
      throw ConfigError("grid.estimator: want 'mgle' or 'mcle'");
    st.size = parse_sim_size(need(g, "size", "grid"));
    st.fit_lambda = g.value("fit_lambda", !st.size.is_known());
    if (st.fit_lambda && st.size.is_known())
      throw ConfigError("grid: fit_lambda needs a poisson size");
    st.narrow_lambda = g.value("narrow_lambda", false);
    settings.push_back(st);
  }

  const json& out_j = need(cfg, "output", "config");
  const std::string long_path = need_str(out_j, "long", "output");
  const std::string summary_path = need_str(out_j, "summary", "output");
  const std::string state_path = need_str(out_j, "state", "output");

  // One design per study: the law is what matters, the layout is held
  // fixed across settings and replicates.
  ecm::RngStream design_rng = ecm::RngStream::derive(seed, {0xDE51});
  ecm::sim::SurveyDesign design = ecm::sim::generate_design(spec, design_rng);

  std::map<std::pair<int, int>, RepRecord> done;
  if (resume) {
    std::ifstream in(state_path);
    std::string line;
    int lineno = 0;
    while (in && std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded()) {
        std::fprintf(stderr,
                     "warning: %s line %d unparseable, redoing that replicate\n",
                     state_path.c_str(), lineno);
        continue;
      }
      RepRecord r;
      r.setting = rec["setting"].get<int>();
      r.replicate = rec["replicate"].get<int>();
      r.status = rec["status"].get<std::string>();
      if (r.status != "failed") {
        r.transformed = rec["estimate_transformed"].get<std::vector<double>>();
        r.natural = rec["estimate_natural"].get<std::vector<double>>();
        r.loglik = rec["loglik"].get<double>();
      }
      done[{r.setting, r.replicate}] = std::move(r);
    }
  }

  std::mutex state_mu;
  std::ofstream state_out(state_path,
                          resume ? std::ios::app : std::ios::trunc);
  if (!state_out) throw ConfigError("cannot open " + state_path);

  struct Task {
    int setting;
    int replicate;
  };
  std::vector<Task> tasks;
  for (int s = 0; s < static_cast<int>(settings.size()); ++s)
    for (int r = 0; r < replicates; ++r)
      if (done.find({s, r}) == done.end()) tasks.push_back({s, r});

  std::vector<ecm::infer::ParamSpace> spaces;
  std::vector<ecm::infer::ModelBinding> bindings;
  for (const StudySetting& st : settings) {
    spaces.push_back(study_space(truth, st));
    ecm::infer::ModelBinding b;
    b.table = [design](const Eigen::VectorXd& nat) {
      return ecm::move::build_path_table(
          ecm::move::OUParams{nat[0], nat[1], {nat[2], nat[3]}}, design);
    };
    if (st.size.is_known()) {
      const ecm::PopulationSize sz = st.size;
      b.size = [sz](const Eigen::VectorXd&) { return sz; };
    } else if (st.fit_lambda) {
      b.size = [](const Eigen::VectorXd& nat) {
        return ecm::PopulationSize::poisson_rate(nat[nat.size() - 1]);
      };
    } else {
      const ecm::PopulationSize sz = st.size;
      b.size = [sz](const Eigen::VectorXd&) { return sz; };
    }
    bindings.push_back(std::move(b));
  }

  auto run_task = [&](const Task& task) {
    const StudySetting& st = settings[task.setting];
    RepRecord rec;
    rec.setting = task.setting;
    rec.replicate = task.replicate;
    ecm::RngStream scen_rng = ecm::RngStream::derive(
        seed, {static_cast<std::uint64_t>(task.setting),
               static_cast<std::uint64_t>(task.replicate)});
    try {
      ecm::sim::ScenarioResult data = ecm::sim::simulate_scenario(
          {truth, design, st.size, scen_rng.next_u64()});
      const auto kind = st.estimator == "mgle"
                            ? ecm::infer::EstimatorKind::kGaussian
                            : ecm::infer::EstimatorKind::kComposite;
      ecm::infer::FitResult fr =
          ecm::infer::fit(kind, data.counts, bindings[task.setting],
                          spaces[task.setting]);
      rec.status = fr.erratic ? "erratic" : "ok";
      rec.loglik = fr.loglik;
      for (Eigen::Index i = 0; i < fr.x_transformed.size(); ++i) {
        rec.transformed.push_back(fr.x_transformed[i]);
        rec.natural.push_back(fr.x_natural[i]);
      }
    } catch (const std::exception& e) {
      rec.status = "failed";
      std::fprintf(stderr, "warning: setting %d replicate %d failed: %s\n",
                   task.setting, task.replicate, e.what());
    }
    json line = {{"setting", rec.setting},
                 {"replicate", rec.replicate},
                 {"status", rec.status}};
    if (rec.status != "failed") {
      line["estimate_transformed"] = rec.transformed;
      line["estimate_natural"] = rec.natural;
      line["loglik"] = rec.loglik;
    }
    std::lock_guard<std::mutex> lock(state_mu);
    state_out << line.dump() << "\n";
    state_out.flush();
    done[{rec.setting, rec.replicate}] = std::move(rec);
  };

  if (jobs <= 1) {
    for (const Task& t : tasks) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int n_workers = std::min<int>(jobs, static_cast<int>(tasks.size()));
    for (int w = 0; w < n_workers; ++w)
      workers.emplace_back([&]() {
        for (std::size_t i = next.fetch_add(1); i < tasks.size();
             i = next.fetch_add(1))
          run_task(tasks[i]);
      });
    for (auto& t : workers) t.join();
  }

  // Long-format CSV, one row per (setting, replicate, parameter).
  std::ostringstream longcsv;
  longcsv << "format_version," << ecm::io::kFormatVersion << "\n";
  longcsv << "setting,estimator,size_kind,size_value,replicate,parameter,"
             "estimate_transformed,estimate_natural,status\n";
  for (int s = 0; s < static_cast<int>(settings.size()); ++s) {
    const StudySetting& st = settings[s];
    const auto& names = spaces[s].names;
    for (int r = 0; r < replicates; ++r) {
      auto it = done.find({s, r});
      if (it == done.end()) continue;
      const RepRecord& rec = it->second;
      for (std::size_t pi = 0; pi < names.size(); ++pi) {
        longcsv << s << ',' << st.estimator << ','
                << (st.size.is_known() ? "known" : "poisson") << ','
                << ecm::io::format_double(st.size.mean()) << ',' << r << ','
                << names[pi] << ',';
        if (rec.status == "failed")
          longcsv << ",,";
        else
          longcsv << ecm::io::format_double(rec.transformed[pi]) << ','
                  << ecm::io::format_double(rec.natural[pi]) << ',';
        longcsv << rec.status << "\n";
      }
    }
  }
  ecm::io::write_text_atomic(long_path, longcsv.str());

  // Summary in the mean (bias) / RMSE layout, erratic and failed
  // replicates excluded, transformed scale.
  std::ostringstream md;
  md << "| Setting | Estimator | Size | Parameter | Mean (bias) | RMSE | "
        "Used | Erratic | Failed |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  for (int s = 0; s < static_cast<int>(settings.size()); ++s) {
    const StudySetting& st = settings[s];
    const auto& space = spaces[s];
    std::vector<double> truth_t = {std::log(truth.tau), std::log(truth.sigma),
                                   truth.z[0], truth.z[1]};
    if (st.fit_lambda) truth_t.push_back(std::log(st.size.rate()));
    int n_ok = 0, n_erratic = 0, n_failed = 0;
    for (int r = 0; r < replicates; ++r) {
      auto it = done.find({s, r});
      if (it == done.end()) continue;
      if (it->second.status == "ok") ++n_ok;
      else if (it->second.status == "erratic") ++n_erratic;
      else ++n_failed;
    }
    for (std::size_t pi = 0; pi < space.names.size(); ++pi) {
      double sum = 0.0, sum_sq = 0.0;
      for (int r = 0; r < replicates; ++r) {
        auto it = done.find({s, r});
        if (it == done.end() || it->second.status != "ok") continue;
        const double v = it->second.transformed[pi];
        sum += v;
        sum_sq += (v - truth_t[pi]) * (v - truth_t[pi]);
      }
      char mean_cell[64] = "-";
      char rmse_cell[32] = "-";
      if (n_ok > 0) {
        const double mean = sum / n_ok;
        std::snprintf(mean_cell, sizeof(mean_cell), "%.3f (%+.3f)", mean,
                      mean - truth_t[pi]);
        std::snprintf(rmse_cell, sizeof(rmse_cell), "%.3f",
                      std::sqrt(sum_sq / n_ok));
      }
      md << "| " << s << " | " << st.estimator << " | "
         << (st.size.is_known() ? "N=" : "lambda=")
         << ecm::io::format_double(st.size.mean()) << " | " << space.names[pi]
         << " | " << mean_cell << " | " << rmse_cell << " | " << n_ok << " | "
         << n_erratic << " | " << n_failed << " |\n";
    }
  }
  ecm::io::write_text_atomic(summary_path, md.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolving-category count models: simulation and estimation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 1;
  int replicates = 1;
  bool resume = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (JSON)")
        ->required();
    sub->add_option("--set", overrides,
                    "override config keys, e.g. --set model.tau=0.5");
  };

  CLI::App* sim = app.add_subcommand("simulate", "simulate count datasets");
  add_common(sim);
  CLI::Option* rep_opt =
      sim->add_option("--replicates", replicates, "write this many datasets");

  CLI::App* fit = app.add_subcommand("fit", "fit movement parameters");
  add_common(fit);

  CLI::App* boot = app.add_subcommand("bootstrap", "parametric bootstrap CIs");
  add_common(boot);
  boot->add_option("--jobs", jobs, "parallel refits");

  CLI::App* votes =
      app.add_subcommand("vote-transfer", "two-round transfer matrix");
  add_common(votes);
  votes->add_option("--jobs", jobs, "parallel bootstrap refits");

  CLI::App* study = app.add_subcommand("study", "replicated simulate+fit");
  add_common(study);
  study->add_option("--jobs", jobs, "parallel replicates");
  study->add_flag("--resume", resume, "re-use completed replicates");

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config(config_path, overrides);
    if (sim->parsed())
      return cmd_simulate(cfg, replicates, rep_opt->count() > 0);
    if (fit->parsed()) return cmd_fit(cfg);
    if (boot->parsed()) return cmd_bootstrap(cfg, jobs);
    if (votes->parsed()) return cmd_vote_transfer(cfg, jobs);
    if (study->parsed()) return cmd_study(cfg, jobs, resume);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
