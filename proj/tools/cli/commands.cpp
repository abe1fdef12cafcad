#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgee/csv_io.hpp"
#include "pgee/datagen.hpp"
#include "pgee/error.hpp"
#include "pgee/fit.hpp"
#include "pgee/sim.hpp"
#include "pgee/varest.hpp"

namespace pgee::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr std::size_t kFullReps = 5000;
constexpr double kBenchmarkMatch = 0.05;  // relative

struct ModelArgs {
  std::string input;
  std::string corr = "exch";
  std::string alpha = "estimate";
  std::string phi = "1";
  bool no_penalty = false;
  double tol = FitOptions{}.tol;
  int max_iter = FitOptions{}.max_iter;
  double beta_cap = FitOptions{}.beta_cap;
  bool json = false;
};

struct FitArgs : ModelArgs {
  std::string estimators = "all";
  double fg_threshold = EstimatorOptions{}.fg_threshold;
  double wb_exponent = EstimatorOptions{}.wb_exponent;
};

struct DiagnoseArgs : ModelArgs {
  std::string treatment_col;
};

struct SimArgs {
  std::string config;
  std::optional<std::size_t> reps;
  bool full = false;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;
  std::string out;
  std::string estimators;
  bool quiet = false;
};

std::string fixed(double v, int prec = 4) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string general(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string pvalue(double p) {
  if (!std::isfinite(p)) return "NA";
  if (p < 1e-4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", p);
    return buf;
  }
  return fixed(p, 4);
}

std::string pad(std::string s, std::size_t w, bool left = true) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double parse_number(const std::string& flag, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::MalformedInput, flag + " expects a number or 'estimate', got '" + text + "'");
}

WorkingModel working_model(const ModelArgs& a) {
  WorkingModel wm;
  wm.structure = parse_corr_structure(a.corr);
  if (a.alpha != "estimate") wm.alpha = parse_number("--alpha", a.alpha);
  if (wm.structure == CorrStructure::Independence) wm.alpha.reset();
  wm.dispersion = a.phi == "estimate" ? std::nullopt : std::optional<double>(parse_number("--phi", a.phi));
  return wm;
}

FitOptions fit_options(const ModelArgs& a) {
  FitOptions o;
  o.penalized = !a.no_penalty;
  o.tol = a.tol;
  o.max_iter = a.max_iter;
  o.beta_cap = a.beta_cap;
  validate_fit_options(o);
  return o;
}

std::string describe_sizes(const LongitudinalDataset& d) {
  std::size_t lo = d.max_cluster_size();
  for (const auto& c : d.clusters()) lo = std::min(lo, c.size());
  std::ostringstream s;
  if (d.balanced()) {
    s << "n_i = " << lo << ", balanced";
  } else {
    s << "n_i in [" << lo << ", " << d.max_cluster_size() << "], unbalanced";
  }
  return s.str();
}

void print_model_header(std::ostream& out, const char* cmd, const ModelArgs& a, const LongitudinalDataset& d,
                        const WorkingModel& wm, const FitOptions& o) {
  out << "pgee " << cmd << '\n';
  out << "input      " << a.input << '\n';
  out << "data       " << d.num_clusters() << " clusters (" << describe_sizes(d) << "), " << d.total_obs()
      << " observations, p = " << d.p() << '\n';
  out << "working    " << to_string(wm.structure);
  if (wm.structure != CorrStructure::Independence)
    out << "  alpha=" << (wm.alpha ? general(*wm.alpha) : std::string("estimate"));
  out << "  phi=" << (wm.dispersion ? general(*wm.dispersion) : std::string("estimate")) << '\n';
  out << "fit        " << (o.penalized ? "penalized" : "unpenalized") << "  tol=" << general(o.tol)
      << "  max_iter=" << o.max_iter << "  beta_cap=" << general(o.beta_cap) << '\n';
}

void print_fit_status(std::ostream& out, const PgeeFit& f, const LongitudinalDataset& d) {
  if (f.converged) {
    out << "status     converged in " << f.iterations << " iterations\n";
  } else {
    out << "status     did not converge: "
        << (f.diverged_reason ? to_string(*f.diverged_reason) : std::string_view("unknown")) << " after "
        << f.iterations << " iterations\n";
  }
  if (f.working.structure != CorrStructure::Independence) {
    out << "alpha_hat  " << fixed(f.alpha_hat) << (f.alpha_degenerate ? "  (clamped or degenerate)" : "") << '\n';
  }
  out << "phi_hat    " << fixed(f.phi_hat) << (f.phi_degenerate ? "  (floored)" : "") << '\n';
  if (f.saturated) out << "note       fitted probabilities reached the clamp (near separation)\n";
  out << '\n' << pad("coefficient", 14) << pad("estimate", 12, false) << '\n';
  for (std::size_t s = 0; s < d.p(); ++s) {
    out << pad(d.coef_names()[s], 14) << pad(fixed(f.beta_hat(static_cast<Eigen::Index>(s))), 12, false) << '\n';
  }
}

json model_config_json(const ModelArgs& a, const WorkingModel& wm, const FitOptions& o) {
  json c;
  c["input"] = a.input;
  c["corr"] = std::string(to_string(wm.structure));
  c["alpha"] = wm.alpha ? json(*wm.alpha) : json("estimate");
  c["phi"] = wm.dispersion ? json(*wm.dispersion) : json("estimate");
  c["penalized"] = o.penalized;
  c["tol"] = o.tol;
  c["max_iter"] = o.max_iter;
  c["beta_cap"] = o.beta_cap;
  return c;
}

json data_json(const LongitudinalDataset& d) {
  return {{"clusters", d.num_clusters()},
          {"observations", d.total_obs()},
          {"p", d.p()},
          {"balanced", d.balanced()},
          {"max_cluster_size", d.max_cluster_size()},
          {"coefficients", d.coef_names()}};
}

json fit_json(const PgeeFit& f, const LongitudinalDataset& d) {
  json beta = json::object();
  for (std::size_t s = 0; s < d.p(); ++s) beta[d.coef_names()[s]] = jnum(f.beta_hat(static_cast<Eigen::Index>(s)));
  return {{"converged", f.converged},
          {"iterations", f.iterations},
          {"diverged_reason", f.diverged_reason ? json(std::string(to_string(*f.diverged_reason))) : json(nullptr)},
          {"alpha_hat", f.alpha_hat},
          {"phi_hat", f.phi_hat},
          {"alpha_degenerate", f.alpha_degenerate},
          {"phi_degenerate", f.phi_degenerate},
          {"saturated", f.saturated},
          {"beta", beta}};
}

std::string reason_text(const VarianceEstimate& e) {
  if (!e.reason) return "non-positive variance";
  switch (*e.reason) {
    case IncomputableReason::UnbalancedPooling: return "pooling needs equal cluster sizes";
    case IncomputableReason::SingularLeverage: return "I - H_ii is singular";
    case IncomputableReason::NonPositiveVariance: return "non-positive variance";
  }
  return "not computable";
}

struct Diagnostic {
  std::optional<OvercorrectionDiagnostic> value;
  std::string error;
};

Diagnostic diagnose_kernel(const FitKernel& k) {
  Diagnostic d;
  try {
    d.value = overcorrection_diagnostic(k);
  } catch (const Error& e) {
    d.error = e.what();
  }
  return d;
}

std::string rho_line(const Diagnostic& diag, const LongitudinalDataset& d) {
  if (!diag.value) return "rho_s: undefined (" + diag.error + ")";
  std::string s = "rho_s: ";
  for (std::size_t j = 0; j < d.p(); ++j) {
    if (j) s += ", ";
    const auto& name = d.coef_names()[j];
    s += fixed(diag.value->rho(static_cast<Eigen::Index>(j)), 2) + " (" + (j == 0 ? "intercept" : name) + ")";
  }
  return s;
}

json rho_json(const Diagnostic& diag, const LongitudinalDataset& d) {
  if (!diag.value) return nullptr;
  json r = json::object();
  for (std::size_t j = 0; j < d.p(); ++j) r[d.coef_names()[j]] = diag.value->rho(static_cast<Eigen::Index>(j));
  return r;
}

LongitudinalDataset load(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::MalformedInput, "--input is required");
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MalformedInput, "no such file: " + path);
  return read_dataset_csv(path);
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto data = load(a.input);
  const auto wm = working_model(a);
  const auto opts = fit_options(a);
  validate_working_model(wm, data.max_cluster_size());
  const auto ids = parse_estimator_list(a.estimators);
  EstimatorOptions eo;
  eo.fg_threshold = a.fg_threshold;
  eo.wb_exponent = a.wb_exponent;

  const PgeeFit f = fit(data, wm, opts);
  const std::size_t N = data.num_clusters(), p = data.p();

  std::vector<VarianceEstimate> ests;
  Diagnostic diag;
  if (f.converged) {
    ests = estimate_all(f.kernel, ids, eo);
    diag = diagnose_kernel(f.kernel);
  }

  if (a.json) {
    json j;
    j["schema_version"] = kJsonSchemaVersion;
    j["command"] = "fit";
    auto cfg = model_config_json(a, wm, opts);
    json tags = json::array();
    for (auto id : ids) tags.push_back(std::string(to_string(id)));
    cfg["estimators"] = tags;
    cfg["fg_threshold"] = eo.fg_threshold;
    cfg["wb_exponent"] = eo.wb_exponent;
    j["config"] = cfg;
    j["data"] = data_json(data);
    j["fit"] = fit_json(f, data);
    json rows = json::array();
    for (const auto& e : ests) {
      json r;
      r["id"] = std::string(to_string(e.id));
      r["computable"] = e.computable;
      r["reason"] = e.reason ? json(std::string(to_string(*e.reason))) : json(nullptr);
      json coefs = json::array();
      for (std::size_t s = 0; s < p; ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        json c;
        c["name"] = data.coef_names()[s];
        if (e.usable(si)) {
          const auto w = wald_test(f.beta_hat(si), e.se(si), N, p);
          c["se"] = w.se;
          c["t"] = w.t;
          c["dof"] = w.dof;
          c["p_value"] = w.p_value;
          c["ci_low"] = w.ci_low;
          c["ci_high"] = w.ci_high;
        } else {
          c["se"] = nullptr;
        }
        coefs.push_back(std::move(c));
      }
      r["coefficients"] = std::move(coefs);
      rows.push_back(std::move(r));
    }
    j["estimators"] = std::move(rows);
    j["rho_s"] = rho_json(diag, data);
    if (!diag.error.empty()) j["rho_s_error"] = diag.error;
    out << j.dump(2) << '\n';
    return f.converged ? kOk : kNotConverged;
  }

  print_model_header(out, "fit", a, data, wm, opts);
  out << "estimators ";
  for (std::size_t e = 0; e < ids.size(); ++e) out << (e ? "," : "") << to_string(ids[e]);
  out << "  fg_threshold=" << general(eo.fg_threshold) << "  wb_exponent=" << general(eo.wb_exponent) << "\n\n";
  print_fit_status(out, f, data);
  if (!f.converged) {
    out << "\nno variance estimates: the fit did not converge\n";
    return kNotConverged;
  }

  out << "\nWald t tests on " << N - p << " degrees of freedom\n";
  for (std::size_t s = 0; s < p; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    out << '\n' << data.coef_names()[s] << "  (estimate " << fixed(f.beta_hat(si)) << ")\n";
    out << "  " << pad("estimator", 10) << pad("SE", 10, false) << pad("t", 9, false) << pad("p", 10, false)
        << "   95% CI\n";
    for (const auto& e : ests) {
      out << "  " << pad(std::string(to_string(e.id)), 10);
      if (!e.usable(si)) {
        out << pad("—", 12, false) << "   " << reason_text(e) << '\n';
        continue;
      }
      const auto w = wald_test(f.beta_hat(si), e.se(si), N, p);
      out << pad(fixed(w.se), 10, false) << pad(fixed(w.t, 3), 9, false) << pad(pvalue(w.p_value), 10, false)
          << "   [" << fixed(w.ci_low) << ", " << fixed(w.ci_high) << "]\n";
    }
  }
  out << '\n' << rho_line(diag, data) << '\n';
  return kOk;
}

struct Arms {
  std::size_t treated = 0;
  std::size_t control = 0;
};

Arms treatment_arms(const LongitudinalDataset& d, const std::string& col) {
  const auto& names = d.coef_names();
  const auto it = std::find(names.begin() + 1, names.end(), col);
  if (it == names.end()) throw Error(ErrorCode::MalformedInput, "--treatment-col: no covariate named '" + col + "'");
  const auto s = static_cast<Eigen::Index>(it - names.begin());
  Arms arms;
  for (const auto& c : d.clusters()) {
    const double v = c.X(0, s);
    if ((v != 0.0 && v != 1.0) || (c.X.col(s).array() != v).any()) {
      throw Error(ErrorCode::MalformedInput,
                  "--treatment-col: '" + col + "' is not a binary subject-level column (cluster " + c.id + ")");
    }
    ++(v == 1.0 ? arms.treated : arms.control);
  }
  if (arms.treated == 0 || arms.control == 0) {
    throw Error(ErrorCode::MalformedInput, "--treatment-col: '" + col + "' leaves one arm empty");
  }
  return arms;
}

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
  const auto data = load(a.input);
  const auto wm = working_model(a);
  const auto opts = fit_options(a);
  validate_working_model(wm, data.max_cluster_size());
  std::optional<Arms> arms;
  std::size_t treat_index = 0;
  if (!a.treatment_col.empty()) {
    arms = treatment_arms(data, a.treatment_col);
    treat_index = static_cast<std::size_t>(
        std::find(data.coef_names().begin(), data.coef_names().end(), a.treatment_col) - data.coef_names().begin());
  }

  const PgeeFit f = fit(data, wm, opts);
  Diagnostic diag;
  if (f.has_kernel()) diag = diagnose_kernel(f.kernel);

  std::optional<double> benchmark;
  std::size_t n_min = 0;
  if (arms) {
    n_min = std::min(arms->treated, arms->control);
    if (n_min >= 2) benchmark = 1.0 / static_cast<double>(n_min - 1);
  }
  const bool have_rho = diag.value.has_value();
  const double rho_t = have_rho && arms ? diag.value->rho(static_cast<Eigen::Index>(treat_index)) : 0.0;
  const bool match = benchmark && have_rho && std::abs(rho_t - *benchmark) <= kBenchmarkMatch * *benchmark;

  if (a.json) {
    json j;
    j["schema_version"] = kJsonSchemaVersion;
    j["command"] = "diagnose";
    auto cfg = model_config_json(a, wm, opts);
    cfg["treatment_col"] = a.treatment_col.empty() ? json(nullptr) : json(a.treatment_col);
    j["config"] = cfg;
    j["data"] = data_json(data);
    j["fit"] = fit_json(f, data);
    if (have_rho) {
      const auto& v = *diag.value;
      json ev = json::array();
      for (Eigen::Index k = 0; k < v.eigenvalues.size(); ++k) ev.push_back(v.eigenvalues(k));
      json B = json::array();
      for (Eigen::Index r = 0; r < v.B_lev.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < v.B_lev.cols(); ++c) row.push_back(v.B_lev(r, c));
        B.push_back(std::move(row));
      }
      j["diagnostic"] = {{"eigenvalues", ev}, {"rho_s", rho_json(diag, data)}, {"B_lev", B}};
    } else {
      j["diagnostic"] = nullptr;
      if (!diag.error.empty()) j["diagnostic_error"] = diag.error;
    }
    if (arms) {
      j["treatment"] = {{"column", a.treatment_col},
                        {"treated", arms->treated},
                        {"control", arms->control},
                        {"n_min", n_min},
                        {"benchmark", benchmark ? json(*benchmark) : json(nullptr)},
                        {"rho", have_rho ? json(rho_t) : json(nullptr)},
                        {"match", match}};
    }
    out << j.dump(2) << '\n';
    return f.converged ? kOk : kNotConverged;
  }

  print_model_header(out, "diagnose", a, data, wm, opts);
  if (!a.treatment_col.empty()) out << "treatment  " << a.treatment_col << '\n';
  out << '\n';
  print_fit_status(out, f, data);
  out << '\n';
  if (!have_rho) {
    out << "overcorrection diagnostic undefined" << (diag.error.empty() ? "" : ": " + diag.error) << '\n';
  } else {
    out << "eigenvalues of I0^-1 B_lev:";
    for (Eigen::Index k = 0; k < diag.value->eigenvalues.size(); ++k) out << ' ' << fixed(diag.value->eigenvalues(k));
    out << '\n' << rho_line(diag, data) << '\n';
  }
  if (arms) {
    out << "arms       " << a.treatment_col << " = 1: " << arms->treated << ", " << a.treatment_col
        << " = 0: " << arms->control << ", N_min = " << n_min << '\n';
    if (!benchmark) {
      out << "benchmark  1/(N_min - 1) undefined for N_min = 1\n";
    } else {
      out << "benchmark  1/(N_min - 1) = " << fixed(*benchmark, 2);
      if (have_rho) out << ", rho(" << a.treatment_col << ") = " << fixed(rho_t, 2) << (match ? "  match" : "  differs");
      out << '\n';
    }
  }
  return f.converged ? kOk : kNotConverged;
}

SimConfig load_config(const SimArgs& a) {
  if (a.config.empty()) throw Error(ErrorCode::ConfigError, "--config is required");
  SimConfig cfg = load_sim_config(a.config);
  if (a.reps) {
    cfg.reps = *a.reps;
  } else if (a.full) {
    cfg.reps = kFullReps;
  }
  if (a.seed) cfg.seed = *a.seed;
  if (!a.estimators.empty()) cfg.estimators = parse_estimator_list(a.estimators);
  return cfg;
}

std::string file_stem(const GridCell& cell) {
  std::string g = cell.group;
  for (auto& ch : g)
    if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
  return g + "_s" + std::to_string(cell.index);
}

std::string scenario_text(const Scenario& s) {
  std::ostringstream o;
  o << "N=" << s.N << " n=";
  for (std::size_t i = 0; i < s.n_pattern.size(); ++i) o << (i ? "/" : "") << s.n_pattern[i];
  o << " rate=" << general(s.event_rate) << " rho=" << general(s.rho) << ' ' << to_string(s.true_structure) << '/'
    << to_string(s.working_structure) << " gamma=" << general(s.gamma) << " beta1=" << general(s.beta1)
    << " beta2=" << general(s.beta2) << ' ' << to_string(s.model);
  return o.str();
}

int cmd_generate(SimArgs a, std::ostream& out) {
  if (!a.reps) a.reps = 1;
  const SimConfig cfg = load_config(a);
  if (a.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
  std::filesystem::create_directories(a.out);

  out << "pgee generate\nconfig     " << a.config << "\nseed       " << cfg.seed << "\nreps       " << cfg.reps
      << "\nout        " << a.out << "\n\n";
  for (const auto& cell : cfg.cells) {
    validate_scenario(cell.scenario);
    Scenario s = cell.scenario;
    s.seed = cfg.seed;
    const double beta0 = calibrate_intercept(s);
    long invalid = 0;
    std::size_t written = 0;
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      auto g = generate_replicate(s, beta0, cell.index, r);
      invalid += g.invalid_draws;
      if (!g.data) continue;
      const auto path = std::filesystem::path(a.out) / (file_stem(cell) + "_r" + std::to_string(r) + ".csv");
      write_dataset_csv(path, *g.data);
      ++written;
    }
    out << file_stem(cell) << "  " << scenario_text(s) << "  beta0=" << fixed(beta0, 6) << "  datasets=" << written
        << "  invalid_draws=" << invalid << '\n';
  }
  return kOk;
}

int cmd_simulate(const SimArgs& a, std::ostream& out, std::ostream& err) {
  const SimConfig cfg = load_config(a);
  const std::string dir = a.out.empty() ? std::string("sim_out") : a.out;
  RunOptions ro;
  ro.workers = a.workers;
  const std::size_t workers = effective_workers(a.workers);

  out << "pgee simulate\nconfig     " << a.config << "\nscenarios  " << cfg.cells.size() << "\nseed       "
      << cfg.seed << "\nreps       " << cfg.reps << "\nworkers    " << workers << "\nestimators ";
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) out << (e ? "," : "") << to_string(cfg.estimators[e]);
  out << "\nfit        " << (cfg.fit.penalized ? "penalized" : "unpenalized") << "  tol=" << general(cfg.fit.tol)
      << "  max_iter=" << cfg.fit.max_iter << "  beta_cap=" << general(cfg.fit.beta_cap)
      << "  alpha=" << (cfg.alpha ? general(*cfg.alpha) : std::string("estimate"))
      << "  phi=" << (cfg.phi ? general(*cfg.phi) : std::string("estimate")) << "\nout        " << dir << "\n\n";
  out.flush();

  if (!a.quiet) {
    ro.progress = [&err, last = std::size_t{0}](std::size_t done, std::size_t total) mutable {
      const std::size_t pct = done * 100 / total;
      if (pct / 10 != last / 10 || done == total) {
        err << "progress " << pct << "% (" << done << "/" << total << ")\n";
        last = pct;
      }
    };
  }
  const GridResult grid = run_grid(cfg, ro);
  write_grid_outputs(dir, grid);

  // Rejection rates of the first tested coefficient, one row per scenario.
  out << pad("scenario", 16) << pad("conv", 7, false);
  for (auto id : cfg.estimators) out << pad(std::string(to_string(id)), 7, false);
  out << '\n';
  for (const auto& sr : grid.scenarios) {
    out << pad(file_stem(sr.cell), 16) << pad(fixed(sr.convergence_rate, 3), 7, false);
    for (const auto& m : sr.metrics) {
      if (m.coefficient != sr.cell.tested.front()) continue;
      out << pad(m.n_computable ? fixed(m.rejection_rate, 3) : std::string("—"), 7, false);
    }
    if (sr.status != "ok") out << "  " << sr.status;
    out << "   " << scenario_text(sr.cell.scenario) << '\n';
  }
  out << "\nwrote " << (std::filesystem::path(dir) / "results.csv").string() << " and "
      << (std::filesystem::path(dir) / "summary.json").string() << '\n';
  return kOk;
}

void add_model_flags(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("-i,--input", a.input, "long-format CSV: cluster,y,<covariates>")->required();
  cmd->add_option("--corr", a.corr, "working correlation: exch, ar1 or ind")->capture_default_str();
  cmd->add_option("--alpha", a.alpha, "fixed working correlation or 'estimate'")->capture_default_str();
  cmd->add_option("--phi", a.phi, "fixed dispersion or 'estimate'")->capture_default_str();
  cmd->add_flag("--no-penalty", a.no_penalty, "fit the ordinary GEE without the Firth term");
  cmd->add_option("--tol", a.tol, "convergence tolerance on the scoring step")->capture_default_str();
  cmd->add_option("--max-iter", a.max_iter, "maximum Fisher scoring iterations")->capture_default_str();
  cmd->add_option("--beta-cap", a.beta_cap, "divergence threshold on |beta|")->capture_default_str();
  cmd->add_flag("--json", a.json, "machine-readable output");
}

void add_sim_flags(CLI::App* cmd, SimArgs& a) {
  cmd->add_option("-c,--config", a.config, "scenario grid file")->required();
  cmd->add_option("--reps", a.reps, "replications per scenario (overrides --full and the config)");
  cmd->add_option("--seed", a.seed, "base seed (overrides the config)");
  cmd->add_option("-o,--out", a.out, "output directory");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Firth-penalized GEE for clustered binary outcomes", "pgee"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and report all sandwich estimators");
  add_model_flags(fit_cmd, fa);
  fit_cmd->add_option("--estimators", fa.estimators, "'all' or a comma-separated list of tags")
      ->capture_default_str();
  fit_cmd->add_option("--fg-threshold", fa.fg_threshold, "leverage clip for FG")->capture_default_str();
  fit_cmd->add_option("--wb-exponent", fa.wb_exponent, "leverage exponent for WB")->capture_default_str();

  DiagnoseArgs da;
  auto* diag_cmd = app.add_subcommand("diagnose", "leverage overcorrection diagnostic");
  add_model_flags(diag_cmd, da);
  diag_cmd->add_option("--treatment-col", da.treatment_col, "binary subject-level column for the benchmark");

  SimArgs ga;
  auto* gen_cmd = app.add_subcommand("generate", "write simulated datasets for every scenario of a grid");
  add_sim_flags(gen_cmd, ga);
  gen_cmd->get_option("--out")->required();

  SimArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "run a scenario grid");
  add_sim_flags(sim_cmd, sa);
  sim_cmd->add_flag("--full", sa.full, "5000 replications per scenario");
  sim_cmd->add_option("--workers", sa.workers, "worker threads, 0 = all cores (PGEE_THREADS caps)")
      ->capture_default_str();
  sim_cmd->add_option("--estimators", sa.estimators, "override the config's estimator list");
  sim_cmd->add_flag("-q,--quiet", sa.quiet, "no progress lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa, out);
    if (*diag_cmd) return cmd_diagnose(da, out);
    if (*gen_cmd) return cmd_generate(ga, out);
    if (*sim_cmd) return cmd_simulate(sa, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("pgee");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace pgee::cli
