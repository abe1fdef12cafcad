#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "pgee/error.hpp"
#include "pgee/sim.hpp"

namespace pgee {

namespace {

constexpr std::string_view kColumns[] = {
    "group",          "scenario",        "N",             "n_pattern",     "event_rate",
    "rho",            "true_structure",  "working_structure", "gamma",     "beta1",
    "beta2",          "model",           "beta0",         "coefficient",   "estimator",
    "reps",           "converged",       "convergence_rate", "invalid_draws", "B_effective",
    "n_computable",   "rejection_rate",  "mc_se",         "mc_se_bound",   "median_se",
    "sim_se",         "median_se_ratio", "cv_se",         "skewness_se",   "p95_over_p50",
    "p99_over_p50",   "status"};

std::string num(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
  return std::string(buf, ptr);
}

std::string pattern(const Scenario& s) {
  std::string out;
  for (std::size_t i = 0; i < s.n_pattern.size(); ++i) {
    if (i) out += '/';
    out += std::to_string(s.n_pattern[i]);
  }
  return out;
}

nlohmann::ordered_json json_num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

std::span<const std::string_view> results_columns() { return kColumns; }

void write_results_csv(std::ostream& out, const GridResult& grid) {
  std::string buf;
  for (std::size_t c = 0; c < std::size(kColumns); ++c) {
    if (c) buf += ',';
    buf += kColumns[c];
  }
  buf += '\n';
  for (const auto& sr : grid.scenarios) {
    const auto& s = sr.cell.scenario;
    for (const auto& m : sr.metrics) {
      const auto k = static_cast<std::size_t>(
          std::find(sr.cell.tested.begin(), sr.cell.tested.end(), m.coefficient) - sr.cell.tested.begin());
      const std::string fields[] = {sr.cell.group,
                                    std::to_string(sr.cell.index),
                                    std::to_string(s.N),
                                    pattern(s),
                                    num(s.event_rate),
                                    num(s.rho),
                                    std::string(to_string(s.true_structure)),
                                    std::string(to_string(s.working_structure)),
                                    num(s.gamma),
                                    num(s.beta1),
                                    num(s.beta2),
                                    std::string(to_string(s.model)),
                                    num(sr.beta0),
                                    m.coefficient,
                                    std::string(to_string(m.id)),
                                    std::to_string(sr.reps),
                                    std::to_string(sr.converged),
                                    num(sr.convergence_rate),
                                    std::to_string(sr.invalid_draw_count),
                                    std::to_string(sr.B_effective()),
                                    std::to_string(m.n_computable),
                                    num(m.rejection_rate),
                                    num(m.mc_se),
                                    num(sr.mc_se_bound()),
                                    num(m.median_se),
                                    num(sr.sim_se.at(k)),
                                    num(m.median_se_ratio),
                                    num(m.cv_se),
                                    num(m.skewness_se),
                                    num(m.p95_over_p50),
                                    num(m.p99_over_p50),
                                    sr.status};
      static_assert(std::size(fields) == std::size(kColumns));
      for (std::size_t f = 0; f < std::size(fields); ++f) {
        if (f) buf += ',';
        buf += fields[f];
      }
      buf += '\n';
    }
  }
  out << buf;
}

void write_summary_json(std::ostream& out, const GridResult& grid) {
  using json = nlohmann::ordered_json;
  const auto& cfg = grid.config;
  json j;
  j["schema_version"] = kSimSchemaVersion;
  j["seed"] = cfg.seed;
  j["reps"] = cfg.reps;
  j["nominal_level"] = kNominalLevel;
  json est = json::array();
  for (auto id : cfg.estimators) est.push_back(std::string(to_string(id)));
  j["estimators"] = est;
  j["fit"] = {{"penalized", cfg.fit.penalized},
              {"tol", cfg.fit.tol},
              {"max_iter", cfg.fit.max_iter},
              {"beta_cap", cfg.fit.beta_cap},
              {"alpha", cfg.alpha ? json(*cfg.alpha) : json("estimate")},
              {"phi", cfg.phi ? json(*cfg.phi) : json("estimate")}};
  j["estimator_options"] = {{"fg_threshold", cfg.estimator_options.fg_threshold},
                            {"wb_exponent", cfg.estimator_options.wb_exponent}};

  json scenarios = json::array();
  std::size_t total_reps = 0, total_converged = 0;
  long total_invalid = 0;
  for (const auto& sr : grid.scenarios) {
    const auto& s = sr.cell.scenario;
    json sj;
    sj["index"] = sr.cell.index;
    sj["group"] = sr.cell.group;
    sj["N"] = s.N;
    sj["n_pattern"] = s.n_pattern;
    sj["event_rate"] = s.event_rate;
    sj["rho"] = s.rho;
    sj["true_structure"] = std::string(to_string(s.true_structure));
    sj["working_structure"] = std::string(to_string(s.working_structure));
    sj["gamma"] = s.gamma;
    sj["treated"] = s.num_treated();
    sj["beta1"] = s.beta1;
    sj["beta2"] = s.beta2;
    sj["model"] = std::string(to_string(s.model));
    sj["tested"] = sr.cell.tested;
    sj["beta0"] = sr.beta0;
    sj["reps"] = sr.reps;
    sj["converged"] = sr.converged;
    sj["convergence_rate"] = json_num(sr.convergence_rate);
    sj["invalid_draws"] = sr.invalid_draw_count;
    sj["non_convergence"] = sr.divergence_census;
    sj["mc_se_bound"] = json_num(sr.mc_se_bound());
    json sims = json::object();
    for (std::size_t k = 0; k < sr.cell.tested.size(); ++k) {
      sims[sr.cell.tested[k]] = {{"mean_estimate", json_num(sr.mean_beta[k])}, {"sim_se", json_num(sr.sim_se[k])}};
    }
    sj["estimates"] = sims;
    sj["status"] = sr.status;
    scenarios.push_back(std::move(sj));
    total_reps += sr.reps;
    total_converged += sr.converged;
    total_invalid += sr.invalid_draw_count;
  }
  j["census"] = {{"scenarios", grid.scenarios.size()},
                 {"replications", total_reps},
                 {"converged", total_converged},
                 {"invalid_draws", total_invalid}};
  j["scenarios"] = std::move(scenarios);
  out << j.dump(2) << '\n';
}

void write_grid_outputs(const std::filesystem::path& dir, const GridResult& grid) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::ConfigError, "cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream csv(dir / "results.csv", std::ios::binary);
    if (!csv) throw Error(ErrorCode::ConfigError, "cannot write " + (dir / "results.csv").string());
    write_results_csv(csv, grid);
  }
  std::ofstream js(dir / "summary.json", std::ios::binary);
  if (!js) throw Error(ErrorCode::ConfigError, "cannot write " + (dir / "summary.json").string());
  write_summary_json(js, grid);
}

}  // namespace pgee
