#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pgee/error.hpp"
#include "pgee/sim.hpp"

namespace pgee {

namespace {

namespace pt = boost::property_tree;

// Grid axes in expansion order: the first key varies slowest.
constexpr std::string_view kAxes[] = {"N",    "n",          "event_rate",        "rho",   "true_structure",
                                      "working_structure", "gamma", "beta1", "beta2", "model"};
constexpr std::string_view kGlobals[] = {"seed",      "reps",         "estimators", "tol",
                                         "max_iter",  "beta_cap",     "penalized",  "fg_threshold",
                                         "wb_exponent", "alpha",      "phi"};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) pos = s.size();
    auto piece = trim(s.substr(start, pos - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  if (t == "log2" || t == "log(2)") return std::log(2.0);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    config_error("'" + std::string(key) + "': cannot parse '" + std::string(t) + "' as a number");
  }
  return v;
}

std::uint64_t to_uint(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    config_error("'" + std::string(key) + "': cannot parse '" + std::string(t) + "' as a non-negative integer");
  }
  return v;
}

bool to_bool(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  config_error("'" + std::string(key) + "': expected a boolean, got '" + std::string(t) + "'");
}

void apply_axis(Scenario& s, std::string_view key, const std::string& value) {
  try {
    if (key == "N") {
      s.N = static_cast<std::size_t>(to_uint(key, value));
    } else if (key == "n") {
      s.n_pattern.clear();
      for (const auto& part : split(value, '/')) s.n_pattern.push_back(static_cast<std::size_t>(to_uint(key, part)));
      if (s.n_pattern.empty()) config_error("'n' is empty");
    } else if (key == "event_rate") {
      s.event_rate = to_double(key, value);
    } else if (key == "rho") {
      s.rho = to_double(key, value);
    } else if (key == "true_structure") {
      s.true_structure = parse_corr_structure(value);
    } else if (key == "working_structure") {
      if (value == "match") {
        s.working_structure = s.true_structure;
      } else if (value == "swap") {
        if (s.true_structure == CorrStructure::Independence) config_error("'swap' needs a correlated truth");
        s.working_structure = s.true_structure == CorrStructure::Exchangeable ? CorrStructure::Ar1
                                                                              : CorrStructure::Exchangeable;
      } else {
        s.working_structure = parse_corr_structure(value);
      }
    } else if (key == "gamma") {
      s.gamma = to_double(key, value);
    } else if (key == "beta1") {
      s.beta1 = to_double(key, value);
    } else if (key == "beta2") {
      s.beta2 = to_double(key, value);
    } else if (key == "model") {
      s.model = parse_model_form(value);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error("'" + std::string(key) + "': " + e.what());
  }
}

using Settings = std::vector<std::pair<std::string, std::string>>;

const std::string* lookup(const Settings& s, std::string_view key) {
  for (auto it = s.rbegin(); it != s.rend(); ++it)
    if (it->first == key) return &it->second;
  return nullptr;
}

bool is_axis(std::string_view k) { return std::find(std::begin(kAxes), std::end(kAxes), k) != std::end(kAxes); }
bool is_global(std::string_view k) {
  return std::find(std::begin(kGlobals), std::end(kGlobals), k) != std::end(kGlobals);
}

Settings read_section(const pt::ptree& section, std::string_view where, bool allow_globals) {
  Settings out;
  for (const auto& [key, node] : section) {
    if (!node.empty()) config_error("nested keys are not supported in [" + std::string(where) + "]");
    if (!is_axis(key) && key != "test" && !(allow_globals && is_global(key))) {
      config_error("unknown key '" + key + "' in [" + std::string(where) + "]");
    }
    out.emplace_back(key, node.data());
  }
  return out;
}

void expand(const std::string& group, const Settings& settings, std::vector<GridCell>& cells) {
  std::vector<std::pair<std::string_view, std::vector<std::string>>> axes;
  for (auto key : kAxes) {
    if (const auto* v = lookup(settings, key)) {
      auto values = split(*v, ',');
      if (values.empty()) config_error("'" + std::string(key) + "' has no values in grid " + group);
      axes.emplace_back(key, std::move(values));
    }
  }
  std::vector<std::string> tested{"x1"};
  if (const auto* v = lookup(settings, "test")) {
    tested.clear();
    std::istringstream words(*v);
    for (std::string w; words >> w;) tested.push_back(w);
    if (tested.empty()) config_error("'test' is empty in grid " + group);
  }

  std::vector<std::size_t> pos(axes.size(), 0);
  while (true) {
    GridCell cell;
    cell.group = group;
    cell.index = cells.size();
    cell.tested = tested;
    for (std::size_t a = 0; a < axes.size(); ++a) apply_axis(cell.scenario, axes[a].first, axes[a].second[pos[a]]);
    if (!lookup(settings, "working_structure")) cell.scenario.working_structure = cell.scenario.true_structure;
    cells.push_back(std::move(cell));

    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++pos[a] < axes[a].second.size()) break;
      pos[a] = 0;
      if (a == 0) return;
    }
    if (axes.empty()) return;
  }
}

}  // namespace

SimConfig parse_sim_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    config_error(e.message() + " at line " + std::to_string(e.line()));
  }

  SimConfig cfg;
  Settings defaults;
  if (auto d = tree.get_child_optional("defaults")) defaults = read_section(*d, "defaults", true);

  if (const auto* v = lookup(defaults, "seed")) cfg.seed = to_uint("seed", *v);
  if (const auto* v = lookup(defaults, "reps")) cfg.reps = static_cast<std::size_t>(to_uint("reps", *v));
  if (const auto* v = lookup(defaults, "tol")) cfg.fit.tol = to_double("tol", *v);
  if (const auto* v = lookup(defaults, "max_iter")) cfg.fit.max_iter = static_cast<int>(to_uint("max_iter", *v));
  if (const auto* v = lookup(defaults, "beta_cap")) cfg.fit.beta_cap = to_double("beta_cap", *v);
  if (const auto* v = lookup(defaults, "penalized")) cfg.fit.penalized = to_bool("penalized", *v);
  if (const auto* v = lookup(defaults, "fg_threshold")) cfg.estimator_options.fg_threshold = to_double("fg_threshold", *v);
  if (const auto* v = lookup(defaults, "wb_exponent")) cfg.estimator_options.wb_exponent = to_double("wb_exponent", *v);
  if (const auto* v = lookup(defaults, "alpha")) {
    cfg.alpha = trim(*v) == "estimate" ? std::nullopt : std::optional<double>(to_double("alpha", *v));
  }
  if (const auto* v = lookup(defaults, "phi")) {
    cfg.phi = trim(*v) == "estimate" ? std::nullopt : std::optional<double>(to_double("phi", *v));
    if (cfg.phi && !(*cfg.phi > 0.0)) config_error("'phi' must be positive");
  }
  if (const auto* v = lookup(defaults, "estimators")) {
    try {
      cfg.estimators = parse_estimator_list(*v);
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
  try {
    validate_fit_options(cfg.fit);
  } catch (const Error& e) {
    config_error(e.what());
  }

  Settings scenario_defaults;
  for (const auto& kv : defaults)
    if (!is_global(kv.first)) scenario_defaults.push_back(kv);

  for (const auto& [name, section] : tree) {
    if (name == "defaults") continue;
    if (name.rfind("grid", 0) != 0) config_error("unknown section [" + name + "]");
    std::string group(trim(std::string_view(name).substr(4)));
    if (group.empty()) config_error("grid section needs a name: [grid <name>]");
    Settings merged = scenario_defaults;
    for (auto& kv : read_section(section, name, false)) merged.push_back(std::move(kv));
    expand(group, merged, cfg.cells);
  }
  if (cfg.cells.empty()) config_error("no [grid ...] sections");
  return cfg;
}

SimConfig parse_sim_config_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_sim_config(in);
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open " + path.string());
  return parse_sim_config(in);
}

}  // namespace pgee
