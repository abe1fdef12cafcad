#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pgee/datagen.hpp"
#include "pgee/fit.hpp"
#include "pgee/varest.hpp"

namespace pgee {

inline constexpr int kSimSchemaVersion = 1;
inline constexpr std::size_t kMinConverged = 100;
inline constexpr double kNominalLevel = 0.05;

/// One scenario of an expanded grid.
struct GridCell {
  std::string group;
  std::size_t index = 0;            // position in the expanded grid; keys the RNG streams
  Scenario scenario;
  std::vector<std::string> tested;  // coefficient names, e.g. {"x1"} or {"x1", "t"}
};

struct SimConfig {
  std::uint64_t seed = 42;
  std::size_t reps = 1000;
  std::vector<EstimatorId> estimators{kAllEstimators.begin(), kAllEstimators.end()};
  FitOptions fit;
  EstimatorOptions estimator_options;
  std::optional<double> alpha;            // empty = moment estimate
  std::optional<double> phi = 1.0;        // empty = Pearson plug-in
  std::vector<GridCell> cells;
};

/// INI-style grid description; see configs/README for the schema.
SimConfig parse_sim_config(std::istream& in);
SimConfig parse_sim_config_text(std::string_view text);
SimConfig load_sim_config(const std::filesystem::path& path);

/// Coefficient index of a tested name in the scenario's model.
std::size_t coefficient_index(const Scenario& s, const std::string& name);

struct EstimatorOutcome {
  double se = 0.0;
  double p_value = 1.0;
  bool reject = false;
  bool usable = false;  // computable with a finite positive SE for this coefficient
};

struct ReplicationRecord {
  std::uint64_t rep = 0;
  bool generated = false;
  bool converged = false;
  int invalid_draws = 0;
  int iterations = 0;
  std::optional<DivergenceReason> diverged_reason;
  Eigen::VectorXd beta_hat;
  /// outcomes[e][k]: estimator e of the config list, tested coefficient k.
  std::vector<std::vector<EstimatorOutcome>> outcomes;
};

ReplicationRecord run_replication(const GridCell& cell, const SimConfig& cfg, double beta0,
                                  std::uint64_t rep);

struct EstimatorMetrics {
  EstimatorId id = EstimatorId::LZ;
  std::string coefficient;
  std::size_t n_computable = 0;
  double rejection_rate = 0.0;
  double mc_se = 0.0;
  double median_se = 0.0;
  double median_se_ratio = 0.0;
  double cv_se = 0.0;
  double skewness_se = 0.0;
  double p95_over_p50 = 0.0;
  double p99_over_p50 = 0.0;
};

struct ScenarioResult {
  GridCell cell;
  double beta0 = 0.0;
  std::size_t reps = 0;
  std::size_t generated = 0;
  std::size_t converged = 0;  // B_effective
  double convergence_rate = 0.0;
  long invalid_draw_count = 0;
  std::map<std::string, std::size_t> divergence_census;
  std::vector<double> sim_se;     // per tested coefficient
  std::vector<double> mean_beta;  // per tested coefficient
  std::vector<EstimatorMetrics> metrics;  // estimator-major, coefficient-minor
  std::string status = "ok";

  std::size_t B_effective() const noexcept { return converged; }
  /// sqrt(0.05 * 0.95 / B_effective): worst MC standard error of a rate near nominal.
  double mc_se_bound() const;
};

/// Operating characteristics over converged replications. Throws
/// TooFewConverged below kMinConverged unless allow_few is set.
ScenarioResult aggregate(const GridCell& cell, const SimConfig& cfg, double beta0,
                         std::span<const ReplicationRecord> records, bool allow_few = false);

struct RunOptions {
  std::size_t workers = 0;  // 0 = hardware concurrency; PGEE_THREADS caps it
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Worker count actually used for a request, after the PGEE_THREADS cap.
std::size_t effective_workers(std::size_t requested);

struct GridResult {
  SimConfig config;
  std::vector<ScenarioResult> scenarios;
};

/// Runs every (cell, replication) task. Output does not depend on the worker count.
GridResult run_grid(const SimConfig& cfg, const RunOptions& opts = {});

/// results.csv: one row per scenario x estimator x tested coefficient.
void write_results_csv(std::ostream& out, const GridResult& grid);
/// summary.json: grid metadata, seeds, convergence census.
void write_summary_json(std::ostream& out, const GridResult& grid);
void write_grid_outputs(const std::filesystem::path& dir, const GridResult& grid);

/// Column names of results.csv, in order.
std::span<const std::string_view> results_columns();

}  // namespace pgee
