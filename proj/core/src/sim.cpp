#include "pgee/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <boost/math/statistics/univariate_statistics.hpp>

#include "pgee/error.hpp"

namespace pgee {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return kNaN;
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  return std::sqrt(boost::math::statistics::sample_variance(v));
}

}  // namespace

std::size_t coefficient_index(const Scenario& s, const std::string& name) {
  if (name == "(Intercept)" || name == "intercept") return 0;
  if (name == "x1" || name == "x") return 1;
  if ((name == "t" || name == "time") && s.model == ModelForm::Full) return 2;
  throw Error(ErrorCode::ConfigError, "coefficient '" + name + "' is not in the " +
                                          std::string(to_string(s.model)) + " model");
}

ReplicationRecord run_replication(const GridCell& cell, const SimConfig& cfg, double beta0,
                                  std::uint64_t rep) {
  ReplicationRecord rec;
  rec.rep = rep;
  Scenario s = cell.scenario;
  s.seed = cfg.seed;
  auto gen = generate_replicate(s, beta0, cell.index, rep);
  rec.invalid_draws = gen.invalid_draws;
  if (!gen.data) return rec;
  rec.generated = true;
  const LongitudinalDataset& data = *gen.data;

  WorkingModel wm;
  wm.structure = cell.scenario.working_structure;
  wm.alpha = wm.structure == CorrStructure::Independence ? std::nullopt : cfg.alpha;
  wm.dispersion = cfg.phi;

  PgeeFit f;
  try {
    f = fit(data, wm, cfg.fit);
  } catch (const Error&) {
    return rec;
  }
  rec.iterations = f.iterations;
  rec.beta_hat = f.beta_hat;
  rec.diverged_reason = f.diverged_reason;
  rec.converged = f.converged;
  if (!f.converged) return rec;

  std::vector<std::size_t> coef;
  for (const auto& name : cell.tested) coef.push_back(coefficient_index(cell.scenario, name));

  const VarianceEngine engine(f.kernel, cfg.estimator_options);
  rec.outcomes.reserve(cfg.estimators.size());
  for (auto id : cfg.estimators) {
    const auto est = engine.estimate(id);
    std::vector<EstimatorOutcome> row;
    row.reserve(coef.size());
    for (auto s : coef) {
      EstimatorOutcome o;
      const auto si = static_cast<Eigen::Index>(s);
      o.usable = est.usable(si);
      if (o.usable) {
        o.se = est.se(si);
        const auto w = wald_test(f.beta_hat(si), o.se, data.num_clusters(), data.p());
        o.p_value = w.p_value;
        o.reject = w.p_value < kNominalLevel;
      } else {
        o.se = kNaN;
        o.p_value = kNaN;
      }
      row.push_back(o);
    }
    rec.outcomes.push_back(std::move(row));
  }
  return rec;
}

double ScenarioResult::mc_se_bound() const {
  if (converged == 0) return kNaN;
  return std::sqrt(kNominalLevel * (1.0 - kNominalLevel) / static_cast<double>(converged));
}

ScenarioResult aggregate(const GridCell& cell, const SimConfig& cfg, double beta0,
                         std::span<const ReplicationRecord> records, bool allow_few) {
  ScenarioResult out;
  out.cell = cell;
  out.beta0 = beta0;
  out.reps = records.size();
  for (const auto& r : records) {
    out.invalid_draw_count += r.invalid_draws;
    if (r.generated) ++out.generated;
    if (r.converged) {
      ++out.converged;
    } else if (r.diverged_reason) {
      ++out.divergence_census[std::string(to_string(*r.diverged_reason))];
    } else if (!r.generated) {
      ++out.divergence_census["generation_failed"];
    } else {
      ++out.divergence_census["fit_error"];
    }
  }
  out.convergence_rate =
      out.reps == 0 ? kNaN : static_cast<double>(out.converged) / static_cast<double>(out.reps);
  if (out.converged < kMinConverged) {
    if (!allow_few) {
      throw Error(ErrorCode::TooFewConverged, std::to_string(out.converged) + " of " +
                                                  std::to_string(out.reps) + " replications converged");
    }
    out.status = "TooFewConverged";
  }

  const std::size_t K = cell.tested.size();
  for (std::size_t k = 0; k < K; ++k) {
    const auto s = static_cast<Eigen::Index>(coefficient_index(cell.scenario, cell.tested[k]));
    std::vector<double> b;
    for (const auto& r : records)
      if (r.converged) b.push_back(r.beta_hat(s));
    out.sim_se.push_back(sample_sd(b));
    out.mean_beta.push_back(b.empty() ? kNaN : boost::math::statistics::mean(b));
  }

  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    for (std::size_t k = 0; k < K; ++k) {
      EstimatorMetrics m;
      m.id = cfg.estimators[e];
      m.coefficient = cell.tested[k];
      std::vector<double> se;
      std::size_t rejects = 0;
      for (const auto& r : records) {
        if (!r.converged) continue;
        const auto& o = r.outcomes[e][k];
        if (!o.usable) continue;
        se.push_back(o.se);
        if (o.reject) ++rejects;
      }
      m.n_computable = se.size();
      if (se.empty()) {
        m.rejection_rate = m.mc_se = m.median_se = m.median_se_ratio = kNaN;
        m.cv_se = m.skewness_se = m.p95_over_p50 = m.p99_over_p50 = kNaN;
      } else {
        const double n = static_cast<double>(se.size());
        m.rejection_rate = static_cast<double>(rejects) / n;
        m.mc_se = std::sqrt(m.rejection_rate * (1.0 - m.rejection_rate) / n);
        const double mean = boost::math::statistics::mean(se);
        const double sd = sample_sd(se);
        m.cv_se = se.size() < 2 ? kNaN : sd / mean;
        m.skewness_se = se.size() < 2 ? kNaN : (sd > 0.0 ? boost::math::statistics::skewness(se) : 0.0);
        std::sort(se.begin(), se.end());
        m.median_se = quantile_sorted(se, 0.5);
        m.median_se_ratio = m.median_se / out.sim_se[k];
        m.p95_over_p50 = quantile_sorted(se, 0.95) / m.median_se;
        m.p99_over_p50 = quantile_sorted(se, 0.99) / m.median_se;
      }
      out.metrics.push_back(std::move(m));
    }
  }
  return out;
}

std::size_t effective_workers(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("PGEE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(cap, &end, 10);
    if (end != cap && v > 0) n = std::min(n, static_cast<std::size_t>(v));
  }
  return std::max<std::size_t>(1, n);
}

GridResult run_grid(const SimConfig& cfg, const RunOptions& opts) {
  if (cfg.reps < kMinConverged) {
    throw Error(ErrorCode::ConfigError, "reps must be at least " + std::to_string(kMinConverged));
  }
  GridResult out;
  out.config = cfg;

  std::vector<double> beta0(cfg.cells.size());
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    validate_scenario(cfg.cells[c].scenario);
    for (const auto& name : cfg.cells[c].tested) coefficient_index(cfg.cells[c].scenario, name);
    beta0[c] = calibrate_intercept(cfg.cells[c].scenario);
  }

  std::vector<std::vector<ReplicationRecord>> slots(cfg.cells.size());
  for (auto& s : slots) s.resize(cfg.reps);
  const std::size_t total = cfg.cells.size() * cfg.reps;

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total) return;
      const std::size_t c = task / cfg.reps;
      const std::size_t r = task % cfg.reps;
      try {
        slots[c][r] = run_replication(cfg.cells[c], cfg, beta0[c], r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(total);
        return;
      }
      const std::size_t d = done.fetch_add(1) + 1;
      if (opts.progress) {
        std::lock_guard lock(progress_mutex);
        opts.progress(d, total);
      }
    }
  };

  const std::size_t workers = std::min(effective_workers(opts.workers), std::max<std::size_t>(1, total));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  out.scenarios.reserve(cfg.cells.size());
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    try {
      out.scenarios.push_back(aggregate(cfg.cells[c], cfg, beta0[c], slots[c]));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewConverged) throw;
      out.scenarios.push_back(aggregate(cfg.cells[c], cfg, beta0[c], slots[c], true));
    }
  }
  return out;
}

}  // namespace pgee
