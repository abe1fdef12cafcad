// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Simulation criteria share one grid (B = 1000 per cell), which is also the
// object of the determinism check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pgee/csv_io.hpp"
#include "pgee/datagen.hpp"
#include "pgee/error.hpp"
#include "pgee/fit.hpp"
#include "pgee/sim.hpp"
#include "pgee/varest.hpp"
#include "support/oracles.hpp"

using namespace pgee;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double elapsed_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

CorrStructure structure_of(int k) {
  switch (k % 3) {
    case 0: return CorrStructure::Exchangeable;
    case 1: return CorrStructure::Ar1;
    default: return CorrStructure::Independence;
  }
}

// 50 fitted instances of assorted size, balance and working structure
std::vector<PgeeFit> fitted_corpus() {
  std::vector<PgeeFit> out;
  for (std::uint64_t seed = 1; out.size() < 50; ++seed) {
    const std::size_t N = 8 + seed % 13;
    const std::size_t lo = 2 + seed % 3, hi = lo + seed % 4;
    const auto d = oracle::random_dataset(1000 + seed, N, lo, hi, 2 + seed % 2);
    WorkingModel wm;
    wm.structure = structure_of(static_cast<int>(seed));
    if (seed % 4 == 0) wm.dispersion = std::nullopt;
    auto f = fit(d, wm);
    if (f.converged) out.push_back(std::move(f));
  }
  return out;
}

Eigen::MatrixXd sym_sandwich(const FitKernel& k, const Eigen::MatrixXd& M) {
  const Eigen::MatrixXd V = k.Delta * M * k.Delta;
  return 0.5 * (V + V.transpose());
}

Outcome crit1() {
  const auto t0 = Clock::now();
  const auto corpus = fitted_corpus();
  double worst = 0.0;
  for (const auto& f : corpus) {
    const auto& k = f.kernel;
    const VarianceEngine e(k);
    const double N = static_cast<double>(k.num_clusters()), p = static_cast<double>(k.p());
    const auto LZ = e.estimate(EstimatorId::LZ), KC = e.estimate(EstimatorId::KC), MD = e.estimate(EstimatorId::MD);
    const auto FW = e.estimate(EstimatorId::FW), DF = e.estimate(EstimatorId::DF), AR = e.estimate(EstimatorId::AR);
    const Eigen::MatrixXd M1 = e.family_middle(1.0);
    Eigen::VectorXd fbar = Eigen::VectorXd::Zero(k.p());
    for (std::size_t i = 0; i < k.num_clusters(); ++i) fbar += e.leverage().corrected_score(i, 1.0);
    fbar /= N;
    const double c_N = (static_cast<double>(k.total_obs()) - 1.0) / (static_cast<double>(k.total_obs()) - p) *
                       N / (N - 1.0);
    worst = std::max({worst, oracle::rel_err(LZ.V, sym_sandwich(k, e.family_middle(0.0))),
                      oracle::rel_err(KC.V, sym_sandwich(k, e.family_middle(0.5))),
                      oracle::rel_err(MD.V, sym_sandwich(k, M1)), oracle::rel_err(FW.V, 0.5 * (KC.V + MD.V)),
                      oracle::rel_err(DF.V, N / (N - p) * LZ.V),
                      oracle::rel_err(AR.middle, c_N * (M1 - N * fbar * fbar.transpose()))});
  }
  const double secs = elapsed_since(t0);
  return {worst <= 1e-12 && secs < 10.0 && corpus.size() == 50,
          fmt("%.0f instances, max rel err %.2e, %.1f s", double(corpus.size()), worst, secs)};
}

Outcome crit2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (auto [n0, n1] : std::vector<std::pair<std::size_t, std::size_t>>{{5, 5}, {3, 7}, {2, 8}}) {
    const auto d = oracle::two_arm_dataset(n0, n1, 4);
    WorkingModel wm;
    const auto f = fit(d, wm);
    if (!f.converged) return {false, "two-arm fit did not converge"};
    const auto diag = overcorrection_diagnostic(f.kernel);
    std::vector<double> want{1.0 / (double(n0) - 1.0), 1.0 / (double(n1) - 1.0)};
    std::sort(want.begin(), want.end());
    for (int s = 0; s < 2; ++s) worst = std::max(worst, std::abs(diag.eigenvalues(s) - want[s]) / want[s]);
  }
  // N_min = 3: lambda_max of I0^{-1} E[M_MD] with E[M_MD] = I0 + B_lev
  const auto d = oracle::two_arm_dataset(7, 3, 4);
  const auto f = fit(d, WorkingModel{});
  const Eigen::MatrixXd B = oracle::b_lev(f.kernel);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(f.kernel.I0 + B, f.kernel.I0);
  const double lmax = es.eigenvalues().maxCoeff();
  const double secs = elapsed_since(t0);
  return {worst <= 1e-8 && std::abs(lmax - 1.5) <= 1e-8 && secs < 1.0,
          fmt("max rel eigen err %.1e, N_min=3 lambda_max %.10f, %.2f s", worst, lmax, secs)};
}

Outcome crit3() {
  std::vector<FitKernel> kernels;
  for (auto& f : fitted_corpus()) kernels.push_back(std::move(f.kernel));
  for (auto [n0, n1] : std::vector<std::pair<std::size_t, std::size_t>>{{5, 5}, {3, 7}, {2, 8}}) {
    kernels.push_back(fit(oracle::two_arm_dataset(n0, n1, 4), WorkingModel{}).kernel);
  }
  for (const char* name : {"toy_balanced.csv", "toy_unbalanced.csv"}) {
    std::ifstream in(std::string(PGEE_SOURCE_DIR) + "/data/" + name);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto d = validate_dataset(parse_csv(ss.str()));
    for (int s = 0; s < 3; ++s) {
      WorkingModel wm;
      wm.structure = structure_of(s);
      const auto f = fit(d, wm);
      if (f.converged) kernels.push_back(f.kernel);
    }
  }
  double push = 0.0, trace = 0.0;
  for (const auto& k : kernels) {
    double tr = 0.0;
    for (std::size_t i = 0; i < k.num_clusters(); ++i) {
      const auto& q = k.clusters[i];
      const Eigen::Index n = q.size(), p = k.p();
      const Eigen::MatrixXd H = oracle::hat(k, i, i);
      const Eigen::MatrixXd G = q.D.transpose() * oracle::inverse(q.V);
      const Eigen::MatrixXd lhs = G * oracle::inverse(Eigen::MatrixXd::Identity(n, n) - H);
      const Eigen::MatrixXd rhs =
          oracle::inverse(Eigen::MatrixXd::Identity(p, p) - oracle::A_block(q) * oracle::inverse(k.I0)) * G;
      push = std::max(push, oracle::rel_err(lhs, rhs));
      tr += k.hat_block(i).trace();
    }
    trace = std::max(trace, std::abs(tr - static_cast<double>(k.p())) / static_cast<double>(k.p()));
  }
  return {push <= 1e-8 && trace <= 1e-8,
          fmt("%.0f kernels, push-through %.1e, trace %.1e", double(kernels.size()), push, trace)};
}

double half_logdet(const Eigen::VectorXd& beta, CorrStructure s, double alpha, const LongitudinalDataset& d) {
  const auto k = assemble_kernel(beta, s, alpha, 1.0, d);
  return 0.5 * std::log(k.I0.determinant());
}

Outcome crit4() {
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto s = structure_of(inst);
    const auto d = oracle::random_dataset(500 + inst, 10 + inst % 7, 2, 6, 3);
    std::mt19937_64 eng(inst);
    std::normal_distribution<double> z(0.0, 0.4);
    Eigen::VectorXd beta(d.p());
    for (Eigen::Index r = 0; r < beta.size(); ++r) beta(r) = z(eng);
    const double alpha = s == CorrStructure::Independence ? 0.0 : 0.15 + 0.02 * (inst % 5);
    const Eigen::VectorXd b = firth_penalty(beta, s, alpha, 1.0, d);
    Eigen::VectorXd fd(beta.size());
    const double h = 1e-5;
    for (Eigen::Index r = 0; r < beta.size(); ++r) {
      Eigen::VectorXd up = beta, dn = beta;
      up(r) += h;
      dn(r) -= h;
      fd(r) = (half_logdet(up, s, alpha, d) - half_logdet(dn, s, alpha, d)) / (2 * h);
    }
    worst = std::max(worst, oracle::rel_err(b, fd));
  }
  return {worst <= 1e-5, fmt("20 instances, max rel err %.2e", worst)};
}

Outcome crit5() {
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const auto d = oracle::random_dataset(700 + inst, 12, 3, 5, 2);
    const auto s = structure_of(inst);
    const Eigen::Vector3d beta(-0.7, 0.4, 0.1 * inst);
    const double alpha = s == CorrStructure::Independence ? 0.0 : 0.25;
    const auto base = assemble_kernel(beta, s, alpha, 1.0, d);
    const Eigen::MatrixXd ref = base.Delta * morel_terms(base).I1c * base.Delta;
    for (double scale : {0.5, 2.0, 10.0}) {
      const auto k = assemble_kernel(beta, s, alpha, scale, d);
      worst = std::max(worst, oracle::rel_err(k.Delta * morel_terms(k).I1c * k.Delta, ref));
    }
  }
  return {worst <= 1e-10, fmt("max rel change %.2e", worst)};
}

Outcome crit6() {
  const auto t0 = Clock::now();
  // four clusters of three visits, independence truth, phi = 1
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::VectorXd> y;
  const double xs[4][3] = {{-1.0, 0.0, 1.0}, {0.5, 1.5, -0.5}, {-1.5, -0.5, 0.5}, {1.0, 2.0, 0.0}};
  for (int i = 0; i < 4; ++i) {
    Eigen::MatrixXd x(3, 2);
    x.col(0).setOnes();
    for (int j = 0; j < 3; ++j) x(j, 1) = xs[i][j];
    X.push_back(x);
    y.push_back(Eigen::Vector3d(1, 0, 0));
  }
  const auto d = oracle::make_dataset(X, y, {"(Intercept)", "x"});
  const Eigen::Vector2d beta0(-0.4, 0.6);
  const auto k = assemble_kernel(beta0, CorrStructure::Independence, 0.0, 1.0, d);

  Eigen::Matrix2d I0 = Eigen::Matrix2d::Zero(), sumADA = Eigen::Matrix2d::Zero();
  for (const auto& q : k.clusters) I0 += oracle::A_block(q);
  for (const auto& q : k.clusters) sumADA += oracle::A_block(q) * oracle::inverse(I0) * oracle::A_block(q);
  const Eigen::Matrix2d want_md = I0 + oracle::b_lev(k), want_lz = I0 - sumADA;

  std::vector<std::vector<Eigen::MatrixXd>> H(4, std::vector<Eigen::MatrixXd>(4));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) H[i][j] = oracle::hat(k, i, j);

  const int B = 200000;
  std::mt19937_64 eng(20240601);
  std::uniform_real_distribution<double> u;
  Eigen::Matrix2d s_md = Eigen::Matrix2d::Zero(), ss_md = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d s_lz = Eigen::Matrix2d::Zero(), ss_lz = Eigen::Matrix2d::Zero();
  std::vector<Eigen::VectorXd> eps(4), r(4);
  for (int b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& mu = k.clusters[i].mu;
      eps[i].resize(mu.size());
      for (Eigen::Index j = 0; j < mu.size(); ++j) eps[i](j) = (u(eng) < mu(j) ? 1.0 : 0.0) - mu(j);
    }
    for (std::size_t i = 0; i < 4; ++i) {
      r[i] = eps[i];
      for (std::size_t j = 0; j < 4; ++j) r[i] -= H[i][j] * eps[j];
    }
    const auto kr = k.with_residuals(r);
    const VarianceEngine e(kr);
    const Eigen::Matrix2d md = e.family_middle(1.0), lz = e.family_middle(0.0);
    s_md += md;
    ss_md += md.cwiseProduct(md);
    s_lz += lz;
    ss_lz += lz.cwiseProduct(lz);
  }
  double z_md = 0.0, z_lz = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) {
      auto z = [&](const Eigen::Matrix2d& s, const Eigen::Matrix2d& ss, const Eigen::Matrix2d& want) {
        const double m = s(a, c) / B;
        const double var = (ss(a, c) / B - m * m) * B / (B - 1.0);
        return std::abs(m - want(a, c)) / std::sqrt(var / B);
      };
      z_md = std::max(z_md, z(s_md, ss_md, want_md));
      z_lz = std::max(z_lz, z(s_lz, ss_lz, want_lz));
    }
  const double secs = elapsed_since(t0);
  return {z_md <= 3.0 && z_lz <= 3.0 && secs < 120.0,
          fmt("max |z| MD %.2f, LZ %.2f, %.1f s", z_md, z_lz, secs)};
}

Outcome crit7() {
  std::vector<Eigen::MatrixXd> X(5, Eigen::MatrixXd::Ones(4, 1));
  std::vector<Eigen::VectorXd> y(5, Eigen::VectorXd::Zero(4));
  const auto d = oracle::make_dataset(X, y, {"(Intercept)"});
  WorkingModel wm;
  wm.structure = CorrStructure::Independence;
  const auto f = fit(d, wm);
  FitOptions o;
  o.penalized = false;
  const auto g = fit(d, wm, o);
  const double err = std::abs(f.beta_hat(0) - oracle::logit(0.5 / 21.0));
  const bool diverged = !g.converged && g.diverged_reason.has_value();
  return {f.converged && err <= 1e-4 && diverged,
          fmt("|beta0 - logit(0.5/21)| = %.1e, unpenalized diverged = %.0f", err, diverged ? 1.0 : 0.0)};
}

Outcome crit8() {
  const auto t0 = Clock::now();
  double mean_err = 0.0, corr_err = 0.0;
  int invalid = 0;
  const Eigen::Vector4d mu = Eigen::Vector4d::Constant(0.2);
  std::uint64_t stream = 0;
  for (auto s : {CorrStructure::Exchangeable, CorrStructure::Ar1}) {
    for (double rho : {0.05, 0.1, 0.2, 0.3}) {
      const auto coef = clf_coefficients(4, s, rho);
      StreamRng rng(8, stream++, 0);
      Eigen::Vector4d sum = Eigen::Vector4d::Zero();
      Eigen::Matrix4d cross = Eigen::Matrix4d::Zero();
      const int draws = 100000;
      int ok = 0;
      for (int r = 0; r < draws; ++r) {
        const auto dr = clf_generate(mu, coef, rng);
        if (!dr.valid) {
          ++invalid;
          continue;
        }
        sum += dr.y;
        cross += dr.y * dr.y.transpose();
        ++ok;
      }
      const Eigen::Vector4d m = sum / ok;
      const Eigen::Matrix4d cov = cross / ok - m * m.transpose();
      for (int j = 0; j < 4; ++j) {
        mean_err = std::max(mean_err, std::abs(m(j) - 0.2));
        for (int l = 0; l < j; ++l) {
          const double c = cov(j, l) / std::sqrt(cov(j, j) * cov(l, l));
          const double want = s == CorrStructure::Ar1 ? std::pow(rho, j - l) : rho;
          corr_err = std::max(corr_err, std::abs(c - want));
        }
      }
    }
  }
  const double secs = elapsed_since(t0);
  return {mean_err <= 0.005 && corr_err <= 0.02 && invalid == 0 && secs < 60.0,
          fmt("max mean err %.4f, max corr err %.4f, invalid %.0f", mean_err, corr_err, double(invalid)) +
              fmt(", %.1f s", secs)};
}

// ---- simulation grid ----

const char* kGrid = R"(
[defaults]
seed = 42
reps = 1000
phi = estimate
estimators = all
beta1 = 0
beta2 = 0.2
n = 4
gamma = 0.3

[grid typeI]
N = 10
event_rate = 0.1
rho = 0.2
true_structure = exch

[grid convergence]
N = 10
event_rate = 0.1
rho = 0.3
true_structure = exch

[grid power]
N = 50
event_rate = 0.2
rho = 0.05, 0.2
true_structure = exch, ar1
beta1 = log2

[grid unbalanced]
N = 10
n = 2/6
event_rate = 0.2
rho = 0.2
true_structure = exch
)";

const EstimatorMetrics& metric(const ScenarioResult& s, EstimatorId id) {
  for (const auto& m : s.metrics)
    if (m.id == id) return m;
  throw Error(ErrorCode::ConfigError, "estimator missing from the grid");
}

const ScenarioResult& cell(const GridResult& g, const std::string& group) {
  for (const auto& s : g.scenarios)
    if (s.cell.group == group) return s;
  throw Error(ErrorCode::ConfigError, "no cell " + group);
}

std::string render(const GridResult& g) {
  std::ostringstream csv, js;
  write_results_csv(csv, g);
  write_summary_json(js, g);
  return csv.str() + js.str();
}

}  // namespace

int main() {
  report(1, "family identities", crit1);
  report(2, "two-arm eigenvalues", crit2);
  report(3, "push-through and trace", crit3);
  report(4, "Firth penalty vs FD", crit4);
  report(5, "Morel phi invariance", crit5);
  report(6, "leverage bias Monte Carlo", crit6);
  report(7, "Firth closed form", crit7);
  report(8, "CLF moments", crit8);

  const auto cfg = parse_sim_config_text(kGrid);
  RunOptions serial;
  serial.workers = 1;
  const auto t0 = Clock::now();
  std::optional<GridResult> grid;
  std::string grid_error;
  try {
    grid = run_grid(cfg, serial);
  } catch (const std::exception& e) {
    grid_error = e.what();
  }
  const double grid_secs = elapsed_since(t0);
  auto need_grid = [&]() -> const GridResult& {
    if (!grid) throw Error(ErrorCode::ConfigError, "grid failed: " + grid_error);
    return *grid;
  };

  report(9, "type I error, N=10 10%", [&]() -> Outcome {
    const auto& s = cell(need_grid(), "typeI");
    const double lz = metric(s, EstimatorId::LZ).rejection_rate, kc = metric(s, EstimatorId::KC).rejection_rate,
                 ar = metric(s, EstimatorId::AR).rejection_rate;
    const bool ok = lz >= 0.08 && kc >= 0.06 && ar <= 0.06 && ar < kc && kc < lz && grid_secs < 600.0;
    return {ok, fmt("LZ %.3f KC %.3f AR %.3f", lz, kc, ar) + fmt(" (grid %.0f s)", grid_secs)};
  });

  report(10, "SE/SimSE medians, same cell", [&]() -> Outcome {
    const auto& s = cell(need_grid(), "typeI");
    const double lz = metric(s, EstimatorId::LZ).median_se_ratio, kc = metric(s, EstimatorId::KC).median_se_ratio,
                 ar = metric(s, EstimatorId::AR).median_se_ratio;
    const bool ok = lz >= 0.6 && lz <= 0.85 && kc >= 0.75 && kc <= 0.95 && ar >= 1.0 && ar <= 1.25;
    return {ok, fmt("LZ %.3f KC %.3f AR %.3f", lz, kc, ar)};
  });

  report(11, "power ordering, N=50 20%", [&]() -> Outcome {
    std::map<EstimatorId, std::pair<double, double>> pooled;  // rejections, computable
    for (const auto& s : need_grid().scenarios) {
      if (s.cell.group != "power") continue;
      for (auto id : {EstimatorId::LZ, EstimatorId::KC, EstimatorId::MD, EstimatorId::AR}) {
        const auto& m = metric(s, id);
        pooled[id].first += m.rejection_rate * static_cast<double>(m.n_computable);
        pooled[id].second += static_cast<double>(m.n_computable);
      }
    }
    auto rate = [&](EstimatorId id) { return pooled[id].first / pooled[id].second; };
    auto se = [&](EstimatorId id) { return std::sqrt(rate(id) * (1 - rate(id)) / pooled[id].second); };
    const EstimatorId order[] = {EstimatorId::LZ, EstimatorId::KC, EstimatorId::MD, EstimatorId::AR};
    bool gaps = true, strict = true;
    for (int k = 0; k + 1 < 4; ++k) {
      const double gap = rate(order[k]) - rate(order[k + 1]);
      gaps = gaps && gap >= -2.0 * std::max(se(order[k]), se(order[k + 1]));
      strict = strict && gap >= 0.0;
    }
    const double ar = rate(EstimatorId::AR);
    return {gaps && ar >= 0.28 && ar <= 0.39,
            fmt("LZ %.3f KC %.3f MD %.3f", rate(EstimatorId::LZ), rate(EstimatorId::KC), rate(EstimatorId::MD)) +
                fmt(" AR %.3f, strict order ", ar) + (strict ? "yes" : "no")};
  });

  report(12, "convergence census", [&]() -> Outcome {
    const auto& s = cell(need_grid(), "convergence");
    bool conditional = s.B_effective() == s.converged;
    for (const auto& m : s.metrics) conditional = conditional && m.n_computable <= s.converged;
    return {s.convergence_rate >= 0.90 && conditional,
            fmt("convergence %.3f (%.0f of 1000)", s.convergence_rate, double(s.converged))};
  });

  report(13, "unbalanced contract", [&]() -> Outcome {
    const auto& s = cell(need_grid(), "unbalanced");
    bool pool_off = true;
    double worst = 1.0;
    for (const auto& m : s.metrics) {
      if (is_pooling(m.id)) pool_off = pool_off && m.n_computable == 0;
      if (m.id == EstimatorId::AR || m.id == EstimatorId::MD || m.id == EstimatorId::KC || m.id == EstimatorId::LZ)
        worst = std::min(worst, static_cast<double>(m.n_computable) / static_cast<double>(s.converged));
    }
    return {pool_off && worst >= 0.99 && s.converged > 0,
            std::string("pooling never computable: ") + (pool_off ? "yes" : "no") +
                fmt(", min AR/MD/KC/LZ share %.3f", worst)};
  });

  report(14, "determinism", [&]() -> Outcome {
    const auto base = render(need_grid());
    const auto again = render(run_grid(cfg, serial));
    RunOptions par;
    par.workers = 4;
    const auto threaded = render(run_grid(cfg, par));
    return {base == again && base == threaded,
            fmt("%.0f bytes; rerun identical ", double(base.size())) + (base == again ? "yes" : "no") +
                ", 4 workers identical " + (base == threaded ? "yes" : "no")};
  });

  // not a criterion: the same SE/SimSE medians over every N = 10 cell of the null grid
  try {
    const auto n10 = load_sim_config(std::string(PGEE_SOURCE_DIR) + "/configs/core_null_N10.cfg");
    const auto g = run_grid(n10, RunOptions{});
    std::printf("[INFO]    N=10 null grid, median over %zu cells of median SE/SimSE:", g.scenarios.size());
    for (auto id : {EstimatorId::LZ, EstimatorId::KC, EstimatorId::AR}) {
      std::vector<double> v;
      for (const auto& s : g.scenarios) v.push_back(metric(s, id).median_se_ratio);
      std::sort(v.begin(), v.end());
      const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
      std::printf(" %s %.3f", std::string(to_string(id)).c_str(), med);
    }
    std::printf("\n");
  } catch (const std::exception& e) {
    std::printf("[INFO]    N=10 null grid failed: %s\n", e.what());
  }

  std::printf("%d of 14 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
