#include "pgee/datagen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>

#include "pgee/error.hpp"

namespace pgee {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t key) {
  std::array<std::uint32_t, 8> words{};
  std::uint64_t s = key;
  for (std::size_t i = 0; i < words.size(); i += 2) {
    s = splitmix64(s);
    words[i] = static_cast<std::uint32_t>(s);
    words[i + 1] = static_cast<std::uint32_t>(s >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string_view to_string(ModelForm m) noexcept {
  return m == ModelForm::Full ? "full" : "reduced";
}

ModelForm parse_model_form(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "full") return ModelForm::Full;
  if (s == "reduced") return ModelForm::Reduced;
  throw Error(ErrorCode::ConfigError, "model must be 'full' or 'reduced', got '" + std::string(text) + "'");
}

std::size_t Scenario::max_cluster_size() const {
  return n_pattern.empty() ? 0 : *std::max_element(n_pattern.begin(), n_pattern.end());
}

std::size_t Scenario::num_treated() const {
  return static_cast<std::size_t>(std::lround(gamma * static_cast<double>(N)));
}

bool Scenario::balanced() const noexcept {
  if (N <= 1 || n_pattern.size() <= 1) return true;
  const std::size_t used = std::min(N, n_pattern.size());
  return std::all_of(n_pattern.begin(), n_pattern.begin() + static_cast<std::ptrdiff_t>(used),
                     [&](std::size_t n) { return n == n_pattern.front(); });
}

void validate_scenario(const Scenario& s) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidScenario, msg); };
  if (s.n_pattern.empty()) bad("n_pattern is empty");
  for (auto n : s.n_pattern) {
    if (n < 2) bad("cluster sizes must be at least 2");
  }
  if (s.N < s.p() + 1) bad("N = " + std::to_string(s.N) + " is too small for p = " + std::to_string(s.p()));
  if (!(s.event_rate > 0.0 && s.event_rate < 1.0)) bad("event_rate must lie in (0, 1)");
  if (s.true_structure == CorrStructure::Independence) {
    if (s.rho != 0.0) bad("independence truth requires rho = 0");
  } else if (!alpha_admissible(s.true_structure, s.rho, s.max_cluster_size())) {
    bad("rho = " + std::to_string(s.rho) + " is not admissible");
  }
  if (!(s.gamma > 0.0 && s.gamma < 1.0)) bad("gamma must lie in (0, 1)");
  const auto treated = s.num_treated();
  if (treated < 1 || treated >= s.N) bad("gamma leaves an empty treatment arm");
  if (!std::isfinite(s.beta1) || !std::isfinite(s.beta2)) bad("coefficients must be finite");
}

double design_mean_rate(const Scenario& s, double beta0) {
  const std::size_t treated = s.num_treated();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.N; ++i) {
    const double x = i < treated ? 1.0 : 0.0;
    const std::size_t n = s.cluster_size(i);
    for (std::size_t j = 1; j <= n; ++j) {
      sum += logistic(beta0 + s.beta1 * x + s.beta2 * 0.2 * static_cast<double>(j));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double calibrate_intercept(const Scenario& s) {
  double lo = -20.0, hi = 20.0;
  if (design_mean_rate(s, lo) > s.event_rate || design_mean_rate(s, hi) < s.event_rate) {
    throw Error(ErrorCode::BracketFailure,
                "event rate " + std::to_string(s.event_rate) + " is not reachable with intercept in [-20, 20]");
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (design_mean_rate(s, mid) < s.event_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ClfCoefficients clf_coefficients(std::size_t n, CorrStructure structure, double rho) {
  const auto m = static_cast<Eigen::Index>(n);
  const double a = structure == CorrStructure::Independence ? 0.0 : rho;
  const Eigen::MatrixXd R = [&] {
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(m, m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index k = 0; k < m; ++k) {
        if (j == k) continue;
        out(j, k) = structure == CorrStructure::Ar1 ? std::pow(a, static_cast<double>(std::abs(j - k))) : a;
      }
    return out;
  }();

  ClfCoefficients c;
  c.b = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 1; j < m; ++j) {
    const Eigen::MatrixXd Rjj = R.topLeftCorner(j, j);
    Eigen::LLT<Eigen::MatrixXd> llt(Rjj);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularR, "leading " + std::to_string(j) + "x" + std::to_string(j) +
                                            " block of R is not positive definite");
    }
    c.b.row(j).head(j) = llt.solve(R.col(j).head(j)).transpose();
  }
  return c;
}

StreamRng::StreamRng(std::uint64_t base_seed, std::uint64_t scenario, std::uint64_t rep,
                     std::uint64_t attempt) {
  std::uint64_t key = splitmix64(base_seed);
  key = splitmix64(key ^ splitmix64(scenario + 0x632BE59BD9B4E019ULL));
  key = splitmix64(key ^ splitmix64(rep + 0x85157AF5ULL));
  key = splitmix64(key ^ splitmix64(attempt + 0xA0761D6478BD642FULL));
  eng_ = seeded_engine(key);
}

StreamRng::StreamRng(std::uint64_t seed) : eng_(seeded_engine(splitmix64(seed))) {}

double StreamRng::uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

ClfDraw clf_generate(const Eigen::VectorXd& mu, const ClfCoefficients& coef, StreamRng& rng) {
  const Eigen::Index n = mu.size();
  ClfDraw out;
  out.y.resize(n);
  const Eigen::VectorXd sd = (mu.array() * (1.0 - mu.array())).sqrt();
  for (Eigen::Index j = 0; j < n; ++j) {
    double lambda = mu(j);
    for (Eigen::Index k = 0; k < j; ++k) {
      lambda += coef.b(j, k) * sd(j) / sd(k) * (out.y(k) - mu(k));
    }
    if (!(lambda > 0.0 && lambda < 1.0)) {
      out.valid = false;
      out.y.resize(0);
      return out;
    }
    out.y(j) = rng.uniform() < lambda ? 1.0 : 0.0;
  }
  return out;
}

Eigen::VectorXd cluster_means(const Scenario& s, double beta0, std::size_t i) {
  const std::size_t n = s.cluster_size(i);
  const double x = i < s.num_treated() ? 1.0 : 0.0;
  Eigen::VectorXd mu(static_cast<Eigen::Index>(n));
  for (std::size_t j = 1; j <= n; ++j) {
    mu(static_cast<Eigen::Index>(j - 1)) =
        logistic(beta0 + s.beta1 * x + s.beta2 * 0.2 * static_cast<double>(j));
  }
  return mu;
}

std::optional<LongitudinalDataset> generate_dataset(const Scenario& s, double beta0, StreamRng& rng) {
  const bool full = s.model == ModelForm::Full;
  const Eigen::Index p = full ? 3 : 2;
  const std::size_t treated = s.num_treated();

  // Coefficient tables depend only on the cluster size.
  std::vector<std::pair<std::size_t, ClfCoefficients>> tables;
  auto table_for = [&](std::size_t n) -> const ClfCoefficients& {
    for (const auto& [size, t] : tables)
      if (size == n) return t;
    tables.emplace_back(n, clf_coefficients(n, s.true_structure, s.rho));
    return tables.back().second;
  };

  std::vector<Cluster> clusters;
  clusters.reserve(s.N);
  for (std::size_t i = 0; i < s.N; ++i) {
    const std::size_t n = s.cluster_size(i);
    const Eigen::VectorXd mu = cluster_means(s, beta0, i);
    auto draw = clf_generate(mu, table_for(n), rng);
    if (!draw.valid) return std::nullopt;

    Cluster c;
    c.id = std::to_string(i + 1);
    c.y = std::move(draw.y);
    const auto m = static_cast<Eigen::Index>(n);
    Eigen::VectorXd t(m);
    for (Eigen::Index j = 0; j < m; ++j) t(j) = 0.2 * static_cast<double>(j + 1);
    c.X.resize(m, p);
    c.X.col(0).setOnes();
    c.X.col(1).setConstant(i < treated ? 1.0 : 0.0);
    if (full) c.X.col(2) = t;
    c.t = std::move(t);
    clusters.push_back(std::move(c));
  }
  std::vector<std::string> names{"(Intercept)", "x1"};
  if (full) names.emplace_back("t");
  return LongitudinalDataset(std::move(clusters), std::move(names));
}

GeneratedReplicate generate_replicate(const Scenario& s, double beta0, std::uint64_t scenario_index,
                                      std::uint64_t rep) {
  GeneratedReplicate out;
  for (int attempt = 0; attempt < kMaxDrawAttempts; ++attempt) {
    StreamRng rng(s.seed, scenario_index, rep, static_cast<std::uint64_t>(attempt));
    out.data = generate_dataset(s, beta0, rng);
    if (out.data) return out;
    ++out.invalid_draws;
  }
  return out;
}

}  // namespace pgee
