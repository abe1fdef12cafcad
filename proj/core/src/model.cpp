#include "pgee/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "pgee/error.hpp"

namespace pgee {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonBinaryOutcome: return "NonBinaryOutcome";
    case ErrorCode::SingletonCluster: return "SingletonCluster";
    case ErrorCode::RaggedCovariates: return "RaggedCovariates";
    case ErrorCode::TooFewClusters: return "TooFewClusters";
    case ErrorCode::NonFiniteCovariate: return "NonFiniteCovariate";
    case ErrorCode::DuplicateClusterId: return "DuplicateClusterId";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::InvalidWorkingModel: return "InvalidWorkingModel";
    case ErrorCode::SingularV: return "SingularV";
    case ErrorCode::SingularInformation: return "SingularInformation";
    case ErrorCode::SingularLeverage: return "SingularLeverage";
    case ErrorCode::ZeroSE: return "ZeroSE";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::SingularR: return "SingularR";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::TooFewConverged: return "TooFewConverged";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

LongitudinalDataset::LongitudinalDataset(std::vector<Cluster> clusters,
                                         std::vector<std::string> coef_names)
    : clusters_(std::move(clusters)), coef_names_(std::move(coef_names)) {
  std::unordered_set<std::string> seen;
  for (const auto& c : clusters_) {
    if (!seen.insert(c.id).second) {
      throw Error(ErrorCode::DuplicateClusterId, "cluster id " + c.id + " appears twice");
    }
    total_obs_ += c.size();
    if (max_size_ != 0 && c.size() != clusters_.front().size()) balanced_ = false;
    max_size_ = std::max(max_size_, c.size());
  }
}

std::string_view to_string(CorrStructure s) noexcept {
  switch (s) {
    case CorrStructure::Independence: return "independence";
    case CorrStructure::Exchangeable: return "exchangeable";
    case CorrStructure::Ar1: return "ar1";
  }
  return "unknown";
}

CorrStructure parse_corr_structure(std::string_view text) {
  const std::string s = lower(trim(text));
  if (s == "ind" || s == "independence") return CorrStructure::Independence;
  if (s == "exch" || s == "exchangeable") return CorrStructure::Exchangeable;
  if (s == "ar1") return CorrStructure::Ar1;
  throw Error(ErrorCode::MalformedInput, "unknown correlation structure '" + std::string(text) + "'");
}

AlphaRange admissible_alpha(CorrStructure s, std::size_t n_max) {
  switch (s) {
    case CorrStructure::Independence: return {0.0, 0.0};
    case CorrStructure::Exchangeable:
      if (n_max < 2) return {-1.0, 1.0};
      return {-1.0 / static_cast<double>(n_max - 1), 1.0};
    case CorrStructure::Ar1: return {-1.0, 1.0};
  }
  return {0.0, 0.0};
}

bool alpha_admissible(CorrStructure s, double alpha, std::size_t n_max) {
  if (!std::isfinite(alpha)) return false;
  if (s == CorrStructure::Independence) return alpha == 0.0;
  const auto range = admissible_alpha(s, n_max);
  return alpha > range.lower && alpha < range.upper;
}

void validate_working_model(const WorkingModel& wm, std::size_t n_max) {
  if (wm.alpha && wm.structure != CorrStructure::Independence &&
      !alpha_admissible(wm.structure, *wm.alpha, n_max)) {
    throw Error(ErrorCode::InvalidWorkingModel,
                "alpha " + std::to_string(*wm.alpha) + " is not admissible for " +
                    std::string(to_string(wm.structure)));
  }
  if (wm.dispersion && !(*wm.dispersion > 0.0 && std::isfinite(*wm.dispersion))) {
    throw Error(ErrorCode::InvalidWorkingModel, "dispersion must be positive");
  }
}

std::string_view to_string(EstimatorId id) noexcept {
  switch (id) {
    case EstimatorId::LZ: return "LZ";
    case EstimatorId::DF: return "DF";
    case EstimatorId::KC: return "KC";
    case EstimatorId::MD: return "MD";
    case EstimatorId::FG: return "FG";
    case EstimatorId::MBN: return "MBN";
    case EstimatorId::PAN: return "PAN";
    case EstimatorId::GST: return "GST";
    case EstimatorId::WL: return "WL";
    case EstimatorId::WB: return "WB";
    case EstimatorId::RS: return "RS";
    case EstimatorId::FW: return "FW";
    case EstimatorId::FZ: return "FZ";
    case EstimatorId::AR: return "AR";
  }
  return "??";
}

EstimatorId parse_estimator(std::string_view tag) {
  std::string up(trim(tag));
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto id : kAllEstimators) {
    if (up == to_string(id)) return id;
  }
  throw Error(ErrorCode::MalformedInput, "unknown estimator tag '" + std::string(tag) + "'");
}

std::vector<EstimatorId> parse_estimator_list(std::string_view text) {
  if (lower(trim(text)) == "all") return {kAllEstimators.begin(), kAllEstimators.end()};
  std::vector<EstimatorId> ids;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    auto piece = trim(text.substr(start, comma - start));
    if (!piece.empty()) {
      auto id = parse_estimator(piece);
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    start = comma + 1;
  }
  if (ids.empty()) throw Error(ErrorCode::MalformedInput, "empty estimator list");
  return ids;
}

bool is_pooling(EstimatorId id) noexcept {
  switch (id) {
    case EstimatorId::PAN:
    case EstimatorId::GST:
    case EstimatorId::WL:
    case EstimatorId::WB:
    case EstimatorId::RS: return true;
    default: return false;
  }
}

bool needs_leverage_inverse(EstimatorId id) noexcept {
  switch (id) {
    case EstimatorId::KC:
    case EstimatorId::MD:
    case EstimatorId::WL:
    case EstimatorId::WB:
    case EstimatorId::FW:
    case EstimatorId::FZ:
    case EstimatorId::AR: return true;
    default: return false;
  }
}

LongitudinalDataset validate_dataset(const RawTable& raw) {
  const std::size_t k = raw.covariate_names.size();
  const std::size_t p = k + 1;

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const RawRecord*>> groups;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    if (row.covariates.size() != k) {
      throw Error(ErrorCode::RaggedCovariates,
                  "row " + std::to_string(r + 1) + " has " + std::to_string(row.covariates.size()) +
                      " covariates, expected " + std::to_string(k));
    }
    if (row.y != 0.0 && row.y != 1.0) {
      throw Error(ErrorCode::NonBinaryOutcome,
                  "row " + std::to_string(r + 1) + " (cluster " + row.cluster +
                      ") has y = " + std::to_string(row.y));
    }
    for (double v : row.covariates) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteCovariate,
                    "row " + std::to_string(r + 1) + " has a non-finite covariate");
      }
    }
    auto [it, inserted] = groups.try_emplace(row.cluster);
    if (inserted) order.push_back(row.cluster);
    it->second.push_back(&row);
  }

  const auto t_col = std::find(raw.covariate_names.begin(), raw.covariate_names.end(), "t");

  std::vector<Cluster> clusters;
  clusters.reserve(order.size());
  for (const auto& id : order) {
    const auto& rows = groups.at(id);
    if (rows.size() < 2) {
      throw Error(ErrorCode::SingletonCluster, "cluster " + id + " has a single observation");
    }
    Cluster c;
    c.id = id;
    const auto n = static_cast<Eigen::Index>(rows.size());
    c.y.resize(n);
    c.X.resize(n, static_cast<Eigen::Index>(p));
    for (Eigen::Index j = 0; j < n; ++j) {
      c.y(j) = rows[j]->y;
      c.X(j, 0) = 1.0;
      for (std::size_t m = 0; m < k; ++m) c.X(j, static_cast<Eigen::Index>(m + 1)) = rows[j]->covariates[m];
    }
    if (t_col != raw.covariate_names.end()) {
      c.t = c.X.col(1 + (t_col - raw.covariate_names.begin()));
    }
    clusters.push_back(std::move(c));
  }

  if (clusters.size() < p + 1) {
    throw Error(ErrorCode::TooFewClusters,
                std::to_string(clusters.size()) + " clusters for " + std::to_string(p) +
                    " coefficients; need at least " + std::to_string(p + 1));
  }

  std::vector<std::string> names;
  names.reserve(p);
  names.emplace_back("(Intercept)");
  for (const auto& n : raw.covariate_names) names.push_back(n);
  return LongitudinalDataset(std::move(clusters), std::move(names));
}

}  // namespace pgee
