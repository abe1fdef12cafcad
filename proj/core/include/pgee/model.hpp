#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pgee {

/// One subject: binary responses and the covariate rows observed on it.
struct Cluster {
  std::string id;
  Eigen::VectorXd y;                 // n_i, entries in {0, 1}
  Eigen::MatrixXd X;                 // n_i x p, column 0 is the intercept
  std::optional<Eigen::VectorXd> t;  // time covariate, when the input carries one

  std::size_t size() const noexcept { return static_cast<std::size_t>(y.size()); }
};

/// Clusters in first-appearance order. Immutable once validated.
class LongitudinalDataset {
 public:
  LongitudinalDataset() = default;
  LongitudinalDataset(std::vector<Cluster> clusters, std::vector<std::string> coef_names);

  std::span<const Cluster> clusters() const noexcept { return clusters_; }
  const Cluster& cluster(std::size_t i) const { return clusters_.at(i); }
  std::size_t num_clusters() const noexcept { return clusters_.size(); }
  std::size_t p() const noexcept { return coef_names_.size(); }
  std::size_t total_obs() const noexcept { return total_obs_; }
  std::size_t max_cluster_size() const noexcept { return max_size_; }
  bool balanced() const noexcept { return balanced_; }

  /// "(Intercept)" followed by the covariate column names.
  const std::vector<std::string>& coef_names() const noexcept { return coef_names_; }

 private:
  std::vector<Cluster> clusters_;
  std::vector<std::string> coef_names_;
  std::size_t total_obs_ = 0;
  std::size_t max_size_ = 0;
  bool balanced_ = true;
};

enum class CorrStructure { Independence, Exchangeable, Ar1 };

std::string_view to_string(CorrStructure s) noexcept;
/// Accepts ind/independence, exch/exchangeable, ar1.
CorrStructure parse_corr_structure(std::string_view text);

/// Working covariance specification. An empty alpha means "estimate";
/// an empty dispersion means the Pearson plug-in.
struct WorkingModel {
  CorrStructure structure = CorrStructure::Exchangeable;
  std::optional<double> alpha;
  std::optional<double> dispersion = 1.0;

  bool estimates_alpha() const noexcept {
    return structure != CorrStructure::Independence && !alpha.has_value();
  }
  bool estimates_dispersion() const noexcept { return !dispersion.has_value(); }
};

/// Open interval of admissible correlation parameters for clusters up to n_max.
struct AlphaRange {
  double lower;
  double upper;
};
AlphaRange admissible_alpha(CorrStructure s, std::size_t n_max);
bool alpha_admissible(CorrStructure s, double alpha, std::size_t n_max);

/// Throws InvalidWorkingModel when a fixed alpha or dispersion is out of range.
void validate_working_model(const WorkingModel& wm, std::size_t n_max);

enum class EstimatorId { LZ, DF, KC, MD, FG, MBN, PAN, GST, WL, WB, RS, FW, FZ, AR };

inline constexpr std::array<EstimatorId, 14> kAllEstimators = {
    EstimatorId::LZ,  EstimatorId::DF,  EstimatorId::KC, EstimatorId::MD, EstimatorId::FG,
    EstimatorId::MBN, EstimatorId::PAN, EstimatorId::GST, EstimatorId::WL, EstimatorId::WB,
    EstimatorId::RS,  EstimatorId::FW,  EstimatorId::FZ,  EstimatorId::AR};

std::string_view to_string(EstimatorId id) noexcept;
/// Case-insensitive; "Pan" and "PAN" both parse. Throws MalformedInput on unknown tags.
EstimatorId parse_estimator(std::string_view tag);
/// "all" or a comma-separated list of tags.
std::vector<EstimatorId> parse_estimator_list(std::string_view text);

/// Estimators that pool residual outer products and so need equal n_i.
bool is_pooling(EstimatorId id) noexcept;
/// Estimators that invert (I - H_ii).
bool needs_leverage_inverse(EstimatorId id) noexcept;

/// One parsed long-format row before grouping.
struct RawRecord {
  std::string cluster;
  double y = 0.0;
  std::vector<double> covariates;
};

struct RawTable {
  std::vector<std::string> covariate_names;  // columns after `y`
  std::vector<RawRecord> rows;
};

/// Groups rows by cluster in first-appearance order, prepends the intercept
/// column and enforces the dataset invariants.
LongitudinalDataset validate_dataset(const RawTable& raw);

}  // namespace pgee
