#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pgee/model.hpp"

namespace pgee {

enum class ModelForm { Full, Reduced };  // (1, x, t) or (1, x)
std::string_view to_string(ModelForm m) noexcept;
ModelForm parse_model_form(std::string_view text);

struct Scenario {
  std::size_t N = 10;
  std::vector<std::size_t> n_pattern{4};  // cluster i has size n_pattern[i % size]
  double event_rate = 0.1;
  double rho = 0.2;
  CorrStructure true_structure = CorrStructure::Exchangeable;
  CorrStructure working_structure = CorrStructure::Exchangeable;
  double gamma = 0.3;
  double beta1 = 0.0;
  double beta2 = 0.2;
  ModelForm model = ModelForm::Full;
  std::uint64_t seed = 1;

  std::size_t cluster_size(std::size_t i) const { return n_pattern.at(i % n_pattern.size()); }
  std::size_t max_cluster_size() const;
  /// round(gamma * N) clusters, the first ones by index, are treated.
  std::size_t num_treated() const;
  std::size_t p() const noexcept { return model == ModelForm::Full ? 3 : 2; }
  bool balanced() const noexcept;
};

/// Throws InvalidScenario.
void validate_scenario(const Scenario& s);

/// Mean of logistic(b0 + beta1 x_i + beta2 t_ij) over every observation of the design.
double design_mean_rate(const Scenario& s, double beta0);

/// Bisection on [-20, 20] to a 1e-10 bracket. Throws BracketFailure.
double calibrate_intercept(const Scenario& s);

/// Position-j regression weights of the standardized earlier outcomes:
/// row j holds b_{j,0..j-1}, solved from R[0:j, 0:j] b = R[0:j, j].
struct ClfCoefficients {
  Eigen::MatrixXd b;  // strictly lower triangular, n x n
};

/// Throws SingularR.
ClfCoefficients clf_coefficients(std::size_t n, CorrStructure structure, double rho);

/// 64-bit stream for (base seed, scenario, replication, attempt). Streams with
/// different keys are independent; the same key reproduces the same draws.
class StreamRng {
 public:
  StreamRng(std::uint64_t base_seed, std::uint64_t scenario, std::uint64_t rep, std::uint64_t attempt = 0);
  explicit StreamRng(std::uint64_t seed);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  std::mt19937_64& engine() noexcept { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// Outcome of one sequential CLF draw; y is empty when some conditional
/// mean left (0, 1).
struct ClfDraw {
  Eigen::VectorXd y;
  bool valid = true;
};

ClfDraw clf_generate(const Eigen::VectorXd& mu, const ClfCoefficients& coef, StreamRng& rng);

/// Marginal means of cluster i under the scenario's full linear predictor.
Eigen::VectorXd cluster_means(const Scenario& s, double beta0, std::size_t i);

/// One dataset from a single stream; nullopt when any cluster's draw was invalid.
std::optional<LongitudinalDataset> generate_dataset(const Scenario& s, double beta0, StreamRng& rng);

struct GeneratedReplicate {
  std::optional<LongitudinalDataset> data;  // empty only if every attempt was invalid
  int invalid_draws = 0;
};

inline constexpr int kMaxDrawAttempts = 100;

/// Dataset for replication `rep`. An invalid draw is regenerated from the
/// next substream of the same (scenario, rep) key and counted.
GeneratedReplicate generate_replicate(const Scenario& s, double beta0, std::uint64_t scenario_index,
                                      std::uint64_t rep);

}  // namespace pgee
