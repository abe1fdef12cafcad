#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pgee/gee_core.hpp"
#include "pgee/model.hpp"

namespace pgee {

inline constexpr double kLeverageSingularity = 1e-10;

/// Eigen-decomposition of the leverage blocks in the basis standardized by
/// the Cholesky factor of V_i: S_i = L^{-1} D_i Delta D_i^T L^{-T} is
/// symmetric and similar to H_ii, so (I - H_ii)^{-c} = L (I - S_i)^{-c} L^{-1}.
class LeverageSystem {
 public:
  explicit LeverageSystem(const FitKernel& kernel);

  std::size_t num_clusters() const noexcept { return blocks_.size(); }
  /// Index of the first cluster whose 1 - max eig(H_ii) <= kLeverageSingularity.
  std::optional<std::size_t> first_singular() const noexcept { return first_singular_; }
  /// Largest leverage eigenvalue of cluster i.
  double max_leverage(std::size_t i) const { return blocks_.at(i).lambda.maxCoeff(); }
  const Eigen::VectorXd& leverage_eigenvalues(std::size_t i) const { return blocks_.at(i).lambda; }

  /// (I - H_ii)^{-c} r_i. Throws SingularLeverage for c > 0 on a singular block.
  Eigen::VectorXd corrected_residual(std::size_t i, double c) const;
  /// f_i(c) = D_i^T V_i^{-1} (I - H_ii)^{-c} r_i.
  Eigen::VectorXd corrected_score(std::size_t i, double c) const;
  /// D_i^T V_i^{-1} (I - H_ii)^{-1} D_i.
  Eigen::MatrixXd corrected_design(std::size_t i) const;

 private:
  struct Block {
    Eigen::MatrixXd L;       // Cholesky factor of V_i
    Eigen::MatrixXd Dt;      // L^{-1} D_i
    Eigen::VectorXd rt;      // L^{-1} r_i
    Eigen::MatrixXd Q;       // eigenvectors of S_i
    Eigen::VectorXd lambda;  // eigenvalues of S_i
    Eigen::VectorXd d;       // uncorrected score, returned verbatim for c = 0
    bool singular = false;
  };
  Eigen::VectorXd power_weights(const Block& b, double c, std::size_t i) const;

  std::vector<Block> blocks_;
  std::vector<std::string> ids_;
  std::optional<std::size_t> first_singular_;
};

/// f_i(c) for every cluster.
std::vector<Eigen::VectorXd> leverage_scores(const FitKernel& kernel, double c);

enum class IncomputableReason { UnbalancedPooling, SingularLeverage, NonPositiveVariance };
std::string_view to_string(IncomputableReason r) noexcept;

struct VarianceEstimate {
  EstimatorId id = EstimatorId::LZ;
  Eigen::MatrixXd V;       // p x p covariance of beta-hat
  Eigen::MatrixXd middle;  // the sandwich middle matrix M (multiplicative part for MBN/RS)
  Eigen::VectorXd se;      // sqrt(diag V); NaN where the diagonal is not positive
  bool computable = false;
  std::optional<IncomputableReason> reason;

  /// se(s) is usable for inference.
  bool usable(Eigen::Index s) const noexcept {
    return computable || (V.size() > 0 && s < se.size() && std::isfinite(se(s)) && se(s) > 0.0);
  }
};

struct EstimatorOptions {
  double fg_threshold = 0.75;
  double wb_exponent = 0.5;
};

/// (n* - 1)/(n* - p) * N/(N - 1).
double morel_factor(const FitKernel& kernel);

/// Morel/MBN quantities that the additive stabilizer is built from.
struct MorelTerms {
  Eigen::MatrixXd I1c;   // sum (d_i - dbar)(d_i - dbar)^T
  double kappa = 1.0;    // max{1, trace(Delta I1c) / p}
  double delta_n = 0.0;  // min{0.5, p / (N - p)}
};
MorelTerms morel_terms(const FitKernel& kernel);

/// Holds the shared intermediate results so that evaluating all estimators
/// on one fit costs one leverage decomposition.
class VarianceEngine {
 public:
  explicit VarianceEngine(const FitKernel& kernel, EstimatorOptions opts = {});

  VarianceEstimate estimate(EstimatorId id) const;
  std::vector<VarianceEstimate> estimate(std::span<const EstimatorId> ids) const;

  /// Sandwich middle for the Westgate-Burchett family, sum f_i(c) f_i(c)^T.
  Eigen::MatrixXd family_middle(double c) const;
  const LeverageSystem& leverage() const;
  bool leverage_singular() const;

 private:
  Eigen::MatrixXd pooled_middle(double c, double divisor) const;
  VarianceEstimate finish(EstimatorId id, Eigen::MatrixXd V, Eigen::MatrixXd middle) const;
  VarianceEstimate incomputable(EstimatorId id, IncomputableReason why) const;

  const FitKernel& k_;
  EstimatorOptions opts_;
  mutable std::optional<LeverageSystem> lev_;
};

VarianceEstimate estimate_variance(const FitKernel& kernel, EstimatorId id,
                                   const EstimatorOptions& opts = {});
std::vector<VarianceEstimate> estimate_all(const FitKernel& kernel,
                                           std::span<const EstimatorId> ids = kAllEstimators,
                                           const EstimatorOptions& opts = {});

struct OvercorrectionDiagnostic {
  Eigen::MatrixXd B_lev;        // sum A_i (I0 - A_i)^{-1} A_i
  Eigen::VectorXd rho;          // [B_lev]_ss / [I0]_ss
  Eigen::VectorXd eigenvalues;  // of I0^{-1} B_lev, ascending
};

/// Throws SingularLeverage naming the cluster whose removal leaves I0 singular.
OvercorrectionDiagnostic overcorrection_diagnostic(const FitKernel& kernel);

struct WaldResult {
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  int dof = 0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Two-sided t test with N - p degrees of freedom and a 95% interval.
/// Throws ZeroSE when se is not a positive finite number.
WaldResult wald_test(double beta_s, double se_s, std::size_t N, std::size_t p,
                     double null_value = 0.0);

/// Student-t quantities backing the test.
double student_t_cdf(double x, double dof);
double student_t_quantile(double prob, double dof);

}  // namespace pgee
