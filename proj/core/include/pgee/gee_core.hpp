#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pgee/model.hpp"

namespace pgee {

inline constexpr double kEtaLimit = 700.0;
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kInformationConditionLimit = 1e12;

/// R(alpha) for a cluster of size n.
Eigen::MatrixXd working_correlation(CorrStructure s, double alpha, Eigen::Index n);

/// Marginal-model quantities for one cluster at (beta, alpha, phi).
struct ClusterQuantities {
  std::string id;
  Eigen::VectorXd mu;
  Eigen::VectorXd w;       // diagonal of W = diag{mu (1 - mu)}
  Eigen::MatrixXd D;       // W X
  Eigen::MatrixXd V;       // phi W^{1/2} R W^{1/2}
  Eigen::MatrixXd V_chol;  // lower Cholesky factor L, V = L L^T
  Eigen::MatrixXd Vinv;
  Eigen::VectorXd r;       // y - mu
  Eigen::MatrixXd A;       // D^T V^{-1} D
  Eigen::VectorXd d;       // D^T V^{-1} r
  bool saturated = false;  // some |eta| hit the clamp or mu hit the floor

  Eigen::Index size() const noexcept { return mu.size(); }
};

/// Throws SingularV when the working covariance is not positive definite.
ClusterQuantities cluster_quantities(const Eigen::VectorXd& beta, CorrStructure structure,
                                     double alpha, double phi, const Cluster& c);

/// Sensitivity matrix and per-cluster quantities at one parameter point.
struct FitKernel {
  Eigen::MatrixXd I0;
  Eigen::MatrixXd Delta;  // I0^{-1}
  std::vector<ClusterQuantities> clusters;
  CorrStructure structure = CorrStructure::Independence;
  double alpha = 0.0;
  double phi = 1.0;

  std::size_t num_clusters() const noexcept { return clusters.size(); }
  Eigen::Index p() const noexcept { return I0.rows(); }
  std::size_t total_obs() const noexcept;
  bool balanced() const noexcept;

  /// H_ii = D_i Delta D_i^T V_i^{-1}.
  Eigen::MatrixXd hat_block(std::size_t i) const;
  /// H_ij = D_i Delta D_j^T V_j^{-1}.
  Eigen::MatrixXd cross_hat_block(std::size_t i, std::size_t j) const;

  /// Copy with r_i replaced and d_i recomputed; everything else unchanged.
  FitKernel with_residuals(std::span<const Eigen::VectorXd> residuals) const;
};

/// Throws SingularInformation when I0 is not positive definite or its
/// condition number exceeds kInformationConditionLimit.
FitKernel assemble_kernel(const Eigen::VectorXd& beta, CorrStructure structure, double alpha,
                          double phi, const LongitudinalDataset& data);

/// U = sum_i d_i.
Eigen::VectorXd gee_score(const FitKernel& kernel);

/// dI0/dbeta_r for every r, holding alpha and phi fixed.
std::vector<Eigen::MatrixXd> information_derivatives(const FitKernel& kernel,
                                                     const LongitudinalDataset& data);

/// b_r = 1/2 trace(I0^{-1} dI0/dbeta_r) from the analytic derivative.
Eigen::VectorXd firth_penalty(const FitKernel& kernel, const LongitudinalDataset& data);
Eigen::VectorXd firth_penalty(const Eigen::VectorXd& beta, CorrStructure structure, double alpha,
                              double phi, const LongitudinalDataset& data);

/// Same quantity with dI0/dbeta_r from central differences of I0,
/// step 1e-5 * max(1, |beta_r|).
Eigen::VectorXd firth_penalty_fd(const Eigen::VectorXd& beta, CorrStructure structure,
                                 double alpha, double phi, const LongitudinalDataset& data);

}  // namespace pgee
