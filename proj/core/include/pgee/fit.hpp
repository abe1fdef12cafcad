#pragma once

#include <optional>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "pgee/gee_core.hpp"
#include "pgee/model.hpp"

namespace pgee {

struct FitOptions {
  bool penalized = true;
  int max_iter = 50;
  double tol = 1e-6;       // on the infinity norm of the scoring step
  double beta_cap = 50.0;  // divergence threshold on the infinity norm of beta
  int max_halvings = 10;
};

/// Throws InvalidWorkingModel for non-positive max_iter, tol or beta_cap.
void validate_fit_options(const FitOptions& opts);

enum class DivergenceReason { BetaCap, SingularInformation, SingularV, MaxIterations };
std::string_view to_string(DivergenceReason r) noexcept;

/// A nuisance-parameter moment estimate. `degenerate` is set when the
/// estimator had to fall back (zero denominator, floor, or clamp hit).
struct NuisanceEstimate {
  double value = 0.0;
  bool degenerate = false;
};

/// Moment estimator of alpha from standardized (Pearson) residuals. The
/// result is clamped into the admissible interval shrunk by 1e-6.
NuisanceEstimate alpha_from_residuals(std::span<const Eigen::VectorXd> pearson,
                                      CorrStructure structure, std::size_t p, std::size_t n_max);

/// Pearson residuals e_ij = r_ij / sqrt(w_ij * phi) at the kernel's phi.
std::vector<Eigen::VectorXd> pearson_residuals(const FitKernel& kernel, double phi);

NuisanceEstimate estimate_alpha(const FitKernel& kernel, CorrStructure structure);
/// sum e^2 / (n* - p) with residuals standardized at phi = 1; floored at 1e-6.
NuisanceEstimate estimate_phi(const FitKernel& kernel);

struct PgeeFit {
  Eigen::VectorXd beta_hat;
  double alpha_hat = 0.0;
  double phi_hat = 1.0;
  bool converged = false;
  int iterations = 0;
  FitKernel kernel;  // at (beta_hat, alpha_hat, phi_hat); empty if the fit broke down
  std::optional<DivergenceReason> diverged_reason;

  bool alpha_degenerate = false;
  bool phi_degenerate = false;
  bool saturated = false;  // fitted probabilities hit the clamp
  bool penalized = true;
  WorkingModel working;

  bool has_kernel() const noexcept { return kernel.I0.size() > 0; }
};

/// U + b (penalized) or U at the kernel's parameter point.
Eigen::VectorXd estimating_function(const FitKernel& kernel, const LongitudinalDataset& data,
                                    bool penalized);

/// Fisher scoring with step-halving from beta = 0. Non-convergence is a
/// result state; only dataset and working-model errors throw.
PgeeFit fit(const LongitudinalDataset& data, const WorkingModel& wm, const FitOptions& opts = {});

}  // namespace pgee
