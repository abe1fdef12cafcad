#include "pgee/fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pgee/error.hpp"

namespace pgee {

namespace {

constexpr double kAlphaMargin = 1e-6;
constexpr double kPhiFloor = 1e-6;

std::optional<DivergenceReason> reason_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::SingularInformation: return DivergenceReason::SingularInformation;
    case ErrorCode::SingularV: return DivergenceReason::SingularV;
    default: return std::nullopt;
  }
}

bool any_saturated(const FitKernel& k) {
  return std::any_of(k.clusters.begin(), k.clusters.end(),
                     [](const ClusterQuantities& q) { return q.saturated; });
}

}  // namespace

void validate_fit_options(const FitOptions& opts) {
  if (opts.max_iter < 1) throw Error(ErrorCode::InvalidWorkingModel, "max_iter must be at least 1");
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::InvalidWorkingModel, "tol must be positive");
  if (!(opts.beta_cap > 0.0)) throw Error(ErrorCode::InvalidWorkingModel, "beta_cap must be positive");
  if (opts.max_halvings < 0) throw Error(ErrorCode::InvalidWorkingModel, "max_halvings must be >= 0");
}

std::string_view to_string(DivergenceReason r) noexcept {
  switch (r) {
    case DivergenceReason::BetaCap: return "beta_cap";
    case DivergenceReason::SingularInformation: return "singular_information";
    case DivergenceReason::SingularV: return "singular_v";
    case DivergenceReason::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

NuisanceEstimate alpha_from_residuals(std::span<const Eigen::VectorXd> pearson,
                                      CorrStructure structure, std::size_t p, std::size_t n_max) {
  if (structure == CorrStructure::Independence) return {0.0, false};
  double num = 0.0;
  double pairs = 0.0;
  for (const auto& e : pearson) {
    const Eigen::Index n = e.size();
    if (structure == CorrStructure::Exchangeable) {
      // sum_{j<k} e_j e_k = ((sum e)^2 - sum e^2) / 2
      num += 0.5 * (e.sum() * e.sum() - e.squaredNorm());
      pairs += 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    } else {
      for (Eigen::Index j = 0; j + 1 < n; ++j) num += e(j) * e(j + 1);
      pairs += static_cast<double>(n - 1);
    }
  }
  const double denom = pairs - static_cast<double>(p);
  if (!(denom > 0.0)) return {0.0, true};

  double a = num / denom;
  const auto range = admissible_alpha(structure, n_max);
  const double lo = range.lower + kAlphaMargin;
  const double hi = range.upper - kAlphaMargin;
  bool clamped = false;
  if (!std::isfinite(a)) {
    a = 0.0;
    clamped = true;
  } else if (a < lo || a > hi) {
    a = std::clamp(a, lo, hi);
    clamped = true;
  }
  return {a, clamped};
}

std::vector<Eigen::VectorXd> pearson_residuals(const FitKernel& kernel, double phi) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(kernel.num_clusters());
  for (const auto& q : kernel.clusters) {
    out.push_back(q.r.array() / (q.w.array() * phi).sqrt());
  }
  return out;
}

NuisanceEstimate estimate_alpha(const FitKernel& kernel, CorrStructure structure) {
  std::size_t n_max = 0;
  for (const auto& q : kernel.clusters) n_max = std::max(n_max, static_cast<std::size_t>(q.size()));
  const auto e = pearson_residuals(kernel, kernel.phi);
  return alpha_from_residuals(e, structure, static_cast<std::size_t>(kernel.p()), n_max);
}

NuisanceEstimate estimate_phi(const FitKernel& kernel) {
  double ss = 0.0;
  for (const auto& q : kernel.clusters) ss += (q.r.array().square() / q.w.array()).sum();
  const double denom = static_cast<double>(kernel.total_obs()) - static_cast<double>(kernel.p());
  if (!(denom > 0.0)) return {1.0, true};
  const double phi = ss / denom;
  if (!(phi >= kPhiFloor) || !std::isfinite(phi)) return {kPhiFloor, true};
  return {phi, false};
}

Eigen::VectorXd estimating_function(const FitKernel& kernel, const LongitudinalDataset& data,
                                    bool penalized) {
  Eigen::VectorXd u = gee_score(kernel);
  if (penalized) u += firth_penalty(kernel, data);
  return u;
}

PgeeFit fit(const LongitudinalDataset& data, const WorkingModel& wm, const FitOptions& opts) {
  validate_fit_options(opts);
  validate_working_model(wm, data.max_cluster_size());

  const auto p = static_cast<Eigen::Index>(data.p());
  const CorrStructure structure = wm.structure;

  PgeeFit out;
  out.penalized = opts.penalized;
  out.working = wm;
  out.beta_hat = Eigen::VectorXd::Zero(p);

  double alpha = structure == CorrStructure::Independence ? 0.0 : wm.alpha.value_or(0.0);
  double phi = wm.dispersion.value_or(1.0);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);

  auto fail = [&](DivergenceReason why) {
    out.beta_hat = beta;
    out.alpha_hat = alpha;
    out.phi_hat = phi;
    out.converged = false;
    out.diverged_reason = why;
    return out;
  };

  FitKernel kernel;
  try {
    kernel = assemble_kernel(beta, structure, alpha, phi, data);
  } catch (const Error& e) {
    if (auto why = reason_for(e)) return fail(*why);
    throw;
  }

  // Nuisance refresh from residuals at the current beta. r and w do not
  // depend on alpha or phi, so the kernel at hand supplies them.
  auto refresh_nuisance = [&](const FitKernel& at_beta) {
    if (wm.estimates_dispersion()) {
      const auto est = estimate_phi(at_beta);
      phi = est.value;
      out.phi_degenerate = est.degenerate;
    }
    if (wm.estimates_alpha()) {
      std::vector<Eigen::VectorXd> e;
      e.reserve(at_beta.num_clusters());
      for (const auto& q : at_beta.clusters) e.push_back(q.r.array() / (q.w.array() * phi).sqrt());
      const auto est = alpha_from_residuals(e, structure, data.p(), data.max_cluster_size());
      alpha = est.value;
      out.alpha_degenerate = est.degenerate;
    }
  };

  const bool nuisance_free = !wm.estimates_alpha() && !wm.estimates_dispersion();
  if (!nuisance_free) {
    refresh_nuisance(kernel);
    try {
      kernel = assemble_kernel(beta, structure, alpha, phi, data);
    } catch (const Error& e) {
      if (auto why = reason_for(e)) return fail(*why);
      throw;
    }
  }

  for (int it = 1; it <= opts.max_iter; ++it) {
    out.iterations = it;
    const Eigen::VectorXd ustar = estimating_function(kernel, data, opts.penalized);
    const Eigen::VectorXd step = kernel.Delta * ustar;
    if (!step.allFinite()) return fail(DivergenceReason::SingularInformation);

    if (step.lpNorm<Eigen::Infinity>() < opts.tol) {
      out.beta_hat = beta;
      out.alpha_hat = alpha;
      out.phi_hat = phi;
      out.converged = true;
      out.saturated = any_saturated(kernel);
      out.kernel = std::move(kernel);
      return out;
    }

    // Step-halving on the norm of the estimating function.
    const double base_norm = ustar.norm();
    Eigen::VectorXd accepted;
    FitKernel accepted_kernel;
    std::optional<DivergenceReason> last_failure;
    double scale = 1.0;
    for (int h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
      Eigen::VectorXd cand = beta + scale * step;
      try {
        FitKernel k = assemble_kernel(cand, structure, alpha, phi, data);
        const double norm = estimating_function(k, data, opts.penalized).norm();
        last_failure.reset();
        if (norm <= base_norm || h == opts.max_halvings) {
          accepted = std::move(cand);
          accepted_kernel = std::move(k);
          break;
        }
      } catch (const Error& e) {
        auto why = reason_for(e);
        if (!why) throw;
        last_failure = why;
      }
    }
    if (accepted.size() == 0) {
      return fail(last_failure.value_or(DivergenceReason::SingularInformation));
    }

    beta = std::move(accepted);
    if (beta.lpNorm<Eigen::Infinity>() > opts.beta_cap) return fail(DivergenceReason::BetaCap);

    if (nuisance_free) {
      kernel = std::move(accepted_kernel);
    } else {
      refresh_nuisance(accepted_kernel);
      try {
        kernel = assemble_kernel(beta, structure, alpha, phi, data);
      } catch (const Error& e) {
        if (auto why = reason_for(e)) return fail(*why);
        throw;
      }
    }
  }
  return fail(DivergenceReason::MaxIterations);
}

}  // namespace pgee
