#include "pgee/varest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pgee/error.hpp"

namespace pgee {

std::string_view to_string(IncomputableReason r) noexcept {
  switch (r) {
    case IncomputableReason::UnbalancedPooling: return "UnbalancedPooling";
    case IncomputableReason::SingularLeverage: return "SingularLeverage";
    case IncomputableReason::NonPositiveVariance: return "NonPositiveVariance";
  }
  return "Unknown";
}

double morel_factor(const FitKernel& kernel) {
  const double nstar = static_cast<double>(kernel.total_obs());
  const double N = static_cast<double>(kernel.num_clusters());
  const double p = static_cast<double>(kernel.p());
  return (nstar - 1.0) / (nstar - p) * N / (N - 1.0);
}

MorelTerms morel_terms(const FitKernel& kernel) {
  const Eigen::Index p = kernel.p();
  const double N = static_cast<double>(kernel.num_clusters());
  Eigen::VectorXd dbar = Eigen::VectorXd::Zero(p);
  for (const auto& q : kernel.clusters) dbar += q.d;
  dbar /= N;
  MorelTerms t;
  t.I1c = Eigen::MatrixXd::Zero(p, p);
  for (const auto& q : kernel.clusters) {
    const Eigen::VectorXd c = q.d - dbar;
    t.I1c.noalias() += c * c.transpose();
  }
  t.kappa = std::max(1.0, (kernel.Delta * t.I1c).trace() / static_cast<double>(p));
  t.delta_n = std::min(0.5, static_cast<double>(p) / (N - static_cast<double>(p)));
  return t;
}

VarianceEngine::VarianceEngine(const FitKernel& kernel, EstimatorOptions opts)
    : k_(kernel), opts_(opts) {}

const LeverageSystem& VarianceEngine::leverage() const {
  if (!lev_) lev_.emplace(k_);
  return *lev_;
}

bool VarianceEngine::leverage_singular() const { return leverage().first_singular().has_value(); }

Eigen::MatrixXd VarianceEngine::family_middle(double c) const {
  const Eigen::Index p = k_.p();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
  if (c == 0.0) {
    for (const auto& q : k_.clusters) M.noalias() += q.d * q.d.transpose();
    return M;
  }
  const auto& lev = leverage();
  for (std::size_t i = 0; i < k_.num_clusters(); ++i) {
    const Eigen::VectorXd f = lev.corrected_score(i, c);
    M.noalias() += f * f.transpose();
  }
  return M;
}

Eigen::MatrixXd VarianceEngine::pooled_middle(double c, double divisor) const {
  const Eigen::Index n = k_.clusters.front().size();
  const Eigen::Index p = k_.p();
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < k_.num_clusters(); ++i) {
    const auto& q = k_.clusters[i];
    const Eigen::VectorXd e = c == 0.0 ? q.r : leverage().corrected_residual(i, c);
    const Eigen::VectorXd u = e.array() / q.w.array().sqrt();
    R.noalias() += u * u.transpose();
  }
  R /= divisor;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
  for (const auto& q : k_.clusters) {
    const Eigen::MatrixXd B = q.w.array().sqrt().matrix().asDiagonal() * (q.Vinv * q.D);
    M.noalias() += B.transpose() * R * B;
  }
  return M;
}

VarianceEstimate VarianceEngine::finish(EstimatorId id, Eigen::MatrixXd V, Eigen::MatrixXd middle) const {
  VarianceEstimate out;
  out.id = id;
  out.V = 0.5 * (V + V.transpose());
  out.middle = 0.5 * (middle + middle.transpose());
  out.se.resize(out.V.rows());
  out.computable = true;
  for (Eigen::Index s = 0; s < out.V.rows(); ++s) {
    const double v = out.V(s, s);
    if (std::isfinite(v) && v > 0.0) {
      out.se(s) = std::sqrt(v);
    } else {
      out.se(s) = std::numeric_limits<double>::quiet_NaN();
      out.computable = false;
    }
  }
  if (!out.computable) out.reason = IncomputableReason::NonPositiveVariance;
  return out;
}

VarianceEstimate VarianceEngine::incomputable(EstimatorId id, IncomputableReason why) const {
  VarianceEstimate out;
  out.id = id;
  out.computable = false;
  out.reason = why;
  out.se = Eigen::VectorXd::Constant(k_.p(), std::numeric_limits<double>::quiet_NaN());
  return out;
}

VarianceEstimate VarianceEngine::estimate(EstimatorId id) const {
  if (is_pooling(id) && !k_.balanced()) return incomputable(id, IncomputableReason::UnbalancedPooling);
  if (needs_leverage_inverse(id) && leverage_singular()) {
    return incomputable(id, IncomputableReason::SingularLeverage);
  }

  const Eigen::MatrixXd& Delta = k_.Delta;
  const Eigen::Index p = k_.p();
  const double N = static_cast<double>(k_.num_clusters());
  auto sandwich = [&](const Eigen::MatrixXd& M) -> Eigen::MatrixXd { return Delta * M * Delta; };

  switch (id) {
    case EstimatorId::LZ: {
      Eigen::MatrixXd M = family_middle(0.0);
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::DF: {
      const double scale = N / (N - static_cast<double>(p));
      const Eigen::MatrixXd M = family_middle(0.0);
      return finish(id, scale * sandwich(M), scale * M);
    }
    case EstimatorId::KC: {
      Eigen::MatrixXd M = family_middle(0.5);
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::MD: {
      Eigen::MatrixXd M = family_middle(1.0);
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::FG: {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
      for (const auto& q : k_.clusters) {
        const Eigen::VectorXd lev = (q.A * Delta).diagonal();
        const Eigen::VectorXd F =
            (1.0 - lev.array().min(opts_.fg_threshold)).rsqrt().matrix();
        const Eigen::VectorXd g = F.cwiseProduct(q.d);
        M.noalias() += g * g.transpose();
      }
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::MBN: {
      const auto t = morel_terms(k_);
      const Eigen::MatrixXd M = morel_factor(k_) * t.I1c;
      return finish(id, sandwich(M) + t.kappa * t.delta_n * Delta, M);
    }
    case EstimatorId::PAN: {
      Eigen::MatrixXd M = pooled_middle(0.0, N);
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::GST: {
      Eigen::MatrixXd M = pooled_middle(0.0, N - static_cast<double>(p));
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::WL: {
      Eigen::MatrixXd M = pooled_middle(1.0, N);
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::WB: {
      Eigen::MatrixXd M = pooled_middle(opts_.wb_exponent, N);
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::RS: {
      const Eigen::MatrixXd M = pooled_middle(0.0, N);
      const double delta_n = std::min(0.5, static_cast<double>(p) / (N - static_cast<double>(p)));
      const double det = std::abs((Delta * M).determinant());
      const double d_det = std::max(1.0, std::pow(det, 1.0 / static_cast<double>(p)));
      return finish(id, sandwich(M) + delta_n * d_det * Delta, M);
    }
    case EstimatorId::FW: {
      const Eigen::MatrixXd Mkc = family_middle(0.5);
      const Eigen::MatrixXd Mmd = family_middle(1.0);
      return finish(id, 0.5 * (sandwich(Mkc) + sandwich(Mmd)), 0.5 * (Mkc + Mmd));
    }
    case EstimatorId::FZ: {
      // sum_{j != i} H_ij r_j r_j^T H_ij^T = D_i Delta (I1 - d_i d_i^T) Delta D_i^T, so the
      // cross-subject sweep collapses to one p x p matrix per cluster.
      const auto& lev = leverage();
      const Eigen::MatrixXd I1 = family_middle(0.0);
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
      for (std::size_t i = 0; i < k_.num_clusters(); ++i) {
        const auto& q = k_.clusters[i];
        const Eigen::VectorXd f = lev.corrected_score(i, 1.0);
        const Eigen::MatrixXd P = lev.corrected_design(i) * Delta;
        M.noalias() += f * f.transpose();
        M.noalias() -= P * (I1 - q.d * q.d.transpose()) * P.transpose();
      }
      return finish(id, sandwich(M), M);
    }
    case EstimatorId::AR: {
      const auto& lev = leverage();
      std::vector<Eigen::VectorXd> f;
      f.reserve(k_.num_clusters());
      Eigen::VectorXd fbar = Eigen::VectorXd::Zero(p);
      for (std::size_t i = 0; i < k_.num_clusters(); ++i) {
        f.push_back(lev.corrected_score(i, 1.0));
        fbar += f.back();
      }
      fbar /= N;
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
      for (const auto& fi : f) {
        const Eigen::VectorXd c = fi - fbar;
        M.noalias() += c * c.transpose();
      }
      M *= morel_factor(k_);
      return finish(id, sandwich(M), M);
    }
  }
  throw Error(ErrorCode::MalformedInput, "unknown estimator");
}

std::vector<VarianceEstimate> VarianceEngine::estimate(std::span<const EstimatorId> ids) const {
  std::vector<VarianceEstimate> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(estimate(id));
  return out;
}

VarianceEstimate estimate_variance(const FitKernel& kernel, EstimatorId id,
                                   const EstimatorOptions& opts) {
  return VarianceEngine(kernel, opts).estimate(id);
}

std::vector<VarianceEstimate> estimate_all(const FitKernel& kernel, std::span<const EstimatorId> ids,
                                           const EstimatorOptions& opts) {
  return VarianceEngine(kernel, opts).estimate(ids);
}

OvercorrectionDiagnostic overcorrection_diagnostic(const FitKernel& kernel) {
  const Eigen::Index p = kernel.p();
  const double scale = kernel.I0.diagonal().cwiseAbs().maxCoeff();
  OvercorrectionDiagnostic out;
  out.B_lev = Eigen::MatrixXd::Zero(p, p);
  for (const auto& q : kernel.clusters) {
    const Eigen::MatrixXd rest = kernel.I0 - q.A;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rest);
    const double lo = eig.eigenvalues().minCoeff();
    if (!(lo > kLeverageSingularity * scale)) {
      throw Error(ErrorCode::SingularLeverage,
                  "I0 - A_i is singular for cluster " + q.id +
                      "; that cluster carries all information in some direction");
    }
    const Eigen::MatrixXd inv =
        eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    out.B_lev.noalias() += q.A * inv * q.A;
  }
  out.B_lev = 0.5 * (out.B_lev + out.B_lev.transpose()).eval();
  out.rho = out.B_lev.diagonal().cwiseQuotient(kernel.I0.diagonal());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> gen(out.B_lev, kernel.I0,
                                                               Eigen::EigenvaluesOnly);
  out.eigenvalues = gen.eigenvalues();
  return out;
}

}  // namespace pgee
