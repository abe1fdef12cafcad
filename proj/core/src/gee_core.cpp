#include "pgee/gee_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pgee/error.hpp"

namespace pgee {

Eigen::MatrixXd working_correlation(CorrStructure s, double alpha, Eigen::Index n) {
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n);
  switch (s) {
    case CorrStructure::Independence: break;
    case CorrStructure::Exchangeable:
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
          if (j != k) R(j, k) = alpha;
      break;
    case CorrStructure::Ar1:
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
          R(j, k) = std::pow(alpha, static_cast<double>(std::abs(j - k)));
      break;
  }
  return R;
}

ClusterQuantities cluster_quantities(const Eigen::VectorXd& beta, CorrStructure structure,
                                     double alpha, double phi, const Cluster& c) {
  const Eigen::Index n = c.X.rows();
  ClusterQuantities q;
  q.id = c.id;
  Eigen::VectorXd eta = c.X * beta;
  q.mu.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double e = eta(j);
    if (!std::isfinite(e) || std::abs(e) > kEtaLimit) {
      e = std::isnan(e) ? 0.0 : std::clamp(e, -kEtaLimit, kEtaLimit);
      q.saturated = true;
    }
    double m = 1.0 / (1.0 + std::exp(-e));
    if (m < kProbFloor || m > 1.0 - kProbFloor) {
      m = std::clamp(m, kProbFloor, 1.0 - kProbFloor);
      q.saturated = true;
    }
    q.mu(j) = m;
  }
  q.w = q.mu.array() * (1.0 - q.mu.array());
  const Eigen::VectorXd s = q.w.array().sqrt();

  q.V = phi * s.asDiagonal() * working_correlation(structure, alpha, n) * s.asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(q.V);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularV, "working covariance of cluster " + c.id +
                                          " is not positive definite (alpha = " +
                                          std::to_string(alpha) + ")");
  }
  q.V_chol = llt.matrixL();
  q.Vinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  q.Vinv = 0.5 * (q.Vinv + q.Vinv.transpose()).eval();

  q.D = q.w.asDiagonal() * c.X;
  q.r = c.y - q.mu;

  // Work in the standardized basis L^{-1} D so that A is symmetric by construction.
  const Eigen::MatrixXd Dt = llt.matrixL().solve(q.D);
  const Eigen::VectorXd rt = llt.matrixL().solve(q.r);
  q.A = Dt.transpose() * Dt;
  q.d = Dt.transpose() * rt;
  return q;
}

std::size_t FitKernel::total_obs() const noexcept {
  std::size_t n = 0;
  for (const auto& q : clusters) n += static_cast<std::size_t>(q.size());
  return n;
}

bool FitKernel::balanced() const noexcept {
  return std::all_of(clusters.begin(), clusters.end(),
                     [&](const ClusterQuantities& q) { return q.size() == clusters.front().size(); });
}

Eigen::MatrixXd FitKernel::hat_block(std::size_t i) const {
  const auto& q = clusters.at(i);
  return q.D * Delta * q.D.transpose() * q.Vinv;
}

Eigen::MatrixXd FitKernel::cross_hat_block(std::size_t i, std::size_t j) const {
  const auto& qi = clusters.at(i);
  const auto& qj = clusters.at(j);
  return qi.D * Delta * qj.D.transpose() * qj.Vinv;
}

FitKernel FitKernel::with_residuals(std::span<const Eigen::VectorXd> residuals) const {
  if (residuals.size() != clusters.size()) {
    throw Error(ErrorCode::MalformedInput, "residual count does not match cluster count");
  }
  FitKernel out = *this;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    auto& q = out.clusters[i];
    if (residuals[i].size() != q.size()) {
      throw Error(ErrorCode::MalformedInput, "residual length mismatch in cluster " + std::to_string(i));
    }
    q.r = residuals[i];
    q.d = q.D.transpose() * (q.Vinv * q.r);
  }
  return out;
}

namespace {

Eigen::MatrixXd information_only(const Eigen::VectorXd& beta, CorrStructure structure, double alpha,
                                 double phi, const LongitudinalDataset& data) {
  const auto p = static_cast<Eigen::Index>(data.p());
  Eigen::MatrixXd I0 = Eigen::MatrixXd::Zero(p, p);
  for (const auto& c : data.clusters()) I0 += cluster_quantities(beta, structure, alpha, phi, c).A;
  return I0;
}

}  // namespace

FitKernel assemble_kernel(const Eigen::VectorXd& beta, CorrStructure structure, double alpha,
                          double phi, const LongitudinalDataset& data) {
  const auto p = static_cast<Eigen::Index>(data.p());
  if (beta.size() != p) throw Error(ErrorCode::MalformedInput, "beta has the wrong length");

  FitKernel k;
  k.structure = structure;
  k.alpha = structure == CorrStructure::Independence ? 0.0 : alpha;
  k.phi = phi;
  k.clusters.reserve(data.num_clusters());
  k.I0 = Eigen::MatrixXd::Zero(p, p);
  for (const auto& c : data.clusters()) {
    k.clusters.push_back(cluster_quantities(beta, structure, k.alpha, phi, c));
    k.I0 += k.clusters.back().A;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k.I0, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || !std::isfinite(hi) || hi / lo > kInformationConditionLimit) {
    throw Error(ErrorCode::SingularInformation,
                "sensitivity matrix eigenvalues in [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(k.I0);
  k.Delta = llt.solve(Eigen::MatrixXd::Identity(p, p));
  k.Delta = 0.5 * (k.Delta + k.Delta.transpose()).eval();
  return k;
}

Eigen::VectorXd gee_score(const FitKernel& kernel) {
  Eigen::VectorXd U = Eigen::VectorXd::Zero(kernel.p());
  for (const auto& q : kernel.clusters) U += q.d;
  return U;
}

std::vector<Eigen::MatrixXd> information_derivatives(const FitKernel& kernel,
                                                     const LongitudinalDataset& data) {
  const Eigen::Index p = kernel.p();
  std::vector<Eigen::MatrixXd> dI(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(p, p));
  for (std::size_t i = 0; i < kernel.num_clusters(); ++i) {
    const auto& q = kernel.clusters[i];
    const auto& X = data.cluster(i).X;
    // I0_i = X^T K X with K = W V^{-1} W; d(W^{1/2})/dbeta_r = G_r W^{1/2},
    // G_r = diag{(1 - 2 mu_j) x_jr / 2}.
    const Eigen::MatrixXd K = q.w.asDiagonal() * q.Vinv * q.w.asDiagonal();
    const Eigen::VectorXd half_slope = 0.5 * (1.0 - 2.0 * q.mu.array());
    for (Eigen::Index r = 0; r < p; ++r) {
      const Eigen::VectorXd g = half_slope.cwiseProduct(X.col(r));
      const Eigen::MatrixXd GK = g.asDiagonal() * K;
      dI[static_cast<std::size_t>(r)] += X.transpose() * (GK + GK.transpose()) * X;
    }
  }
  return dI;
}

Eigen::VectorXd firth_penalty(const FitKernel& kernel, const LongitudinalDataset& data) {
  const auto dI = information_derivatives(kernel, data);
  Eigen::VectorXd b(kernel.p());
  for (Eigen::Index r = 0; r < kernel.p(); ++r) {
    b(r) = 0.5 * (kernel.Delta * dI[static_cast<std::size_t>(r)]).trace();
  }
  return b;
}

Eigen::VectorXd firth_penalty(const Eigen::VectorXd& beta, CorrStructure structure, double alpha,
                              double phi, const LongitudinalDataset& data) {
  return firth_penalty(assemble_kernel(beta, structure, alpha, phi, data), data);
}

Eigen::VectorXd firth_penalty_fd(const Eigen::VectorXd& beta, CorrStructure structure,
                                 double alpha, double phi, const LongitudinalDataset& data) {
  const auto kernel = assemble_kernel(beta, structure, alpha, phi, data);
  Eigen::VectorXd b(kernel.p());
  for (Eigen::Index r = 0; r < kernel.p(); ++r) {
    const double h = 1e-5 * std::max(1.0, std::abs(beta(r)));
    Eigen::VectorXd up = beta, down = beta;
    up(r) += h;
    down(r) -= h;
    const Eigen::MatrixXd dI = (information_only(up, structure, kernel.alpha, phi, data) -
                                information_only(down, structure, kernel.alpha, phi, data)) /
                               (2.0 * h);
    b(r) = 0.5 * (kernel.Delta * dI).trace();
  }
  return b;
}

}  // namespace pgee
