#include <cmath>
#include <string>

#include "pgee/error.hpp"
#include "pgee/varest.hpp"

namespace pgee {

LeverageSystem::LeverageSystem(const FitKernel& kernel) {
  blocks_.reserve(kernel.num_clusters());
  ids_.reserve(kernel.num_clusters());
  for (std::size_t i = 0; i < kernel.num_clusters(); ++i) {
    const auto& q = kernel.clusters[i];
    Block b;
    b.L = q.V_chol;
    const auto tri = b.L.triangularView<Eigen::Lower>();
    b.Dt = tri.solve(q.D);
    b.rt = tri.solve(q.r);
    b.d = q.d;
    Eigen::MatrixXd S = b.Dt * kernel.Delta * b.Dt.transpose();
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    b.Q = eig.eigenvectors();
    b.lambda = eig.eigenvalues();
    b.singular = !(1.0 - b.lambda.maxCoeff() > kLeverageSingularity);
    if (b.singular && !first_singular_) first_singular_ = i;
    blocks_.push_back(std::move(b));
    ids_.push_back(q.id);
  }
}

Eigen::VectorXd LeverageSystem::power_weights(const Block& b, double c, std::size_t i) const {
  if (b.singular && c > 0.0) {
    throw Error(ErrorCode::SingularLeverage,
                "I - H_ii is numerically singular for cluster " + ids_.at(i) +
                    " (max leverage " + std::to_string(b.lambda.maxCoeff()) + ")");
  }
  return (1.0 - b.lambda.array()).pow(-c).matrix();
}

Eigen::VectorXd LeverageSystem::corrected_residual(std::size_t i, double c) const {
  const auto& b = blocks_.at(i);
  if (c == 0.0) return b.L * b.rt;
  const Eigen::VectorXd wts = power_weights(b, c, i);
  return b.L * (b.Q * (wts.asDiagonal() * (b.Q.transpose() * b.rt)));
}

Eigen::VectorXd LeverageSystem::corrected_score(std::size_t i, double c) const {
  const auto& b = blocks_.at(i);
  if (c == 0.0) return b.d;
  const Eigen::VectorXd wts = power_weights(b, c, i);
  return b.Dt.transpose() * (b.Q * (wts.asDiagonal() * (b.Q.transpose() * b.rt)));
}

Eigen::MatrixXd LeverageSystem::corrected_design(std::size_t i) const {
  const auto& b = blocks_.at(i);
  const Eigen::VectorXd wts = power_weights(b, 1.0, i);
  const Eigen::MatrixXd QtD = b.Q.transpose() * b.Dt;
  return QtD.transpose() * wts.asDiagonal() * QtD;
}

std::vector<Eigen::VectorXd> leverage_scores(const FitKernel& kernel, double c) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(kernel.num_clusters());
  if (c == 0.0) {
    for (const auto& q : kernel.clusters) out.push_back(q.d);
    return out;
  }
  const LeverageSystem lev(kernel);
  for (std::size_t i = 0; i < kernel.num_clusters(); ++i) out.push_back(lev.corrected_score(i, c));
  return out;
}

}  // namespace pgee
