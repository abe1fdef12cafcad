#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pgee/error.hpp"
#include "pgee/gee_core.hpp"
#include "support/oracles.hpp"

using namespace pgee;

namespace {

constexpr CorrStructure kStructures[] = {CorrStructure::Independence, CorrStructure::Exchangeable,
                                         CorrStructure::Ar1};

Eigen::VectorXd some_beta(Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z(0.0, 0.4);
  Eigen::VectorXd b(p);
  for (Eigen::Index k = 0; k < p; ++k) b(k) = z(eng);
  b(0) -= 0.7;
  return b;
}

Cluster pair_cluster() {
  Cluster c;
  c.id = "a";
  c.y = Eigen::Vector2d(1, 0);
  c.X = Eigen::MatrixXd::Ones(2, 1);
  return c;
}

}  // namespace

TEST_CASE("cluster quantities at beta = 0") {
  const auto d = oracle::random_dataset(1, 6, 3, 5, 3);
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(4);
  for (const auto& c : d.clusters()) {
    const auto q = cluster_quantities(beta, CorrStructure::Exchangeable, 0.2, 1.0, c);
    CHECK((q.mu.array() == 0.5).all());
    CHECK((q.w.array() == 0.25).all());
    CHECK(oracle::rel_err(q.r, c.y - q.mu) == 0.0);
  }
}

TEST_CASE("independence with phi = 1 gives V = W") {
  const auto d = oracle::random_dataset(2, 5, 3, 3, 2);
  const auto beta = some_beta(3, 2);
  for (const auto& c : d.clusters()) {
    const auto q = cluster_quantities(beta, CorrStructure::Independence, 0.0, 1.0, c);
    const Eigen::MatrixXd W = q.w.asDiagonal();
    CHECK(oracle::rel_err(q.V, W) < 1e-15);
    CHECK(oracle::rel_err(q.Vinv, oracle::inverse(W)) < 1e-12);
    CHECK((q.w.array() > 0.0).all());
    CHECK((q.w.array() <= 0.25).all());
  }
}

TEST_CASE("exchangeable V by hand") {
  const auto q = cluster_quantities(Eigen::VectorXd::Zero(1), CorrStructure::Exchangeable, 0.3, 1.0, pair_cluster());
  Eigen::Matrix2d expect;
  expect << 0.25, 0.075, 0.075, 0.25;
  CHECK(oracle::rel_err(q.V, expect) < 1e-15);
  CHECK(oracle::rel_err(q.V_chol * q.V_chol.transpose(), expect) < 1e-14);
}

TEST_CASE("inadmissible alpha is SingularV") {
  Cluster c;
  c.id = "a";
  c.y = Eigen::Vector4d(1, 0, 0, 1);
  c.X = Eigen::MatrixXd::Ones(4, 1);
  try {
    cluster_quantities(Eigen::VectorXd::Zero(1), CorrStructure::Exchangeable, -0.4, 1.0, c);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularV);
  }
}

TEST_CASE("identical clusters with A = a I") {
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::VectorXd> y;
  const int N = 6;
  for (int i = 0; i < N; ++i) {
    Eigen::MatrixXd x(2, 2);
    x << 1, 1, 1, -1;
    X.push_back(x);
    y.push_back(Eigen::Vector2d(i % 2, 1 - i % 2));
  }
  const auto d = oracle::make_dataset(X, y, {"(Intercept)", "x"});
  const auto k = assemble_kernel(Eigen::VectorXd::Zero(2), CorrStructure::Independence, 0.0, 1.0, d);
  CHECK(oracle::rel_err(k.I0, N * 0.5 * Eigen::MatrixXd::Identity(2, 2)) < 1e-15);
  for (std::size_t i = 0; i < k.num_clusters(); ++i) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(k.hat_block(i));
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(es.eigenvalues()(j).real() == doctest::Approx(1.0 / N));
  }
}

TEST_CASE("hat blocks: trace, spectrum and push-through") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto d = oracle::random_dataset(seed, 5 + seed % 4, 2, 6, 3);
    const auto s = kStructures[seed % 3];
    const auto k = assemble_kernel(some_beta(4, seed), s, s == CorrStructure::Independence ? 0.0 : 0.25, 1.3, d);
    double trace = 0.0;
    for (std::size_t i = 0; i < k.num_clusters(); ++i) {
      const Eigen::MatrixXd H = k.hat_block(i);
      CHECK(oracle::rel_err(H, oracle::hat(k, i, i)) < 1e-10);
      trace += H.trace();
      Eigen::EigenSolver<Eigen::MatrixXd> es(H);
      for (Eigen::Index j = 0; j < H.rows(); ++j) {
        CHECK(std::abs(es.eigenvalues()(j).imag()) < 1e-10);
        CHECK(es.eigenvalues()(j).real() > -1e-10);
        CHECK(es.eigenvalues()(j).real() < 1.0);
      }
      const auto& q = k.clusters[i];
      const Eigen::Index n = q.size();
      const Eigen::MatrixXd lhs = oracle::inverse(Eigen::MatrixXd::Identity(n, n) - H) * q.D;
      const Eigen::MatrixXd rhs = q.D * oracle::inverse(k.I0 - q.A) * k.I0;
      CHECK(oracle::rel_err(lhs, rhs) < 1e-8);
      CHECK(oracle::rel_err(q.A, q.A.transpose()) < 1e-14);
      CHECK(oracle::rel_err(q.A, oracle::A_block(q)) < 1e-10);
      for (std::size_t j = 0; j < k.num_clusters(); ++j)
        CHECK(oracle::rel_err(k.cross_hat_block(i, j), oracle::hat(k, i, j)) < 1e-10);
    }
    CHECK(trace == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(oracle::rel_err(k.Delta, oracle::inverse(k.I0)) < 1e-10);
  }
}

TEST_CASE("score") {
  const auto d = oracle::random_dataset(4, 8, 3, 5, 2);
  const auto k = assemble_kernel(some_beta(3, 4), CorrStructure::Exchangeable, 0.1, 1.0, d);
  std::vector<Eigen::VectorXd> zeros;
  for (const auto& q : k.clusters) zeros.push_back(Eigen::VectorXd::Zero(q.size()));
  CHECK(gee_score(k.with_residuals(zeros)).isZero(0.0));

  Eigen::VectorXd U = Eigen::VectorXd::Zero(3);
  for (const auto& q : k.clusters) U += q.D.transpose() * oracle::inverse(q.V) * q.r;
  CHECK(oracle::rel_err(gee_score(k), U) < 1e-12);

  // intercept only, independence, phi = 1: U = sum (y - mu)
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::VectorXd> y;
  for (int i = 0; i < 5; ++i) {
    X.push_back(Eigen::MatrixXd::Ones(3, 1));
    y.push_back(Eigen::Vector3d(i % 2, 0, i == 4));
  }
  const auto d1 = oracle::make_dataset(X, y, {"(Intercept)"});
  const double b0 = -0.4;
  const auto k1 = assemble_kernel(Eigen::VectorXd::Constant(1, b0), CorrStructure::Independence, 0.0, 1.0, d1);
  double total = 0.0;
  for (const auto& yi : y) total += (yi.array() - oracle::logistic(b0)).sum();
  CHECK(gee_score(k1)(0) == doctest::Approx(total).epsilon(1e-13));
}

TEST_CASE("Firth penalty, scalar closed forms") {
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::VectorXd> y;
  for (int i = 0; i < 4; ++i) {
    X.push_back(Eigen::MatrixXd::Ones(3, 1));
    y.push_back(Eigen::Vector3d(i % 2, 0, 1));
  }
  const auto d = oracle::make_dataset(X, y, {"(Intercept)"});
  CHECK(firth_penalty(Eigen::VectorXd::Zero(1), CorrStructure::Independence, 0.0, 1.0, d)(0) ==
        doctest::Approx(0.0));
  const double mu = 0.25;
  CHECK(firth_penalty(Eigen::VectorXd::Constant(1, oracle::logit(mu)), CorrStructure::Independence, 0.0, 1.0, d)(0) ==
        doctest::Approx(0.5 * (1 - 2 * mu)).epsilon(1e-12));
}

TEST_CASE("Firth penalty matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 9; ++seed) {
    const auto d = oracle::random_dataset(100 + seed, 7, 3, 5, 3);
    const auto s = kStructures[seed % 3];
    const double alpha = s == CorrStructure::Independence ? 0.0 : 0.3;
    const auto beta = some_beta(4, seed);
    const auto a = firth_penalty(beta, s, alpha, 1.0, d);
    const auto f = firth_penalty_fd(beta, s, alpha, 1.0, d);
    CHECK(oracle::rel_err(a, f) < 1e-5);
    const auto k = assemble_kernel(beta, s, alpha, 1.0, d);
    CHECK(oracle::rel_err(firth_penalty(k, d), a) < 1e-14);
  }
}

TEST_CASE("Firth penalty stays bounded as clusters are duplicated") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto d = oracle::random_dataset(200 + seed, 6, 3, 4, 2);
    const auto beta = some_beta(3, seed);
    const double b1 = firth_penalty(beta, CorrStructure::Exchangeable, 0.2, 1.0, d).norm();
    for (int m : {2, 4, 8}) {
      std::vector<Cluster> cs;
      for (int r = 0; r < m; ++r)
        for (const auto& c : d.clusters()) {
          Cluster copy = c;
          copy.id += "_" + std::to_string(r);
          cs.push_back(copy);
        }
      const LongitudinalDataset dm(cs, d.coef_names());
      const double bm = firth_penalty(beta, CorrStructure::Exchangeable, 0.2, 1.0, dm).norm();
      CHECK(std::isfinite(bm));
      CHECK(bm <= 2.0 * b1);
    }
  }
}

TEST_CASE("information derivative against central differences of I0") {
  const auto d = oracle::random_dataset(31, 6, 3, 4, 2);
  const auto beta = some_beta(3, 31);
  const auto k = assemble_kernel(beta, CorrStructure::Ar1, 0.4, 1.0, d);
  const auto dI = information_derivatives(k, d);
  REQUIRE(dI.size() == 3);
  for (Eigen::Index r = 0; r < 3; ++r) {
    const double h = 1e-6;
    Eigen::VectorXd bp = beta, bm = beta;
    bp(r) += h;
    bm(r) -= h;
    const Eigen::MatrixXd fd = (assemble_kernel(bp, CorrStructure::Ar1, 0.4, 1.0, d).I0 -
                                assemble_kernel(bm, CorrStructure::Ar1, 0.4, 1.0, d).I0) /
                               (2 * h);
    CHECK(oracle::rel_err(dI[static_cast<std::size_t>(r)], fd) < 1e-6);
  }
}

TEST_CASE("singular information") {
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::VectorXd> y;
  for (int i = 0; i < 5; ++i) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
    x.col(0).setOnes();
    X.push_back(x);
    y.push_back(Eigen::Vector3d(1, 0, i % 2));
  }
  const auto d = oracle::make_dataset(X, y, {"(Intercept)", "zero"});
  try {
    assemble_kernel(Eigen::VectorXd::Zero(2), CorrStructure::Independence, 0.0, 1.0, d);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularInformation);
  }
}

TEST_CASE("saturated linear predictor is clamped, not an error") {
  const auto d = oracle::random_dataset(5, 6, 3, 3, 2);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(3);
  beta(0) = 800.0;
  ClusterQuantities q = cluster_quantities(beta, CorrStructure::Independence, 0.0, 1.0, d.cluster(0));
  CHECK(q.saturated);
  CHECK(q.mu.allFinite());
  CHECK((q.w.array() > 0.0).all());
}
