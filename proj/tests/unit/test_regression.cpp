#include <doctest.h>

#include <cmath>
#include <random>

#include "clusterguard/error.hpp"
#include "clusterguard/regression.hpp"
#include "support/oracle.hpp"

using namespace clusterguard;
using namespace clusterguard::regression;

namespace {

Cluster make_cluster(std::string id, std::initializer_list<std::initializer_list<double>> x,
                     std::initializer_list<double> y) {
  Cluster c;
  c.id = std::move(id);
  c.X.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : x) {
    Eigen::Index j = 0;
    for (double v : row) c.X(i, j++) = v;
    ++i;
  }
  c.y = Eigen::VectorXd::Map(std::data(y), static_cast<Eigen::Index>(y.size()));
  return c;
}

// Two clusters of sizes 2 and 3.
ClusterDataset fixture_a() {
  return ClusterDataset({make_cluster("a", {{1, 1}, {1, 2}}, {1, 3}),
                         make_cluster("b", {{1, 0}, {1, 3}, {1, 5}}, {2, 2, 7})},
                        true);
}

// Three clusters of sizes 1, 2 and 4.
ClusterDataset fixture_c() {
  return ClusterDataset({make_cluster("c1", {{1, 2}}, {3}),
                         make_cluster("c2", {{1, -1}, {1, 1}}, {0, 2}),
                         make_cluster("c3", {{1, 0}, {1, 1}, {1, 2}, {1, 4}}, {1, 1, 4, 3})},
                        true);
}

void check_matrix(const Eigen::MatrixXd& got, std::initializer_list<std::initializer_list<double>> want,
                  double tol = 1e-13) {
  Eigen::Index i = 0;
  for (const auto& row : want) {
    Eigen::Index j = 0;
    for (double v : row) {
      CHECK(got(i, j) == doctest::Approx(v).epsilon(tol));
      ++j;
    }
    ++i;
  }
}

bool close(double a, long double b, double tol) {
  return std::fabs(static_cast<long double>(a) - b) <= tol * std::max(1.0L, std::fabs(b));
}

void check_against_oracle(const ClusterDataset& data, double tol) {
  const auto groups = oracle::to_groups(data);
  const auto cr = cr_fit(data);
  const auto cr_ref = oracle::fit(groups, oracle::Kind::CR);
  const auto wcr = wcr_fit(data);
  const auto wcr_ref = oracle::fit(groups, oracle::Kind::WCR_OlsResiduals);
  const auto wcr2 = wcr_fit(data, 0.95, WcrResiduals::Wcr);
  const auto wcr2_ref = oracle::fit(groups, oracle::Kind::WCR_WcrResiduals);
  const std::size_t p = data.num_regressors();
  for (std::size_t i = 0; i < p; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    REQUIRE(close(cr.theta_hat[ii], cr_ref.theta[i], tol));
    REQUIRE(close(wcr.theta_hat[ii], wcr_ref.theta[i], tol));
    REQUIRE(close(wcr2.theta_hat[ii], wcr2_ref.theta[i], tol));
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      REQUIRE(close(cr.vcov(ii, jj), cr_ref.vcov[i][j], tol));
      REQUIRE(close(wcr.vcov(ii, jj), wcr_ref.vcov[i][j], tol));
      REQUIRE(close(wcr2.vcov(ii, jj), wcr2_ref.vcov[i][j], tol));
    }
  }
  REQUIRE(close(cr.a_n, cr_ref.a_n, 1e-15));
}

}  // namespace

TEST_SUITE("regression") {

TEST_CASE("two-cluster fixture: CR") {
  const auto data = fixture_a();
  const auto fit = cr_fit(data);
  CHECK(fit.theta_hat[0] == doctest::Approx(0.77027027027027029).epsilon(1e-14));
  CHECK(fit.theta_hat[1] == doctest::Approx(1.0135135135135136).epsilon(1e-14));
  CHECK(fit.a_n == doctest::Approx(2.6666666666666665).epsilon(1e-15));
  check_matrix(fit.vcov, {{0.33333333333333331, -0.081081081081081086},
                          {-0.081081081081081086, 0.019722425127830533}});
  const auto scores = cluster_scores(data, fit.theta_hat, Weighting::Unweighted);
  check_matrix(scores.rows, {{-0.58108108108108103, -0.3783783783783784},
                             {0.58108108108108103, 0.3783783783783784}});
  CHECK(fit.num_clusters == 2);
  CHECK(fit.num_obs == 5);
}

TEST_CASE("two-cluster fixture: WCR") {
  const auto data = fixture_a();
  const auto fit = wcr_fit(data);
  CHECK(fit.theta_hat[0] == doctest::Approx(0.66576819407008081).epsilon(1e-14));
  CHECK(fit.theta_hat[1] == doctest::Approx(1.0404312668463611).epsilon(1e-14));
  check_matrix(fit.vcov, {{0.37858370957854004, -0.0975159851441412},
                          {-0.0975159851441412, 0.025118268742251777}});

  const auto refit = wcr_fit(data, 0.95, WcrResiduals::Wcr);
  check_matrix(refit.vcov, {{0.37058302960480594, -0.10148594295114248},
                            {-0.10148594295114248, 0.027792413019198273}});
  const auto raw = cluster_scores(data, fit.theta_hat, Weighting::Unweighted);
  check_matrix(raw.rows, {{-0.45283018867924529, -0.19946091644204852},
                          {0.67924528301886788, 0.29919137466307277}});
  const auto scaled = cluster_scores(data, fit.theta_hat, Weighting::InverseSize);
  CHECK(scaled.rows(0, 0) == doctest::Approx(raw.rows(0, 0) / 2.0).epsilon(1e-15));
  CHECK(scaled.rows(1, 1) == doctest::Approx(raw.rows(1, 1) / 3.0).epsilon(1e-15));
}

TEST_CASE("three-cluster fixture with a singleton") {
  const auto data = fixture_c();
  const auto cr = cr_fit(data);
  CHECK(cr.theta_hat[0] == doctest::Approx(1.0833333333333333).epsilon(1e-14));
  CHECK(cr.theta_hat[1] == doctest::Approx(0.71296296296296291).epsilon(1e-14));
  CHECK(cr.a_n == doctest::Approx(1.8).epsilon(1e-15));
  check_matrix(cr.vcov, {{0.021684242112482852, -0.013018928135954885},
                         {-0.013018928135954885, 0.01543688821995292}});
  check_matrix(cluster_scores(data, cr.theta_hat, Weighting::Unweighted).rows,
               {{0.49074074074074076, 0.98148148148148151},
                {-0.16666666666666666, 0.57407407407407407},
                {-0.32407407407407407, -1.5555555555555556}});

  const auto wcr = wcr_fit(data);
  CHECK(wcr.theta_hat[0] == doctest::Approx(1.0861423220973783).epsilon(1e-14));
  CHECK(wcr.theta_hat[1] == doctest::Approx(0.797752808988764).epsilon(1e-14));
  check_matrix(wcr.vcov, {{0.03841160411394482, -0.008515345466523067},
                          {-0.008515345466523067, 0.021595995798011535}});
  const auto refit = wcr_fit(data, 0.95, WcrResiduals::Wcr);
  check_matrix(refit.vcov, {{0.026160553196264272, -0.013960457676352364},
                            {-0.013960457676352364, 0.026418284931837229}});
  check_matrix(cluster_scores(data, wcr.theta_hat, Weighting::Unweighted).rows,
               {{0.31835205992509363, 0.63670411985018727},
                {-0.17228464419475656, 0.4044943820224719},
                {-0.92883895131086147, -3.3558052434456931}});
}

TEST_CASE("intervals use the normal critical value and the square root of the variance") {
  CHECK(normal_critical_value(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_critical_value(0.90) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  const auto fit = cr_fit(fixture_a(), 0.9);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double half = 1.6448536269514722 * std::sqrt(fit.vcov(j, j));
    CHECK(fit.se[j] == doctest::Approx(std::sqrt(fit.vcov(j, j))));
    CHECK(fit.ci[j].lo == doctest::Approx(fit.theta_hat[j] - half).epsilon(1e-12));
    CHECK(fit.ci[j].hi == doctest::Approx(fit.theta_hat[j] + half).epsilon(1e-12));
  }
  CHECK_THROWS_AS(normal_critical_value(1.0), Error);
  CHECK_THROWS_AS(normal_critical_value(0.0), Error);
}

TEST_CASE("small-sample factor") {
  CHECK(small_sample_adjustment(5, 2, 2) == doctest::Approx(4.0 / 3.0 * 2.0));
  CHECK(small_sample_adjustment(100, 3, 10) == doctest::Approx(99.0 / 97.0 * 10.0 / 9.0));
}

TEST_CASE("random datasets match the brute-force oracle") {
  std::mt19937_64 gen(2024);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t G = 2 + rep % 4;
    const std::size_t p = 1 + rep % 3;
    const auto data = oracle::random_dataset(gen, G, 6, p);
    check_against_oracle(data, 1e-10);
  }
}

TEST_CASE("equal cluster sizes make CR and WCR coincide") {
  std::mt19937_64 gen(77);
  for (int rep = 0; rep < 20; ++rep) {
    const auto data = oracle::random_dataset(gen, 3 + rep % 5, 6, 2 + rep % 2, true);
    for (auto residuals : {WcrResiduals::Ols, WcrResiduals::Wcr}) {
      const auto cr = cr_fit(data);
      const auto wcr = wcr_fit(data, 0.95, residuals);
      REQUIRE((cr.theta_hat - wcr.theta_hat).cwiseAbs().maxCoeff() <= 1e-10);
      REQUIRE((cr.vcov - wcr.vcov).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + cr.vcov.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("singleton clusters reduce to the heteroskedasticity-robust sandwich") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  const std::size_t n = 9;
  std::vector<Cluster> clusters;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    Cluster c;
    c.id = std::to_string(i);
    c.X = Eigen::MatrixXd(1, 2);
    c.X << 1.0, normal(gen);
    c.y = Eigen::VectorXd::Constant(1, normal(gen) + 2.0 * c.X(0, 1));
    X.row(static_cast<Eigen::Index>(i)) = c.X.row(0);
    y[static_cast<Eigen::Index>(i)] = c.y[0];
    clusters.push_back(std::move(c));
  }
  const auto fit = cr_fit(ClusterDataset(std::move(clusters), true));
  const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  const Eigen::VectorXd u = y - X * bread * X.transpose() * y;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) meat += u[i] * u[i] * X.row(i).transpose() * X.row(i);
  const double factor = (n - 1.0) / (n - 2.0) * (n / (n - 1.0));
  const Eigen::MatrixXd hc = factor * bread * meat * bread;
  CHECK((fit.vcov - hc).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rescaling a regressor rescales its coefficient and standard error") {
  std::mt19937_64 gen(19);
  const auto data = oracle::random_dataset(gen, 6, 6, 3);
  std::vector<Cluster> scaled(data.clusters().begin(), data.clusters().end());
  const double c = -3.5;
  for (auto& cl : scaled) cl.X.col(2) *= c;
  const ClusterDataset data2(std::move(scaled), true);
  for (int m = 0; m < 2; ++m) {
    const auto a = m == 0 ? cr_fit(data) : wcr_fit(data);
    const auto b = m == 0 ? cr_fit(data2) : wcr_fit(data2);
    CHECK(b.theta_hat[2] == doctest::Approx(a.theta_hat[2] / c).epsilon(1e-10));
    CHECK(b.se[2] == doctest::Approx(a.se[2] / std::fabs(c)).epsilon(1e-10));
    CHECK(b.theta_hat[1] == doctest::Approx(a.theta_hat[1]).epsilon(1e-10));
  }
}

TEST_CASE("variance estimates are symmetric positive semidefinite") {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 30; ++rep) {
    const auto data = oracle::random_dataset(gen, 2 + rep % 6, 6, 1 + rep % 4);
    for (const auto& fit : {cr_fit(data), wcr_fit(data)}) {
      REQUIRE((fit.vcov - fit.vcov.transpose()).cwiseAbs().maxCoeff() == 0.0);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.vcov);
      REQUIRE(eig.eigenvalues().minCoeff() >= -1e-10 * fit.vcov.trace());
    }
  }
}

TEST_CASE("score orthogonality") {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto data = oracle::random_dataset(gen, 2 + rep % 5, 6, 1 + rep % 3);
    const auto ols = cluster_scores(data, ols_fit(data), Weighting::Unweighted);
    const auto wcr = cluster_scores(data, wcr_estimate(data), Weighting::InverseSize);
    double scale = 0.0;
    for (const auto& c : data.clusters()) scale += (c.X.transpose() * c.y).cwiseAbs().sum();
    REQUIRE(ols.rows.colwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * scale);
    REQUIRE(wcr.rows.colwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
}

TEST_CASE("a perfect fit has zero scores and zero variance") {
  const ClusterDataset data({make_cluster("a", {{1, 1}, {1, 2}}, {3, 5}),
                             make_cluster("b", {{1, 0}, {1, 4}}, {1, 9})},
                            true);
  const auto fit = cr_fit(data);
  CHECK(cluster_scores(data, fit.theta_hat, Weighting::Unweighted).rows.cwiseAbs().maxCoeff() < 1e-13);
  CHECK(fit.vcov.cwiseAbs().maxCoeff() < 1e-24);
  CHECK(wcr_fit(data).vcov.cwiseAbs().maxCoeff() < 1e-24);
}

TEST_CASE("invalid datasets and singular designs") {
  auto expect_kind = [](auto&& fn, ErrorKind kind) {
    try {
      fn();
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
    }
  };
  expect_kind([] { ClusterDataset({make_cluster("a", {{1, 1}, {1, 2}}, {1, 2})}, true); },
              ErrorKind::InvalidArgument);
  expect_kind(
      [] {
        ClusterDataset({make_cluster("a", {{1, 1}}, {1}), make_cluster("b", {{1}}, {2})}, true);
      },
      ErrorKind::InvalidArgument);
  expect_kind(
      [] {
        ClusterDataset({make_cluster("a", {{2, 1}}, {1}), make_cluster("b", {{1, 3}}, {2}),
                        make_cluster("c", {{1, 4}}, {2})},
                       true);
      },
      ErrorKind::InvalidArgument);
  expect_kind([] { ClusterDataset({make_cluster("a", {{1, 1}}, {1}), make_cluster("b", {{1, 2}}, {2})}, true); },
              ErrorKind::InvalidArgument);
  const ClusterDataset collinear({make_cluster("a", {{1, 2}, {1, 2}}, {1, 2}),
                                  make_cluster("b", {{1, 2}, {1, 2}}, {3, 1})},
                                 true);
  expect_kind([&] { cr_fit(collinear); }, ErrorKind::SingularDesign);
  expect_kind([&] { wcr_fit(collinear); }, ErrorKind::SingularDesign);
}

}
