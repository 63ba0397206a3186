#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dbot/clustering.hpp"
#include "dbot/core.hpp"
#include "dbot/oracle.hpp"
#include "dbot/synthetic.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace dbot;
using test::mat2;
using test::max_abs_diff;

TEST_CASE("kmeans++ seeding basics") {
  Matrix pts(4, 2);
  pts << 0, 0, 10, 0, 0, 10, 10, 10;

  const Matrix all = init_centroids_kmeanspp(pts, 4, 3);
  // Every data point appears exactly once.
  for (Index i = 0; i < 4; ++i) {
    int matches = 0;
    for (Index c = 0; c < 4; ++c) matches += (all.row(c) - pts.row(i)).norm() < 1e-12;
    CHECK(matches == 1);
  }

  const Matrix one = init_centroids_kmeanspp(pts, 1, 7);
  bool is_data_point = false;
  for (Index i = 0; i < 4; ++i) is_data_point |= (one.row(0) - pts.row(i)).norm() < 1e-12;
  CHECK(is_data_point);

  CHECK(init_centroids_kmeanspp(pts, 3, 42).isApprox(init_centroids_kmeanspp(pts, 3, 42)));
  CHECK_THROWS_AS(init_centroids_kmeanspp(pts, 5, 0), DbotError);
}

TEST_CASE("assign is near-identity for points sitting on the centroids") {
  Matrix pts(2, 1), cents(2, 1);
  pts << 0, 10;
  cents << 0, 10;
  const Coupling p = assign_points(pts, cents, ClusterBounds::uniform(2, 0.0, 2.0), 0.05);
  CHECK(p.plan(0, 0) > 0.99);
  CHECK(p.plan(1, 1) > 0.99);
}

TEST_CASE("assign leaves slack bounds inactive") {
  Matrix pts(4, 1), cents(2, 1);
  pts << 0, 0, 0, 10;
  cents << 0, 10;
  const Coupling p = assign_points(pts, cents, ClusterBounds::uniform(2, 0.0, 4.0), 0.5);
  const Vector cols = p.col_sums();
  CHECK(cols[0] == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(cols[1] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("assign honors exact balanced bounds and splits the weakest margin") {
  Matrix pts(4, 1), cents(2, 1);
  pts << 0.1, 0.0, -0.1, 10.0;
  cents << 0, 10;
  const Coupling p = assign_points(pts, cents, ClusterBounds::uniform(2, 2.0, 2.0), 0.5);
  const Vector cols = p.col_sums();
  CHECK(cols[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(cols[1] == doctest::Approx(2.0).epsilon(1e-6));
  // The zero-point closest to the far centroid carries the most overflow.
  CHECK(p.plan(0, 1) > p.plan(1, 1));
  CHECK(p.plan(1, 1) > p.plan(2, 1));

  // Exhaustive partition search agrees that the best balanced split pairs
  // one near-zero point with the outlier.
  Matrix exact(4, 1);
  exact << 0, 0, 0, 10;
  const auto part = oracle_partition_clustering(exact, 2, {{2, 2}, {2, 2}});
  int outlier_cluster = part.assignment[3];
  int paired = 0;
  for (int i = 0; i < 3; ++i) paired += part.assignment[i] == outlier_cluster;
  CHECK(paired == 1);
}

TEST_CASE("reweight_matrix is the one-hot row argmax") {
  CHECK(reweight_matrix(Coupling(mat2(0.7, 0.3, 0.4, 0.6))).isApprox(mat2(1, 0, 0, 1)));
  CHECK(reweight_matrix(Coupling(mat2(0.5, 0.5, 0.2, 0.8))).isApprox(mat2(1, 0, 0, 1)));
  CHECK(reweight_matrix(Coupling(mat2(0, 1, 1, 0))).isApprox(mat2(0, 1, 1, 0)));
}

TEST_CASE("reweight_matrix ignores positive row scalings") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix p = Matrix::NullaryExpr(6, 4, [&] { return unit(rng); });
    Matrix scaled = p;
    for (Index i = 0; i < 6; ++i) scaled.row(i) *= 0.1 + 3.0 * unit(rng);
    CHECK(reweight_matrix(Coupling(p)).isApprox(reweight_matrix(Coupling(scaled))));
  }
}

TEST_CASE("euclidean centroid update under identity coupling") {
  Matrix pts(2, 1);
  pts << 0, 10;
  const Matrix id = Matrix::Identity(2, 2);
  const Matrix c = update_centroids_euclidean(pts, Coupling(id), id);
  CHECK(c(0, 0) == doctest::Approx(0.0));
  CHECK(c(1, 0) == doctest::Approx(10.0));
}

TEST_CASE("euclidean centroid update on a hard-balanced plan") {
  Matrix pts(4, 1);
  pts << 0, 0, 10, 10;
  Matrix plan(4, 2);
  plan << 1, 0, 1, 0, 0, 1, 0, 1;
  const Matrix c = update_centroids_euclidean(pts, Coupling(plan), reweight_matrix(Coupling(plan)));
  CHECK(c(0, 0) == doctest::Approx(0.0));
  CHECK(c(1, 0) == doctest::Approx(10.0));
}

TEST_CASE("disabling the mask drags centroids toward other clusters") {
  Matrix pts(4, 1);
  pts << 0, 0, 10, 10;
  Matrix plan(4, 2);
  plan << 0.8, 0.2, 0.8, 0.2, 0.2, 0.8, 0.2, 0.8;
  const Matrix masked =
      update_centroids_euclidean(pts, Coupling(plan), reweight_matrix(Coupling(plan)));
  const Matrix unmasked =
      update_centroids_euclidean(pts, Coupling(plan), Matrix::Ones(4, 2));
  CHECK(masked(0, 0) == doctest::Approx(0.0));
  CHECK(masked(1, 0) == doctest::Approx(10.0));
  CHECK(unmasked(0, 0) > 1.0);   // biased toward the far pair
  CHECK(unmasked(1, 0) < 9.0);
}

TEST_CASE("masked update with uniform within-cluster weights is the k-means mean") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix pts = Matrix::NullaryExpr(8, 2, [&] { return unit(rng); });
  Matrix plan = Matrix::Zero(8, 2);
  for (Index i = 0; i < 8; ++i) plan(i, i % 2) = 0.25;  // uniform per cluster
  const Matrix r = reweight_matrix(Coupling(plan));
  const Matrix c = update_centroids_euclidean(pts, Coupling(plan), r);
  for (int t = 0; t < 2; ++t) {
    Vector mean = Vector::Zero(2);
    for (Index i = t; i < 8; i += 2) mean += pts.row(i).transpose();
    mean /= 4.0;
    CHECK((c.row(t).transpose() - mean).norm() < 1e-12);
  }
}

TEST_CASE("wasserstein barycenter of mirrored histograms is symmetric") {
  const CostMatrix cost(mat2(0, 1, 1, 0));
  Matrix members(2, 2);
  members << 1, 0, 0, 1;
  const Vector bary =
      wasserstein_barycenter(cost, members, Vector::Constant(2, 0.5), 0.1, 500);
  CHECK(bary[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(bary.sum() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("single-member barycenter approaches the member as epsilon shrinks") {
  const CostMatrix cost = grid_cost_matrix(1, 3, 2.0);
  Matrix members(1, 3);
  members << 0.6, 0.3, 0.1;
  const Vector blurred = wasserstein_barycenter(cost, members, Vector::Ones(1), 0.5, 500);
  const Vector sharp = wasserstein_barycenter(cost, members, Vector::Ones(1), 0.005, 500);
  CHECK((sharp - members.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((blurred - members.row(0).transpose()).cwiseAbs().maxCoeff() >
        (sharp - members.row(0).transpose()).cwiseAbs().maxCoeff());
}

TEST_CASE("zero-weight members do not influence the barycenter") {
  const CostMatrix cost = grid_cost_matrix(1, 2, 2.0);
  Matrix members(2, 2);
  members << 0.9, 0.1, 0.1, 0.9;
  Vector w(2);
  w << 1.0, 0.0;
  const Vector bary = wasserstein_barycenter(cost, members, w, 0.05, 500);
  const Vector solo = wasserstein_barycenter(cost, members.topRows(1), Vector::Ones(1), 0.05, 500);
  CHECK((bary - solo).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("barycenter rows stay normalized across random inputs") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const CostMatrix cost = grid_cost_matrix(1, 4, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix members(3, 4);
    for (Index s = 0; s < 3; ++s) {
      Vector h(4);
      for (Index b = 0; b < 4; ++b) h[b] = 0.05 + unit(rng);
      members.row(s) = (h / h.sum()).transpose();
    }
    Vector w(3);
    for (Index s = 0; s < 3; ++s) w[s] = unit(rng);
    const Vector bary = wasserstein_barycenter(cost, members, w, 0.2, 300);
    CHECK(bary.sum() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(bary.minCoeff() >= 0.0);
  }
}

TEST_CASE("cluster separates two far pairs perfectly") {
  Matrix pts(4, 2);
  pts << 0, 0, 0.5, 0, 10, 10, 10.5, 10;
  PointDataset data{pts, std::vector<int>{0, 0, 1, 1}};
  ClusterConfig cfg;
  cfg.epsilon = 0.5;
  cfg.seed = 1;
  const auto r = cluster(data, 2, ClusterBounds::uniform(2, 1.0, 3.0), cfg);
  CHECK(purity(r.hard_labels, *data.labels) == doctest::Approx(1.0));
  CHECK(r.per_cluster_mass.sum() == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("cluster is deterministic for a fixed seed") {
  const auto data = sample_gaussian_mixture(circle_centers(3, 6.0), 1.0, {12, 12, 12}, 5);
  ClusterConfig cfg;
  cfg.epsilon = 2.0;
  cfg.seed = 9;
  const auto a = cluster(data, 3, ClusterBounds::uniform(3, 6.0, 18.0), cfg);
  const auto b = cluster(data, 3, ClusterBounds::uniform(3, 6.0, 18.0), cfg);
  CHECK(a.centroids.isApprox(b.centroids));
  CHECK(a.hard_labels == b.hard_labels);
  CHECK(max_abs_diff(a.assignment.plan, b.assignment.plan) == 0.0);
}

TEST_CASE("cluster masses stay inside the declared corridor") {
  const auto data = sample_gaussian_mixture(circle_centers(4, 7.0), 1.4, {20, 20, 20, 20}, 3);
  const auto bounds = ClusterBounds::uniform(4, 15.0, 25.0);
  ClusterConfig cfg;
  cfg.epsilon = 10.0;
  cfg.seed = 4;
  const auto r = cluster(data, 4, bounds, cfg);
  for (int t = 0; t < 4; ++t) {
    CHECK(r.per_cluster_mass[t] >= 15.0 - 1e-6);
    CHECK(r.per_cluster_mass[t] <= 25.0 + 1e-6);
  }
  for (Index i = 0; i < r.reweight.rows(); ++i)
    CHECK(r.reweight.row(i).sum() == doctest::Approx(1.0));
}

TEST_CASE("reweighted five-gaussian run reaches high purity") {
  const auto data = sample_gaussian_mixture(circle_centers(5, 8.0), 1.5, {30, 30, 30, 30, 30}, 0);
  ClusterConfig cfg;
  cfg.epsilon = 60.0;
  cfg.seed = 0;
  const auto r = cluster(data, 5, ClusterBounds::uniform(5, 20.0, 40.0), cfg);
  CHECK(purity(r.hard_labels, *data.labels) >= 0.95);
}

TEST_CASE("wasserstein clustering groups two-bin toy histograms") {
  HistogramDataset data;
  data.support_cost = CostMatrix(mat2(0, 1, 1, 0));
  data.histograms.resize(4, 2);
  data.histograms << 0.9, 0.1, 0.85, 0.15, 0.1, 0.9, 0.15, 0.85;
  ClusterConfig cfg;
  cfg.epsilon = 0.05;
  cfg.epsilon_bary = 0.05;
  cfg.seed = 2;
  const auto r = cluster_histograms(data, 2, ClusterBounds::uniform(2, 1.0, 3.0), cfg);
  CHECK(r.hard_labels[0] == r.hard_labels[1]);
  CHECK(r.hard_labels[2] == r.hard_labels[3]);
  CHECK(r.hard_labels[0] != r.hard_labels[2]);
  for (Index t = 0; t < 2; ++t)
    CHECK(r.centroids.row(t).sum() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("purity basics") {
  CHECK(purity({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(purity({0, 0, 0, 0}, {0, 0, 1, 1}) == doctest::Approx(0.5));
  CHECK(purity({2, 2, 0, 0, 1, 1}, {0, 0, 1, 1, 2, 2}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(purity({0, 1}, {0}), DbotError);
}

TEST_CASE("barycenter of identical members is the single-member barycenter") {
  const CostMatrix cost = grid_cost_matrix(1, 3, 2.0);
  Matrix members(2, 3);
  members << 0.5, 0.3, 0.2, 0.5, 0.3, 0.2;
  Vector w(2);
  w << 0.3, 0.7;
  const Vector both = wasserstein_barycenter(cost, members, w, 0.1, 400);
  const Vector solo = wasserstein_barycenter(cost, members.topRows(1), Vector::Ones(1), 0.1, 400);
  CHECK((both - solo).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("purity handles more classes than clusters") {
  CHECK(purity({0, 0, 0, 0}, {0, 1, 2, 3}) == doctest::Approx(0.25));
  CHECK(purity({0, 1, 0, 1}, {0, 1, 2, 3}) == doctest::Approx(0.5));
}
