#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dbot/core.hpp"
#include "dbot/oracle.hpp"
#include "dbot/solvers.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace dbot;
using test::mat2;
using test::max_abs_diff;

namespace {

TransportProblem make_problem(Vector a, Vector lower, Vector upper, Matrix cost,
                              double epsilon = 1.0) {
  TransportProblem p;
  p.cost = CostMatrix(std::move(cost));
  p.source = Histogram(std::move(a));
  p.bounds = Bounds{Histogram(std::move(lower)), Histogram(std::move(upper))};
  p.epsilon = epsilon;
  return p;
}

}  // namespace

TEST_CASE("grid oracle recovers the uniform optimum") {
  auto p = make_problem(Vector{{0.5, 0.5}}, Vector{{0.5, 0.5}}, Vector{{0.5, 0.5}},
                        Matrix::Zero(2, 2));
  const OracleResult r = oracle_grid_2x2(p, 1e-4);
  CHECK(max_abs_diff(r.best_coupling.plan, mat2(0.25, 0.25, 0.25, 0.25)) <= 1e-4);
  CHECK(r.best_objective == doctest::Approx(-(std::log(4.0) + 1.0)).epsilon(1e-6));
}

TEST_CASE("grid oracle pins the active-lower instance") {
  auto p = make_problem(Vector{{0.5, 0.5}}, Vector{{0.6, 0.0}}, Vector{{1.0, 1.0}},
                        Matrix::Zero(2, 2));
  const OracleResult r = oracle_grid_2x2(p, 1e-4);
  CHECK(max_abs_diff(r.best_coupling.plan, mat2(0.3, 0.2, 0.3, 0.2)) <= 1e-4);
  const Vector cols = r.best_coupling.col_sums();
  CHECK(cols[0] >= 0.6 - 1e-9);
}

TEST_CASE("grid oracle rejects infeasible bounds and bad shapes") {
  auto p = make_problem(Vector{{0.5, 0.5}}, Vector{{0.8, 0.8}}, Vector{{1.0, 1.0}},
                        Matrix::Zero(2, 2));
  CHECK_THROWS_AS(oracle_grid_2x2(p, 1e-4), InfeasibleProblemError);

  auto p3 = make_problem(Vector{{0.5, 0.5, 0.5}}, Vector::Zero(3), Vector::Ones(3),
                         Matrix::Zero(3, 3));
  CHECK_THROWS_AS(oracle_grid_2x2(p3, 1e-4), DbotError);
  auto ok = make_problem(Vector{{0.5, 0.5}}, Vector{{0.0, 0.0}}, Vector{{1.0, 1.0}},
                         Matrix::Zero(2, 2));
  CHECK_THROWS_AS(oracle_grid_2x2(ok, 0.01), DbotError);  // resolution too coarse
}

TEST_CASE("grid oracle never beats the solver by more than the grid gap") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  while (checked < 8) {
    auto p = test::random_instance(rng);
    if (p.rows() != 2 || p.cols() != 2) continue;
    ++checked;
    SolverConfig cfg;
    cfg.variant = Variant::sinkhorn_knopp;
    cfg.tolerance = 1e-12;
    cfg.max_iter = 200000;
    const Solution s = solve_sinkhorn_knopp(p, cfg);
    REQUIRE(s.converged);
    const OracleResult r = oracle_grid_2x2(p, 1e-4);
    // The solver optimum lower-bounds every feasible grid point, and the grid
    // argmin tracks the optimum to first order in the resolution.
    const double slope =
        4.0 * (p.cost.entries.cwiseAbs().maxCoeff() +
               p.epsilon * (2.0 + std::abs(std::log(r.resolution))));
    CHECK(s.objective <= r.best_objective + 1e-6);
    CHECK(r.best_objective <= s.objective + 1e-6 + slope * r.resolution);
    CHECK(max_abs_diff(s.coupling.plan, r.best_coupling.plan) <= 2e-4);
  }
}

TEST_CASE("closed form matches arithmetic examples") {
  const double ln2 = std::log(2.0);
  const Coupling p =
      closed_form_row_only(CostMatrix(mat2(0, ln2, ln2, 0)), Histogram{0.5, 0.5}, 1.0);
  Matrix expected(2, 2);
  expected << 1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3;
  CHECK(max_abs_diff(p.plan, expected) < 1e-15);

  const Coupling flat =
      closed_form_row_only(CostMatrix(Matrix::Constant(2, 4, 3.7)), Histogram{0.4, 0.6}, 0.5);
  CHECK(flat.plan.row(0).isApproxToConstant(0.1));
  CHECK(flat.plan.row(1).isApproxToConstant(0.15));
}

TEST_CASE("closed form rows sum to the source exactly") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix c = Matrix::NullaryExpr(4, 6, [&] { return unit(rng); });
    Vector a(4);
    for (Index i = 0; i < 4; ++i) a[i] = 0.1 + unit(rng);
    const Coupling p = closed_form_row_only(CostMatrix(c), Histogram(a), 0.3);
    CHECK((p.row_sums() - a).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("closed form equals the bregman solve with free columns") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Index m = 3 + trial % 3;
    const Index n = 2 + trial % 4;
    const Matrix c = Matrix::NullaryExpr(m, n, [&] { return unit(rng); });
    Vector a(m);
    for (Index i = 0; i < m; ++i) a[i] = 0.1 + unit(rng);
    auto p = make_problem(a, Vector::Zero(n), Vector::Constant(n, kUnbounded), c,
                          0.2 + unit(rng));
    SolverConfig cfg;
    cfg.variant = Variant::bregman;
    cfg.tolerance = 1e-12;
    const Solution s = solve_bregman(p, cfg);
    CHECK(max_abs_diff(s.coupling.plan,
                       closed_form_row_only(p.cost, p.source, p.epsilon).plan) <= 1e-9);
  }
}

TEST_CASE("partition oracle separates two far pairs") {
  Matrix pts(4, 1);
  pts << 0, 0, 10, 10;
  const auto r = oracle_partition_clustering(pts, 2, {{1, 3}, {1, 3}});
  CHECK(r.assignment[0] == r.assignment[1]);
  CHECK(r.assignment[2] == r.assignment[3]);
  CHECK(r.assignment[0] != r.assignment[2]);
  CHECK(r.cost == doctest::Approx(0.0));
}

TEST_CASE("partition oracle respects exact balanced sizes") {
  Matrix pts(4, 1);
  pts << 0, 0, 0, 10;
  const auto r = oracle_partition_clustering(pts, 2, {{2, 2}, {2, 2}});
  // Best balanced split groups two zeros together and pairs the third with 10.
  int zero_cluster = r.assignment[0];
  int counts[2] = {0, 0};
  for (int t : r.assignment) ++counts[t];
  CHECK(counts[0] == 2);
  CHECK(counts[1] == 2);
  CHECK(r.assignment[3] != zero_cluster);
  CHECK(r.cost == doctest::Approx(50.0));  // {0,10} has SSE 2*(5^2)
}

TEST_CASE("partition oracle with one cluster returns the global mean cost") {
  Matrix pts(3, 2);
  pts << 0, 0, 2, 0, 4, 0;
  const auto r = oracle_partition_clustering(pts, 1, {{1, 3}});
  CHECK(r.assignment == std::vector<int>{0, 0, 0});
  CHECK(r.cost == doctest::Approx(8.0));
  CHECK_THROWS_AS(oracle_partition_clustering(pts, 2, {{2, 2}, {2, 2}}), DbotError);
}
