#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dbot/core.hpp"
#include "dbot/io.hpp"
#include "dbot/oracle.hpp"
#include "test_util.hpp"

#include <cmath>
#include <fstream>
#include <random>

using namespace dbot;
using test::mat2;

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

TEST_CASE("validate_problem accepts bracketing bounds") {
  auto p = make_problem(Vector{{0.5, 0.5}}, Vector{{0.0, 0.0}}, Vector{{1.0, 1.0}},
                        Matrix::Zero(2, 2));
  CHECK(validate_problem(p).feasible());
}

TEST_CASE("validate_problem flags lower mass excess") {
  auto p = make_problem(Vector{{0.5, 0.5}}, Vector{{0.8, 0.8}}, Vector{{1.0, 1.0}},
                        Matrix::Zero(2, 2));
  const auto report = validate_problem(p);
  CHECK_FALSE(report.feasible());
  CHECK(report.has(ViolationCode::mass_below_lower));
}

TEST_CASE("validate_problem accepts partially bound columns") {
  auto p = make_problem(Vector{{1.0, 1.0}}, Vector{{0.6, 0.0}}, Vector{{1.0, 1.0}},
                        Matrix::Zero(2, 2));
  CHECK(validate_problem(p).feasible());
}

TEST_CASE("validate_problem reports every violated rule") {
  auto p = make_problem(Vector{{0.5, -0.1}}, Vector{{0.8, 0.2}}, Vector{{0.5, 0.1}},
                        Matrix::Zero(2, 2), -1.0);
  const auto report = validate_problem(p);
  CHECK(report.has(ViolationCode::negative_source));
  CHECK(report.has(ViolationCode::lower_exceeds_upper));
  CHECK(report.has(ViolationCode::non_positive_epsilon));
}

TEST_CASE("validate_problem matches the constructive feasibility search") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int feasible_seen = 0, infeasible_seen = 0;
  for (int trial = 0; trial < 400; ++trial) {
    Vector a(3), lower(3), upper(3);
    for (Index i = 0; i < 3; ++i) {
      a[i] = unit(rng);
      lower[i] = 0.7 * unit(rng);
      upper[i] = lower[i] + unit(rng);
    }
    auto p = make_problem(a, lower, upper, Matrix::Zero(3, 3));
    if (a.sum() <= 0.0) continue;
    const bool predicted = validate_problem(p).feasible();
    const auto found = feasible_plan_search(p.source, p.bounds);
    CHECK(predicted == found.has_value());
    if (found) {
      CHECK(found->row_residual(p.source) < 1e-9);
      CHECK(found->col_violation(p.bounds) < 1e-9);
      ++feasible_seen;
    } else {
      ++infeasible_seen;
    }
  }
  CHECK(feasible_seen > 50);
  CHECK(infeasible_seen > 50);
}

TEST_CASE("build_kernel exponentiates elementwise") {
  const Kernel k = build_kernel(CostMatrix(mat2(0, 1, 1, 0)), 1.0);
  CHECK(k.entries(0, 0) == doctest::Approx(1.0));
  CHECK(k.entries(0, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(k.entries(1, 0) == doctest::Approx(std::exp(-1.0)));

  const Kernel ones = build_kernel(CostMatrix(Matrix::Zero(2, 3)), 0.37);
  CHECK(ones.entries.isApprox(Matrix::Ones(2, 3)));

  const double ln2 = std::log(2.0);
  const Kernel halves = build_kernel(CostMatrix(mat2(0, ln2, ln2, 0)), 1.0);
  CHECK(halves.entries(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("build_kernel rejects exp-range overflow") {
  CHECK_THROWS_WITH_AS(build_kernel(CostMatrix(mat2(-800, 0, 0, 0)), 1.0),
                       doctest::Contains("log-domain"), DbotError);
  CHECK_THROWS_AS(build_kernel(CostMatrix(mat2(800, 0, 0, 0)), 1.0), DbotError);
}

TEST_CASE("build_kernel round-trips the cost matrix") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  const Matrix c = Matrix::NullaryExpr(4, 5, [&] { return unit(rng); });
  const Kernel k = build_kernel(CostMatrix(c), 0.7);
  const Matrix back = -0.7 * k.entries.array().log();
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j)
      CHECK(std::abs(back(i, j) - c(i, j)) <= 1e-12 * std::max(1.0, std::abs(c(i, j))));
}

TEST_CASE("marginals sums rows and columns") {
  const auto [rows, cols] = marginals(Coupling(mat2(0.25, 0.25, 0.25, 0.25)));
  CHECK(rows.weights.isApprox(Vector{{0.5, 0.5}}));
  CHECK(cols.weights.isApprox(Vector{{0.5, 0.5}}));

  const auto [r2, c2] = marginals(Coupling(mat2(1, 0, 0, 1)));
  CHECK(r2.weights.isApprox(Vector{{1.0, 1.0}}));
  CHECK(c2.weights.isApprox(Vector{{1.0, 1.0}}));

  const auto [r3, c3] = marginals(Coupling(mat2(0.3, 0.2, 0.3, 0.2)));
  CHECK(r3.weights.isApprox(Vector{{0.5, 0.5}}));
  CHECK(c3.weights.isApprox(Vector{{0.6, 0.4}}));
}

TEST_CASE("marginals conserve total mass") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix plan = Matrix::NullaryExpr(5, 7, [&] { return unit(rng); });
    const auto [rows, cols] = marginals(Coupling(plan));
    CHECK(rows.total() == doctest::Approx(cols.total()).epsilon(1e-12));
  }
}

TEST_CASE("transport_cost is the Frobenius inner product") {
  CHECK(transport_cost(Coupling(mat2(0.25, 0.25, 0.25, 0.25)), CostMatrix(mat2(0, 1, 1, 0))) ==
        doctest::Approx(0.5));
  CHECK(transport_cost(Coupling(mat2(0.7, 0.1, 0.9, 0.3)), CostMatrix(Matrix::Zero(2, 2))) ==
        doctest::Approx(0.0));
  CHECK(transport_cost(Coupling(mat2(1, 0, 0, 1)), CostMatrix(mat2(0, 1, 1, 0))) ==
        doctest::Approx(0.0));
  CHECK_THROWS_AS(transport_cost(Coupling(Matrix::Zero(2, 3)), CostMatrix(Matrix::Zero(2, 2))),
                  DbotError);
}

TEST_CASE("entropy uses the 0 log 0 = 0 convention") {
  CHECK(entropy(Coupling(mat2(0.25, 0.25, 0.25, 0.25))) ==
        doctest::Approx(std::log(4.0) + 1.0));
  CHECK(entropy(Coupling(mat2(0.5, 0.0, 0.25, 0.25))) ==
        doctest::Approx(-0.5 * (std::log(0.5) - 1) - 2 * 0.25 * (std::log(0.25) - 1)));
  CHECK(entropy(Coupling(Matrix::Ones(1, 1))) == doctest::Approx(1.0));
}

TEST_CASE("kl_general examples") {
  Kernel ones{Matrix::Ones(2, 2), 1.0};
  CHECK(kl_general(Coupling(Matrix::Ones(2, 2)), ones) == doctest::Approx(0.0));
  CHECK(kl_general(Coupling(Matrix::Zero(2, 2)), ones) == doctest::Approx(4.0));
  CHECK(kl_general(Coupling(mat2(0.25, 0.25, 0.25, 0.25)), ones) ==
        doctest::Approx(3.0 - std::log(4.0)));
}

TEST_CASE("kl_general is nonnegative and vanishes only at P == K") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.01, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix p = Matrix::NullaryExpr(3, 4, [&] { return unit(rng); });
    const Matrix k = Matrix::NullaryExpr(3, 4, [&] { return unit(rng); });
    const double d = kl_general(Coupling(p), Kernel{k, 1.0});
    CHECK(d >= 0.0);
    if (test::max_abs_diff(p, k) > 1e-3) CHECK(d > 0.0);
    CHECK(kl_general(Coupling(k), Kernel{k, 1.0}) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("grid_cost_matrix geometry") {
  const CostMatrix line = grid_cost_matrix(1, 2, 2.0);
  CHECK(line.entries.isApprox(mat2(0, 1, 1, 0)));

  const CostMatrix square = grid_cost_matrix(2, 2, 1.0);
  CHECK(square.entries(0, 3) == doctest::Approx(std::sqrt(2.0)));
  CHECK(square.entries(0, 1) == doctest::Approx(1.0));
  CHECK(square.entries(2, 2) == doctest::Approx(0.0));

  const CostMatrix line3 = grid_cost_matrix(1, 3, 2.0);
  Matrix expected(3, 3);
  expected << 0, 1, 4, 1, 0, 1, 4, 1, 0;
  CHECK(line3.entries.isApprox(expected));

  CHECK_THROWS_AS(grid_cost_matrix(65, 64, 2.0), DbotError);
}

TEST_CASE("matrix CSV writing round-trips bit-exactly") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(-10.0, 10.0);
  const Matrix m = Matrix::NullaryExpr(4, 3, [&] { return unit(rng); });
  const std::string path = "/tmp/dbot_roundtrip.csv";
  write_matrix_csv(path, m);
  const Matrix back = read_matrix_csv(path);
  CHECK(back.rows() == 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(back(i, j) == m(i, j));
}

TEST_CASE("histogram CSV auto-detects row and column layouts") {
  const std::string row_path = "/tmp/dbot_hist_row.csv";
  const std::string col_path = "/tmp/dbot_hist_col.csv";
  {
    std::ofstream r(row_path);
    r << "0.2,0.3,0.5\n";
    std::ofstream c(col_path);
    c << "0.2\n0.3\n0.5\n";
  }
  CHECK(read_vector_csv(row_path).isApprox(Vector{{0.2, 0.3, 0.5}}));
  CHECK(read_vector_csv(col_path).isApprox(Vector{{0.2, 0.3, 0.5}}));
  CHECK(read_vector_csv(row_path).isApprox(read_vector_csv(col_path)));
}
