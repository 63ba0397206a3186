#pragma once

#include "dbot/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace dbot {

struct OracleResult {
  Coupling best_coupling;
  double best_objective = 0.0;
  double resolution = 0.0;
};

/// Exhaustive minimizer of <C,P> - eps H(P) on 2x2 instances. Rows are pinned
/// to a, leaving free parameters p11 in [0, a1] and p21 in [0, a2]; both are
/// swept at `resolution`, column-bound violators discarded, and the argmin
/// returned (lowest grid index on ties). Direct objective evaluation, no
/// scaling vectors, so agreement with the solvers is evidence.
OracleResult oracle_grid_2x2(const TransportProblem& p, double resolution);

/// Closed-form optimum under row constraints only: P_ij = a_i K_ij / sum_k K_ik.
Coupling closed_form_row_only(const CostMatrix& cost, const Histogram& a, double epsilon);

/// Constructive feasibility search by water-filling: meet every lower bound
/// first, then spill the remaining mass into upper-bound slack. Returns a
/// feasible plan when one exists, independently of the mass-interval test.
std::optional<Coupling> feasible_plan_search(const Histogram& a, const Bounds& bounds);

struct PartitionResult {
  std::vector<int> assignment;  // cluster id per point
  double cost = 0.0;            // within-cluster sum of squared distances to the mean
};

/// Exhaustive k-partition search over <= 10 points, k <= 3, respecting
/// integer per-cluster size bounds. Ties resolve to the first assignment in
/// enumeration order (lexicographic in cluster ids).
PartitionResult oracle_partition_clustering(
    const Matrix& points, int k, const std::vector<std::pair<int, int>>& size_bounds);

}  // namespace dbot
