#include "dbot/oracle.hpp"

#include "dbot/core.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace dbot {

namespace {

double plogp_term(double x) { return x > 0.0 ? x * (std::log(x) - 1.0) : 0.0; }

// Grid index helpers with slack for binary representation dust.
Index floor_idx(double x) { return static_cast<Index>(std::floor(x + 1e-6)); }
Index ceil_idx(double x) { return static_cast<Index>(std::ceil(x - 1e-6)); }

}  // namespace

OracleResult oracle_grid_2x2(const TransportProblem& p, double resolution) {
  if (p.rows() != 2 || p.cols() != 2) throw DbotError("oracle_grid_2x2: instance must be 2x2");
  if (!(resolution > 0.0) || resolution > 1e-3)
    throw DbotError("oracle_grid_2x2: resolution must be in (0, 1e-3]");
  FeasibilityReport report = validate_problem(p);
  if (!report.feasible()) throw InfeasibleProblemError(std::move(report));

  const double a1 = p.source[0];
  const double a2 = p.source[1];
  const double eps = p.epsilon;
  const Matrix& c = p.cost.entries;

  const Index n1 = floor_idx(a1 / resolution) + 1;
  const Index n2 = floor_idx(a2 / resolution) + 1;

  // Row i contributes F_i(p_i1) = C_i1 p_i1 + C_i2 (a_i - p_i1)
  // + eps [p log p - p] for both entries; the objective is F_1(p11) + F_2(p21)
  // and only the column bounds couple the two sweeps.
  Vector f1(n1), f2(n2);
  for (Index i = 0; i < n1; ++i) {
    const double x = std::min(static_cast<double>(i) * resolution, a1);
    f1[i] = c(0, 0) * x + c(0, 1) * (a1 - x) + eps * (plogp_term(x) + plogp_term(a1 - x));
  }
  for (Index j = 0; j < n2; ++j) {
    const double y = std::min(static_cast<double>(j) * resolution, a2);
    f2[j] = c(1, 0) * y + c(1, 1) * (a2 - y) + eps * (plogp_term(y) + plogp_term(a2 - y));
  }

  // Column feasibility: col1 = p11 + p21 must satisfy both bounds, i.e.
  // col1 in [max(lo1, total - up2), min(up1, total - lo2)].
  const double total = a1 + a2;
  const double col1_lo = std::max(p.bounds.lower[0], total - p.bounds.upper[1]);
  const double col1_up = std::min(p.bounds.upper[0], total - p.bounds.lower[1]);

  // For each p11 index i the feasible p21 interval [j_lo(i), j_hi(i)] slides
  // left as i grows. Mirroring j -> n2-1-j turns it into a classic rightward
  // sliding window; a monotone deque then gives the window minimum of f2 in
  // O(1) amortized. Ties prefer the smaller original j (larger mirrored index).
  const auto g2 = [&](Index jm) { return f2[n2 - 1 - jm]; };
  std::deque<Index> window;  // mirrored indices, front = window minimum
  Index admitted = -1;       // rightmost mirrored index pushed so far

  double best = std::numeric_limits<double>::infinity();
  Index best_i = -1, best_j = -1;

  for (Index i = 0; i < n1; ++i) {
    const double x = std::min(static_cast<double>(i) * resolution, a1);
    const Index j_lo = std::max<Index>(0, ceil_idx((col1_lo - x) / resolution));
    const Index j_hi = std::min<Index>(n2 - 1, floor_idx((col1_up - x) / resolution));
    if (j_lo > j_hi) continue;
    const Index m_lo = n2 - 1 - j_hi;  // mirrored window [m_lo, m_hi]
    const Index m_hi = n2 - 1 - j_lo;

    for (Index jm = admitted + 1; jm <= m_hi; ++jm) {
      while (!window.empty() && g2(window.back()) >= g2(jm)) window.pop_back();
      window.push_back(jm);
    }
    admitted = std::max(admitted, m_hi);
    while (!window.empty() && window.front() < m_lo) window.pop_front();
    if (window.empty()) continue;

    const Index j_best = n2 - 1 - window.front();
    const double obj = f1[i] + f2[j_best];
    if (obj < best) {
      best = obj;
      best_i = i;
      best_j = j_best;
    }
  }

  if (best_i < 0) throw DbotError("oracle_grid_2x2: empty feasible set");

  const double x = std::min(static_cast<double>(best_i) * resolution, a1);
  const double y = std::min(static_cast<double>(best_j) * resolution, a2);
  Matrix plan(2, 2);
  plan << x, a1 - x, y, a2 - y;

  OracleResult result;
  result.best_coupling = Coupling(std::move(plan));
  result.best_objective = best;
  result.resolution = resolution;
  return result;
}

Coupling closed_form_row_only(const CostMatrix& cost, const Histogram& a, double epsilon) {
  if (cost.rows() != a.size()) throw DbotError("closed_form_row_only: shape mismatch");
  if (!(epsilon > 0.0)) throw DbotError("closed_form_row_only: epsilon must be positive");
  Matrix plan(cost.rows(), cost.cols());
  for (Index i = 0; i < cost.rows(); ++i) {
    // Row softmax of -C/eps scaled to mass a_i, stabilized by the row max.
    const Vector z = -cost.entries.row(i).transpose() / epsilon;
    const double mx = z.maxCoeff();
    const Vector w = (z.array() - mx).exp();
    plan.row(i) = (a[i] / w.sum()) * w.transpose();
  }
  return Coupling(std::move(plan));
}

std::optional<Coupling> feasible_plan_search(const Histogram& a, const Bounds& bounds) {
  const Index m = a.size();
  const Index n = bounds.size();
  Matrix plan = Matrix::Zero(m, n);
  Vector remaining = a.weights;  // per-row mass still to place
  Index row = 0;

  auto pour_into_column = [&](Index j, double amount) -> double {
    double poured = 0.0;
    while (amount > 1e-15 && row < m) {
      const double take = std::min(amount, remaining[row]);
      plan(row, j) += take;
      remaining[row] -= take;
      poured += take;
      amount -= take;
      if (remaining[row] <= 1e-15) ++row;
    }
    return poured;
  };

  // Phase 1: satisfy every lower bound.
  for (Index j = 0; j < n; ++j) {
    const double need = bounds.lower[j];
    if (pour_into_column(j, need) < need - 1e-12) return std::nullopt;
  }
  // Phase 2: spill leftover mass into upper-bound slack.
  for (Index j = 0; j < n && row < m; ++j) {
    const double slack = bounds.upper[j] - bounds.lower[j];
    if (slack > 0.0) pour_into_column(j, slack);
  }
  if (row < m && remaining.tail(m - row).sum() > 1e-12) return std::nullopt;
  return Coupling(std::move(plan));
}

PartitionResult oracle_partition_clustering(
    const Matrix& points, int k, const std::vector<std::pair<int, int>>& size_bounds) {
  const Index s = points.rows();
  if (s > 10) throw DbotError("oracle_partition_clustering: at most 10 points");
  if (k < 1 || k > 3) throw DbotError("oracle_partition_clustering: k must be in [1, 3]");
  if (static_cast<int>(size_bounds.size()) != k)
    throw DbotError("oracle_partition_clustering: one size bound per cluster required");

  std::vector<int> assignment(static_cast<size_t>(s), 0);
  PartitionResult best;
  best.cost = std::numeric_limits<double>::infinity();

  const Index d = points.cols();
  std::vector<int> counts(static_cast<size_t>(k));
  Matrix sums(k, d);

  bool done = false;
  while (!done) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int t : assignment) ++counts[static_cast<size_t>(t)];
    bool sizes_ok = true;
    for (int t = 0; t < k && sizes_ok; ++t) {
      sizes_ok = counts[static_cast<size_t>(t)] >= size_bounds[static_cast<size_t>(t)].first &&
                 counts[static_cast<size_t>(t)] <= size_bounds[static_cast<size_t>(t)].second;
    }
    if (sizes_ok) {
      sums.setZero();
      for (Index i = 0; i < s; ++i) sums.row(assignment[static_cast<size_t>(i)]) += points.row(i);
      double cost = 0.0;
      for (Index i = 0; i < s; ++i) {
        const int t = assignment[static_cast<size_t>(i)];
        const auto mean = sums.row(t) / static_cast<double>(counts[static_cast<size_t>(t)]);
        cost += (points.row(i) - mean).squaredNorm();
      }
      if (cost < best.cost) {
        best.cost = cost;
        best.assignment = assignment;
      }
    }
    // Advance to the next assignment in base-k counting order.
    Index pos = s;
    done = true;
    while (pos > 0) {
      --pos;
      if (++assignment[static_cast<size_t>(pos)] < k) {
        done = false;
        break;
      }
      assignment[static_cast<size_t>(pos)] = 0;
    }
  }

  if (best.assignment.empty())
    throw DbotError("oracle_partition_clustering: no partition satisfies the size bounds");
  return best;
}

}  // namespace dbot
