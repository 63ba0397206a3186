#pragma once

#include "dbot/core.hpp"
#include "dbot/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dbot {

enum class Variant { bregman, sinkhorn_knopp, dual, vanilla };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct SolverConfig {
  Variant variant = Variant::bregman;
  int max_iter = 1000;
  double tolerance = 1e-9;   // max-abs plan change between checked cycles
  bool log_domain = false;   // force potential-space iterations
  int check_every = 1;       // cycles between convergence checks

  void validate() const;
};

/// Scaling triple of the diag(u) K diag(q .* v) solution form: q >= 1 prices
/// the lower bound, v in (0, 1] the upper bound.
struct ScalingState {
  Vector u;  // positive, length m
  Vector q;  // >= 1, length n
  Vector v;  // in (0, 1], length n
};

/// Dual potentials in cost units; (f, g, h) = epsilon * log(u, q, v).
struct DualState {
  Vector f;  // length m
  Vector g;  // >= 0, length n
  Vector h;  // <= 0, length n
};

struct Solution {
  Coupling coupling;
  std::optional<ScalingState> scaling;  // Sinkhorn-Knopp variant
  std::optional<DualState> dual;        // dual variant
  int iterations = 0;
  bool converged = false;
  double row_residual = 0.0;   // |P 1 - a|_inf
  double col_violation = 0.0;  // max distance of column sums outside [lower, upper]
  double objective = 0.0;      // <C, P> - epsilon H(P)
};

/// KL projection onto {P 1 = a}: diag(a / row sums) P.
Coupling kl_project_rows(const Coupling& p, const Histogram& a);

/// KL projection onto {P^T 1 >= lower}: column j scaled by max(lower_j / colsum_j, 1).
Coupling kl_project_lower(const Coupling& p, const Histogram& lower);

/// KL projection onto {P^T 1 <= upper}: column j scaled by min(upper_j / colsum_j, 1).
Coupling kl_project_upper(const Coupling& p, const Histogram& upper);

/// True when the config or the instance scale demands potential-space
/// iterations (epsilon below 1e-2 or |C|/epsilon outside exp range).
bool wants_log_domain(const TransportProblem& p, const SolverConfig& cfg);

/// Cyclic KL projections rows -> lower -> upper starting from the Gibbs kernel.
Solution solve_bregman(const TransportProblem& p, const SolverConfig& cfg);

/// Three-scaling iterations u = a/(K(v.*q)), q = max(lower/((K^T u).*v), 1),
/// v = min(upper/((K^T u).*q), 1) from v = q = 1.
Solution solve_sinkhorn_knopp(const TransportProblem& p, const SolverConfig& cfg);

/// Block-coordinate ascent on the dual potentials (f, g, h) from g = h = 0;
/// runs in the log domain by construction.
Solution solve_dual(const TransportProblem& p, const SolverConfig& cfg);

/// Classic two-scaling Sinkhorn for equality marginals; requires
/// sum(a) == sum(b) within 1e-9. Degeneration oracle for lower == upper.
Solution solve_vanilla_sinkhorn(const CostMatrix& cost, const Histogram& a,
                                const Histogram& b, double epsilon,
                                const SolverConfig& cfg);

/// Dispatch on cfg.variant (vanilla requires lower == upper).
Solution solve(const TransportProblem& p, const SolverConfig& cfg);

/// Per-iteration states of the scaling recursion, for invariant checks.
std::vector<ScalingState> sinkhorn_knopp_trace(const TransportProblem& p, int iters);

/// Sinkhorn-Knopp and dual variants run side by side from matching starts.
/// Gaps are the max over iterations of |f - eps log u|, |g - eps log q|,
/// |h - eps log v|; both schemes realize the same primal-dual fixed point.
struct ComparisonReport {
  double max_gap_f = 0.0;
  double max_gap_g = 0.0;
  double max_gap_h = 0.0;
  double final_coupling_divergence = 0.0;
  int iterations = 0;
};

ComparisonReport lockstep_compare(const TransportProblem& p, int iters);

}  // namespace dbot
