#pragma once

#include "dbot/types.hpp"

#include <utility>

namespace dbot {

/// Structural and feasibility checks for a problem instance. Report-style:
/// an empty violation list means the constraint polytope is nonempty
/// (sum(lower) <= sum(a) <= sum(upper) with elementwise lower <= upper).
FeasibilityReport validate_problem(const TransportProblem& p);

/// K_ij = exp(-C_ij / epsilon). Rejects |C_ij| / epsilon > 700: beyond that
/// the entries overflow or flush to zero and the scaling algorithms must run
/// in the log domain instead.
Kernel build_kernel(const CostMatrix& c, double epsilon);

/// (row sums, column sums) of a plan.
std::pair<Histogram, Histogram> marginals(const Coupling& p);

/// <C, P> Frobenius inner product.
double transport_cost(const Coupling& p, const CostMatrix& c);

/// H(P) = -<P, log P - 1> with 0 log 0 = 0.
double entropy(const Coupling& p);

/// Generalized KL divergence sum_ij P log(P/K) - P + K with 0 log 0 = 0.
/// Nonnegative, zero iff P == K.
double kl_general(const Coupling& p, const Kernel& k);

/// <C, P> - epsilon * H(P), the entropic transport objective.
double entropic_objective(const Coupling& p, const CostMatrix& c, double epsilon);

/// Cost between all pixel pairs of an H x W grid at unit spacing,
/// (Euclidean distance)^exponent, pixels enumerated row-major.
CostMatrix grid_cost_matrix(int height, int width, double exponent);

}  // namespace dbot
