#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Sentinel for an unconstrained upper bound entry.
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

class DbotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scaling denominator collapsed to zero where positive mass is required.
class DegenerateKernelError : public DbotError {
 public:
  using DbotError::DbotError;
};

class ParseError : public DbotError {
 public:
  using DbotError::DbotError;
};

/// Nonnegative mass vector. Not required to sum to 1: clustering assigns
/// unit mass per sample and bounds live in the same units.
struct Histogram {
  Vector weights;

  Histogram() = default;
  explicit Histogram(Vector w) : weights(std::move(w)) {}
  Histogram(std::initializer_list<double> w)
      : weights(Eigen::Map<const Vector>(w.begin(), static_cast<Index>(w.size()))) {}

  static Histogram uniform(Index n, double total = 1.0) {
    return Histogram(Vector::Constant(n, total / static_cast<double>(n)));
  }
  static Histogram constant(Index n, double value) {
    return Histogram(Vector::Constant(n, value));
  }

  Index size() const { return weights.size(); }
  double total() const { return weights.sum(); }
  double operator[](Index i) const { return weights[i]; }
};

/// Column-sum corridor [lower, upper]; upper entries may be kUnbounded.
struct Bounds {
  Histogram lower;
  Histogram upper;

  Bounds() = default;
  Bounds(Histogram lo, Histogram up) : lower(std::move(lo)), upper(std::move(up)) {}

  /// Degenerate corridor lower == upper == b (vanilla OT column constraint).
  static Bounds exactly(const Histogram& b) { return Bounds(b, b); }

  Index size() const { return lower.size(); }
};

struct CostMatrix {
  Matrix entries;

  CostMatrix() = default;
  explicit CostMatrix(Matrix c) : entries(std::move(c)) {}

  Index rows() const { return entries.rows(); }
  Index cols() const { return entries.cols(); }
};

/// Gibbs kernel K_ij = exp(-C_ij / epsilon); strictly positive by construction.
struct Kernel {
  Matrix entries;
  double epsilon = 1.0;
};

/// Transport plan. Entries are nonnegative; marginal residuals are measured
/// against the problem data rather than stored.
struct Coupling {
  Matrix plan;

  Coupling() = default;
  explicit Coupling(Matrix p) : plan(std::move(p)) {}

  Index rows() const { return plan.rows(); }
  Index cols() const { return plan.cols(); }

  Vector row_sums() const { return plan.rowwise().sum(); }
  Vector col_sums() const { return plan.colwise().sum().transpose(); }

  /// max_i |sum_j P_ij - a_i|
  double row_residual(const Histogram& a) const {
    return (row_sums() - a.weights).cwiseAbs().maxCoeff();
  }

  /// max_j of the distance by which column j escapes [lower_j, upper_j]; 0 if inside.
  double col_violation(const Bounds& b) const {
    const Vector cols = col_sums();
    double worst = 0.0;
    for (Index j = 0; j < cols.size(); ++j) {
      worst = std::max(worst, b.lower[j] - cols[j]);
      if (std::isfinite(b.upper[j])) worst = std::max(worst, cols[j] - b.upper[j]);
    }
    return std::max(worst, 0.0);
  }
};

struct TransportProblem {
  CostMatrix cost;    // m x n
  Histogram source;   // length m
  Bounds bounds;      // length n
  double epsilon = 1.0;

  Index rows() const { return cost.rows(); }
  Index cols() const { return cost.cols(); }
};

enum class ViolationCode {
  shape_mismatch,
  non_finite_cost,
  negative_source,
  non_finite_source,
  zero_source_mass,
  negative_lower_bound,
  non_finite_lower_bound,
  lower_exceeds_upper,
  mass_below_lower,
  mass_above_upper,
  non_positive_epsilon,
};

struct Violation {
  ViolationCode code;
  std::string message;
};

struct FeasibilityReport {
  std::vector<Violation> violations;

  bool feasible() const { return violations.empty(); }
  bool has(ViolationCode code) const {
    for (const auto& v : violations)
      if (v.code == code) return true;
    return false;
  }
  std::string to_string() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.message;
    }
    return out;
  }
};

class InfeasibleProblemError : public DbotError {
 public:
  explicit InfeasibleProblemError(FeasibilityReport r)
      : DbotError("infeasible problem: " + r.to_string()), report(std::move(r)) {}
  FeasibilityReport report;
};

}  // namespace dbot
