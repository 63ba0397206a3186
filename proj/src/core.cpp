#include "dbot/core.hpp"

#include <cmath>
#include <string>

namespace dbot {

namespace {

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace

FeasibilityReport validate_problem(const TransportProblem& p) {
  FeasibilityReport report;
  auto add = [&](ViolationCode code, std::string msg) {
    report.violations.push_back({code, std::move(msg)});
  };

  const Index m = p.rows();
  const Index n = p.cols();

  if (p.source.size() != m) {
    add(ViolationCode::shape_mismatch,
        "shape: source length " + std::to_string(p.source.size()) +
            " != cost rows " + std::to_string(m));
  }
  if (p.bounds.lower.size() != n || p.bounds.upper.size() != n) {
    add(ViolationCode::shape_mismatch,
        "shape: bounds length (" + std::to_string(p.bounds.lower.size()) + ", " +
            std::to_string(p.bounds.upper.size()) + ") != cost cols " + std::to_string(n));
  }
  if (!(p.epsilon > 0.0) || !std::isfinite(p.epsilon)) {
    add(ViolationCode::non_positive_epsilon,
        "epsilon: must be positive and finite, got " + fmt_double(p.epsilon));
  }

  [&] {
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j)
        if (!std::isfinite(p.cost.entries(i, j))) {
          add(ViolationCode::non_finite_cost,
              "cost: non-finite entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
          return;  // one report per matrix is enough
        }
  }();

  for (Index i = 0; i < p.source.size(); ++i) {
    const double ai = p.source[i];
    if (std::isnan(ai) || ai == kUnbounded) {
      add(ViolationCode::non_finite_source,
          "source: non-finite entry at index " + std::to_string(i));
      break;
    }
    if (ai < 0.0) {
      add(ViolationCode::negative_source,
          "source: negative entry at index " + std::to_string(i));
      break;
    }
  }
  if (p.source.size() > 0 && report.violations.empty() && p.source.total() <= 0.0) {
    add(ViolationCode::zero_source_mass, "source: total mass must be positive");
  }

  if (p.bounds.lower.size() == p.bounds.upper.size()) {
    for (Index j = 0; j < p.bounds.lower.size(); ++j) {
      const double lo = p.bounds.lower[j];
      const double up = p.bounds.upper[j];
      if (!std::isfinite(lo)) {
        add(ViolationCode::non_finite_lower_bound,
            "bounds: lower must be finite at index " + std::to_string(j));
        continue;
      }
      if (lo < 0.0) {
        add(ViolationCode::negative_lower_bound,
            "bounds: negative lower entry at index " + std::to_string(j));
      }
      if (std::isnan(up) || up < lo) {
        add(ViolationCode::lower_exceeds_upper,
            "bounds: lower exceeds upper at index " + std::to_string(j));
      }
    }
  }

  // Polytope nonemptiness: sum(lower) <= sum(a) <= sum(upper), with slack
  // for summation rounding so exactly-pinned bounds stay feasible.
  if (report.violations.empty()) {
    const double mass = p.source.total();
    const double lo_total = p.bounds.lower.total();
    const double up_total = p.bounds.upper.total();
    const double slack = 1e-12 * std::max(1.0, std::abs(mass));
    if (lo_total > mass + slack) {
      add(ViolationCode::mass_below_lower,
          "mass: sum(lower) " + fmt_double(lo_total) + " exceeds sum(source) " + fmt_double(mass));
    }
    if (mass > up_total + slack) {
      add(ViolationCode::mass_above_upper,
          "mass: sum(source) " + fmt_double(mass) + " exceeds sum(upper) " + fmt_double(up_total));
    }
  }

  return report;
}

Kernel build_kernel(const CostMatrix& c, double epsilon) {
  if (!(epsilon > 0.0)) throw DbotError("build_kernel: epsilon must be positive");
  const double scale = (c.entries.size() > 0) ? c.entries.cwiseAbs().maxCoeff() / epsilon : 0.0;
  if (scale > 700.0) {
    throw DbotError(
        "build_kernel: |C|/epsilon exceeds exp range (" + fmt_double(scale) +
        " > 700); use log-domain solver");
  }
  Kernel k;
  k.epsilon = epsilon;
  k.entries = (-c.entries / epsilon).array().exp();
  return k;
}

std::pair<Histogram, Histogram> marginals(const Coupling& p) {
  return {Histogram(p.row_sums()), Histogram(p.col_sums())};
}

double transport_cost(const Coupling& p, const CostMatrix& c) {
  if (p.rows() != c.rows() || p.cols() != c.cols())
    throw DbotError("transport_cost: shape mismatch between plan and cost");
  return (p.plan.array() * c.entries.array()).sum();
}

double entropy(const Coupling& p) {
  double h = 0.0;
  for (Index i = 0; i < p.rows(); ++i)
    for (Index j = 0; j < p.cols(); ++j) {
      const double x = p.plan(i, j);
      if (x > 0.0) h -= x * (std::log(x) - 1.0);
    }
  return h;
}

double kl_general(const Coupling& p, const Kernel& k) {
  if (p.rows() != k.entries.rows() || p.cols() != k.entries.cols())
    throw DbotError("kl_general: shape mismatch between plan and kernel");
  double d = 0.0;
  for (Index i = 0; i < p.rows(); ++i)
    for (Index j = 0; j < p.cols(); ++j) {
      const double x = p.plan(i, j);
      const double y = k.entries(i, j);
      d += (x > 0.0 ? x * std::log(x / y) - x : 0.0) + y;
    }
  return d;
}

double entropic_objective(const Coupling& p, const CostMatrix& c, double epsilon) {
  return transport_cost(p, c) - epsilon * entropy(p);
}

CostMatrix grid_cost_matrix(int height, int width, double exponent) {
  if (height < 1 || width < 1) throw DbotError("grid_cost_matrix: grid must be at least 1x1");
  if (!(exponent > 0.0)) throw DbotError("grid_cost_matrix: exponent must be positive");
  const long long cells = static_cast<long long>(height) * width;
  if (cells > 4096) {
    throw DbotError("grid_cost_matrix: " + std::to_string(cells) +
                    " cells exceeds the 4096 dense-grid limit");
  }
  const Index n = static_cast<Index>(cells);
  Matrix c(n, n);
  for (Index p = 0; p < n; ++p) {
    const double r1 = static_cast<double>(p / width);
    const double c1 = static_cast<double>(p % width);
    for (Index q = 0; q < n; ++q) {
      const double dr = r1 - static_cast<double>(q / width);
      const double dc = c1 - static_cast<double>(q % width);
      const double d2 = dr * dr + dc * dc;
      if (exponent == 2.0) {
        c(p, q) = d2;
      } else {
        c(p, q) = std::pow(std::sqrt(d2), exponent);
      }
    }
  }
  return CostMatrix(std::move(c));
}

}  // namespace dbot
