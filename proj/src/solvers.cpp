#include "dbot/solvers.hpp"

#include "dbot/logspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dbot {

namespace {

void reject_if_infeasible(const TransportProblem& p) {
  FeasibilityReport report = validate_problem(p);
  if (!report.feasible()) throw InfeasibleProblemError(std::move(report));
}

struct LoopResult {
  Matrix plan;
  int iterations = 0;
  bool converged = false;
};

/// Iterate `step` until the plan settles: max-abs change between checked
/// cycles below cfg.tolerance with marginal residuals also inside it, or
/// cfg.max_iter cycles.
template <class Step, class PlanOf>
LoopResult run_to_fixed_point(const TransportProblem& p, const SolverConfig& cfg,
                              Step step, PlanOf plan_of) {
  LoopResult r;
  Matrix prev = plan_of();
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    step();
    r.iterations = iter;
    if (iter % cfg.check_every == 0 || iter == cfg.max_iter) {
      Matrix cur = plan_of();
      const double diff = (cur - prev).cwiseAbs().maxCoeff();
      prev.swap(cur);
      if (diff < cfg.tolerance) {
        const Coupling probe(prev);
        if (probe.row_residual(p.source) <= cfg.tolerance &&
            probe.col_violation(p.bounds) <= cfg.tolerance) {
          r.converged = true;
          break;
        }
      }
    }
  }
  r.plan = std::move(prev);
  return r;
}

Solution finish(Matrix plan, const TransportProblem& p, const LoopResult& loop) {
  Solution s;
  s.coupling = Coupling(std::move(plan));
  s.iterations = loop.iterations;
  s.converged = loop.converged;
  s.row_residual = s.coupling.row_residual(p.source);
  s.col_violation = s.coupling.col_violation(p.bounds);
  s.objective = entropic_objective(s.coupling, p.cost, p.epsilon);
  return s;
}

// --- linear-domain projection steps -------------------------------------

void project_rows_inplace(Matrix& plan, const Histogram& a) {
  for (Index i = 0; i < plan.rows(); ++i) {
    const double rs = plan.row(i).sum();
    const double ai = a[i];
    if (ai == 0.0) {
      plan.row(i).setZero();
    } else if (rs <= 0.0) {
      throw DegenerateKernelError("row " + std::to_string(i) +
                                  " has zero sum but positive target mass");
    } else {
      plan.row(i) *= ai / rs;
    }
  }
}

void project_lower_inplace(Matrix& plan, const Histogram& lower) {
  for (Index j = 0; j < plan.cols(); ++j) {
    const double lo = lower[j];
    if (lo == 0.0) continue;  // max with 1 never binds
    const double cs = plan.col(j).sum();
    if (cs <= 0.0) {
      throw DegenerateKernelError("column " + std::to_string(j) +
                                  " has zero sum but positive lower bound");
    }
    const double factor = std::max(lo / cs, 1.0);
    if (factor != 1.0) plan.col(j) *= factor;
  }
}

void project_upper_inplace(Matrix& plan, const Histogram& upper) {
  for (Index j = 0; j < plan.cols(); ++j) {
    const double up = upper[j];
    if (!std::isfinite(up)) continue;
    const double cs = plan.col(j).sum();
    if (cs <= 0.0) continue;  // already at or below any bound
    const double factor = std::min(up / cs, 1.0);
    if (factor != 1.0) plan.col(j) *= factor;
  }
}

// --- log-domain projection steps -----------------------------------------

void log_project_rows(Matrix& lp, const Histogram& a) {
  const Vector lse = lse_rows(lp);
  for (Index i = 0; i < lp.rows(); ++i) {
    const double ai = a[i];
    if (ai == 0.0) {
      lp.row(i).setConstant(kNegInf);
    } else if (lse[i] == kNegInf) {
      throw DegenerateKernelError("row " + std::to_string(i) +
                                  " underflowed with positive target mass");
    } else {
      lp.row(i).array() += std::log(ai) - lse[i];
    }
  }
}

// --- scaling-state helpers ------------------------------------------------

Matrix plan_from_scalings(const Matrix& kernel, const Vector& u, const Vector& qv) {
  return u.asDiagonal() * kernel * qv.asDiagonal();
}

Matrix plan_from_log_scalings(const Matrix& log_kernel, const Vector& lu,
                              const Vector& lqv) {
  Matrix lp = log_kernel;
  lp.colwise() += lu;
  lp.rowwise() += lqv.transpose();
  return lp.array().exp();
}

struct LinearScaling {
  const TransportProblem& p;
  Matrix kernel;
  Vector u, q, v;

  explicit LinearScaling(const TransportProblem& prob)
      : p(prob),
        kernel(build_kernel(prob.cost, prob.epsilon).entries),
        u(Vector::Ones(prob.rows())),
        q(Vector::Ones(prob.cols())),
        v(Vector::Ones(prob.cols())) {}

  void step() {
    const Vector denom = kernel * (q.cwiseProduct(v));
    for (Index i = 0; i < u.size(); ++i) {
      const double ai = p.source[i];
      if (ai == 0.0) {
        u[i] = 0.0;
      } else if (denom[i] <= 0.0) {
        throw DegenerateKernelError("scaling denominator vanished at row " +
                                    std::to_string(i));
      } else {
        u[i] = ai / denom[i];
      }
    }
    const Vector t = kernel.transpose() * u;
    for (Index j = 0; j < q.size(); ++j) {
      const double lo = p.bounds.lower[j];
      if (lo == 0.0) {
        q[j] = 1.0;
        continue;
      }
      const double d = t[j] * v[j];
      if (d <= 0.0) {
        throw DegenerateKernelError("scaling denominator vanished at column " +
                                    std::to_string(j));
      }
      q[j] = std::max(lo / d, 1.0);
    }
    for (Index j = 0; j < v.size(); ++j) {
      const double up = p.bounds.upper[j];
      if (!std::isfinite(up)) {
        v[j] = 1.0;
        continue;
      }
      if (up == 0.0) {
        v[j] = 0.0;
        continue;
      }
      const double d = t[j] * q[j];
      v[j] = d > 0.0 ? std::min(up / d, 1.0) : 1.0;
    }
  }

  Matrix plan() const { return plan_from_scalings(kernel, u, q.cwiseProduct(v)); }
};

/// Same recursion in natural-log scaling space (lu, lq, lv) = log(u, q, v).
struct LogScaling {
  const TransportProblem& p;
  Matrix log_kernel;
  Vector lu, lq, lv;

  explicit LogScaling(const TransportProblem& prob)
      : p(prob),
        log_kernel(-prob.cost.entries / prob.epsilon),
        lu(Vector::Zero(prob.rows())),
        lq(Vector::Zero(prob.cols())),
        lv(Vector::Zero(prob.cols())) {}

  void step() {
    Matrix shifted = log_kernel;
    shifted.rowwise() += (lq + lv).transpose();
    const Vector row_lse = lse_rows(shifted);
    for (Index i = 0; i < lu.size(); ++i) {
      const double ai = p.source[i];
      if (ai == 0.0) {
        lu[i] = kNegInf;
      } else if (row_lse[i] == kNegInf) {
        throw DegenerateKernelError("scaling denominator underflowed at row " +
                                    std::to_string(i));
      } else {
        lu[i] = std::log(ai) - row_lse[i];
      }
    }
    Matrix shifted_t = log_kernel;
    shifted_t.colwise() += lu;
    const Vector t = lse_cols(shifted_t);  // log(K^T u)
    for (Index j = 0; j < lq.size(); ++j) {
      const double lo = p.bounds.lower[j];
      if (lo == 0.0) {
        lq[j] = 0.0;
        continue;
      }
      if (t[j] == kNegInf) {
        throw DegenerateKernelError("scaling denominator underflowed at column " +
                                    std::to_string(j));
      }
      lq[j] = std::max(std::log(lo) - t[j] - lv[j], 0.0);
    }
    for (Index j = 0; j < lv.size(); ++j) {
      const double up = p.bounds.upper[j];
      if (!std::isfinite(up)) {
        lv[j] = 0.0;
        continue;
      }
      if (up == 0.0) {
        lv[j] = kNegInf;
        continue;
      }
      lv[j] = t[j] == kNegInf ? 0.0 : std::min(std::log(up) - t[j] - lq[j], 0.0);
    }
  }

  Matrix plan() const { return plan_from_log_scalings(log_kernel, lu, lq + lv); }
};

/// Block-coordinate ascent in cost-unit potentials (f, g, h):
/// f = eps log a - eps log(K e^{(g+h)/eps}), with clamped g >= 0, h <= 0.
struct DualAscent {
  const TransportProblem& p;
  Matrix neg_cost;  // -C
  Vector f, g, h;

  explicit DualAscent(const TransportProblem& prob)
      : p(prob),
        neg_cost(-prob.cost.entries),
        f(Vector::Zero(prob.rows())),
        g(Vector::Zero(prob.cols())),
        h(Vector::Zero(prob.cols())) {}

  void step() {
    const double eps = p.epsilon;
    Matrix scaled = neg_cost;
    scaled.rowwise() += (g + h).transpose();
    scaled /= eps;
    const Vector row_lse = lse_rows(scaled);
    for (Index i = 0; i < f.size(); ++i) {
      const double ai = p.source[i];
      if (ai == 0.0) {
        f[i] = kNegInf;
      } else if (row_lse[i] == kNegInf) {
        throw DegenerateKernelError("dual row update underflowed at row " +
                                    std::to_string(i));
      } else {
        f[i] = eps * std::log(ai) - eps * row_lse[i];
      }
    }
    Matrix scaled_t = neg_cost;
    scaled_t.colwise() += f;
    scaled_t /= eps;
    const Vector tau = lse_cols(scaled_t);  // log(K^T e^{f/eps})
    for (Index j = 0; j < g.size(); ++j) {
      const double lo = p.bounds.lower[j];
      if (lo == 0.0) {
        g[j] = 0.0;  // log 0 never formed
        continue;
      }
      if (tau[j] == kNegInf) {
        throw DegenerateKernelError("dual column update underflowed at column " +
                                    std::to_string(j));
      }
      g[j] = std::max(eps * std::log(lo) - eps * tau[j] - h[j], 0.0);
    }
    for (Index j = 0; j < h.size(); ++j) {
      const double up = p.bounds.upper[j];
      if (!std::isfinite(up)) {
        h[j] = 0.0;
        continue;
      }
      if (up == 0.0) {
        h[j] = kNegInf;
        continue;
      }
      h[j] = tau[j] == kNegInf ? 0.0
                               : std::min(eps * std::log(up) - eps * tau[j] - g[j], 0.0);
    }
  }

  Matrix plan() const {
    const double eps = p.epsilon;
    Matrix lp = neg_cost;
    lp.colwise() += f;
    lp.rowwise() += (g + h).transpose();
    return (lp / eps).array().exp();
  }
};

template <class T>
std::optional<ScalingState> finite_scaling_state(const T& lu, const T& lq, const T& lv) {
  ScalingState st{lu.array().exp(), lq.array().exp(), lv.array().exp()};
  if (!st.u.allFinite() || !st.q.allFinite() || !st.v.allFinite()) return std::nullopt;
  return st;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::bregman: return "bregman";
    case Variant::sinkhorn_knopp: return "sinkhorn_knopp";
    case Variant::dual: return "dual";
    case Variant::vanilla: return "vanilla";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "bregman") return Variant::bregman;
  if (name == "sinkhorn_knopp" || name == "sinkhorn-knopp" || name == "sk")
    return Variant::sinkhorn_knopp;
  if (name == "dual") return Variant::dual;
  if (name == "vanilla") return Variant::vanilla;
  throw DbotError("unknown solver variant '" + name + "'");
}

void SolverConfig::validate() const {
  if (max_iter < 1) throw DbotError("solver config: max_iter must be >= 1");
  if (!(tolerance > 0.0)) throw DbotError("solver config: tolerance must be positive");
  if (check_every < 1) throw DbotError("solver config: check_every must be >= 1");
}

Coupling kl_project_rows(const Coupling& p, const Histogram& a) {
  if (p.rows() != a.size()) throw DbotError("kl_project_rows: shape mismatch");
  Matrix plan = p.plan;
  project_rows_inplace(plan, a);
  return Coupling(std::move(plan));
}

Coupling kl_project_lower(const Coupling& p, const Histogram& lower) {
  if (p.cols() != lower.size()) throw DbotError("kl_project_lower: shape mismatch");
  Matrix plan = p.plan;
  project_lower_inplace(plan, lower);
  return Coupling(std::move(plan));
}

Coupling kl_project_upper(const Coupling& p, const Histogram& upper) {
  if (p.cols() != upper.size()) throw DbotError("kl_project_upper: shape mismatch");
  Matrix plan = p.plan;
  project_upper_inplace(plan, upper);
  return Coupling(std::move(plan));
}

bool wants_log_domain(const TransportProblem& p, const SolverConfig& cfg) {
  if (cfg.log_domain) return true;
  if (p.epsilon < 1e-2) return true;
  const double scale =
      p.cost.entries.size() > 0 ? p.cost.entries.cwiseAbs().maxCoeff() / p.epsilon : 0.0;
  return scale > 700.0;
}

// The row block is affine, so its KL projection needs no memory. The two
// column blocks are inequalities: a plain projection cycle leaves a stale
// scaling behind once a bound stops binding (the iterate goes feasible but
// misses the KL optimum), so each carries a Dykstra correction that replays
// the previously applied factor before re-projecting.
Solution solve_bregman(const TransportProblem& p, const SolverConfig& cfg) {
  cfg.validate();
  reject_if_infeasible(p);
  const Index n = p.cols();

  if (wants_log_domain(p, cfg)) {
    Matrix lp = -p.cost.entries / p.epsilon;
    Vector lg_lower = Vector::Zero(n);  // log corrections
    Vector lg_upper = Vector::Zero(n);
    auto loop = run_to_fixed_point(
        p, cfg,
        [&] {
          log_project_rows(lp, p.source);

          lp.rowwise() += lg_lower.transpose();
          Vector lse = lse_cols(lp);
          for (Index j = 0; j < n; ++j) {
            const double lo = p.bounds.lower[j];
            double delta = 0.0;
            if (lo > 0.0) {
              if (lse[j] == kNegInf)
                throw DegenerateKernelError("column " + std::to_string(j) +
                                            " underflowed with positive lower bound");
              delta = std::max(std::log(lo) - lse[j], 0.0);
            }
            if (delta != 0.0) lp.col(j).array() += delta;
            lg_lower[j] = -delta;
          }

          lp.rowwise() += lg_upper.transpose();
          lse = lse_cols(lp);
          for (Index j = 0; j < n; ++j) {
            const double up = p.bounds.upper[j];
            double delta = 0.0;
            if (std::isfinite(up) && lse[j] != kNegInf)
              delta = std::min(safe_log(up) - lse[j], 0.0);
            if (delta != 0.0) lp.col(j).array() += delta;
            lg_upper[j] = -delta;
          }
        },
        [&] { return Matrix(lp.array().exp()); });
    return finish(std::move(loop.plan), p, loop);
  }

  Matrix plan = build_kernel(p.cost, p.epsilon).entries;
  Vector corr_lower = Vector::Ones(n);
  Vector corr_upper = Vector::Ones(n);
  auto loop = run_to_fixed_point(
      p, cfg,
      [&] {
        project_rows_inplace(plan, p.source);

        for (Index j = 0; j < n; ++j) {
          const double lo = p.bounds.lower[j];
          const double cs = plan.col(j).sum() * corr_lower[j];
          double factor = 1.0;
          if (lo > 0.0) {
            if (cs <= 0.0)
              throw DegenerateKernelError("column " + std::to_string(j) +
                                          " has zero sum but positive lower bound");
            factor = std::max(lo / cs, 1.0);
          }
          const double applied = corr_lower[j] * factor;
          if (applied != 1.0) plan.col(j) *= applied;
          corr_lower[j] = 1.0 / factor;
        }

        for (Index j = 0; j < n; ++j) {
          const double up = p.bounds.upper[j];
          const double cs = plan.col(j).sum() * corr_upper[j];
          double factor = 1.0;
          if (std::isfinite(up) && cs > 0.0) factor = std::min(up / cs, 1.0);
          const double applied = corr_upper[j] * factor;
          if (applied != 1.0) plan.col(j) *= applied;
          corr_upper[j] = 1.0 / factor;
        }
      },
      [&] { return plan; });
  return finish(std::move(loop.plan), p, loop);
}

Solution solve_sinkhorn_knopp(const TransportProblem& p, const SolverConfig& cfg) {
  cfg.validate();
  reject_if_infeasible(p);
  if (wants_log_domain(p, cfg)) {
    LogScaling state(p);
    auto loop = run_to_fixed_point(p, cfg, [&] { state.step(); }, [&] { return state.plan(); });
    Solution s = finish(std::move(loop.plan), p, loop);
    s.scaling = finite_scaling_state(state.lu, state.lq, state.lv);
    return s;
  }
  LinearScaling state(p);
  auto loop = run_to_fixed_point(p, cfg, [&] { state.step(); }, [&] { return state.plan(); });
  Solution s = finish(std::move(loop.plan), p, loop);
  s.scaling = ScalingState{state.u, state.q, state.v};
  return s;
}

Solution solve_dual(const TransportProblem& p, const SolverConfig& cfg) {
  cfg.validate();
  reject_if_infeasible(p);
  DualAscent state(p);
  auto loop = run_to_fixed_point(p, cfg, [&] { state.step(); }, [&] { return state.plan(); });
  Solution s = finish(std::move(loop.plan), p, loop);
  s.dual = DualState{state.f, state.g, state.h};
  return s;
}

Solution solve_vanilla_sinkhorn(const CostMatrix& cost, const Histogram& a,
                                const Histogram& b, double epsilon,
                                const SolverConfig& cfg) {
  cfg.validate();
  TransportProblem p{cost, a, Bounds::exactly(b), epsilon};
  reject_if_infeasible(p);
  if (std::abs(a.total() - b.total()) > 1e-9) {
    throw DbotError("vanilla sinkhorn: sum(a) and sum(b) must match within 1e-9");
  }

  if (wants_log_domain(p, cfg)) {
    const Matrix log_kernel = -cost.entries / epsilon;
    Vector lu = Vector::Zero(a.size());
    Vector lv = Vector::Zero(b.size());
    auto loop = run_to_fixed_point(
        p, cfg,
        [&] {
          Matrix shifted = log_kernel;
          shifted.rowwise() += lv.transpose();
          const Vector row_lse = lse_rows(shifted);
          for (Index i = 0; i < lu.size(); ++i) {
            if (a[i] == 0.0) {
              lu[i] = kNegInf;
            } else if (row_lse[i] == kNegInf) {
              throw DegenerateKernelError("vanilla row update underflowed");
            } else {
              lu[i] = std::log(a[i]) - row_lse[i];
            }
          }
          Matrix shifted_t = log_kernel;
          shifted_t.colwise() += lu;
          const Vector col_lse = lse_cols(shifted_t);
          for (Index j = 0; j < lv.size(); ++j) {
            if (b[j] == 0.0) {
              lv[j] = kNegInf;
            } else if (col_lse[j] == kNegInf) {
              throw DegenerateKernelError("vanilla column update underflowed");
            } else {
              lv[j] = std::log(b[j]) - col_lse[j];
            }
          }
        },
        [&] { return plan_from_log_scalings(log_kernel, lu, lv); });
    return finish(std::move(loop.plan), p, loop);
  }

  const Matrix kernel = build_kernel(cost, epsilon).entries;
  Vector u = Vector::Ones(a.size());
  Vector v = Vector::Ones(b.size());
  auto loop = run_to_fixed_point(
      p, cfg,
      [&] {
        const Vector du = kernel * v;
        for (Index i = 0; i < u.size(); ++i) {
          if (a[i] == 0.0) {
            u[i] = 0.0;
          } else if (du[i] <= 0.0) {
            throw DegenerateKernelError("vanilla row denominator vanished");
          } else {
            u[i] = a[i] / du[i];
          }
        }
        const Vector dv = kernel.transpose() * u;
        for (Index j = 0; j < v.size(); ++j) {
          if (b[j] == 0.0) {
            v[j] = 0.0;
          } else if (dv[j] <= 0.0) {
            throw DegenerateKernelError("vanilla column denominator vanished");
          } else {
            v[j] = b[j] / dv[j];
          }
        }
      },
      [&] { return plan_from_scalings(kernel, u, v); });
  return finish(std::move(loop.plan), p, loop);
}

Solution solve(const TransportProblem& p, const SolverConfig& cfg) {
  switch (cfg.variant) {
    case Variant::bregman:
      return solve_bregman(p, cfg);
    case Variant::sinkhorn_knopp:
      return solve_sinkhorn_knopp(p, cfg);
    case Variant::dual:
      return solve_dual(p, cfg);
    case Variant::vanilla: {
      const double gap =
          (p.bounds.upper.weights - p.bounds.lower.weights).cwiseAbs().maxCoeff();
      if (!(gap <= 1e-12)) {
        throw DbotError("vanilla variant requires lower == upper bounds");
      }
      return solve_vanilla_sinkhorn(p.cost, p.source, p.bounds.lower, p.epsilon, cfg);
    }
  }
  throw DbotError("unknown solver variant");
}

std::vector<ScalingState> sinkhorn_knopp_trace(const TransportProblem& p, int iters) {
  reject_if_infeasible(p);
  LinearScaling state(p);
  std::vector<ScalingState> trace;
  trace.reserve(static_cast<size_t>(iters));
  for (int l = 0; l < iters; ++l) {
    state.step();
    trace.push_back(ScalingState{state.u, state.q, state.v});
  }
  return trace;
}

ComparisonReport lockstep_compare(const TransportProblem& p, int iters) {
  reject_if_infeasible(p);
  LinearScaling sk(p);
  DualAscent dual(p);
  const double eps = p.epsilon;

  ComparisonReport report;
  report.iterations = iters;
  auto gap = [](const Vector& potentials, const Vector& scalings, double e) {
    double worst = 0.0;
    for (Index i = 0; i < potentials.size(); ++i) {
      const double lhs = potentials[i];
      const double rhs = e * safe_log(scalings[i]);
      if (lhs == rhs) continue;  // covers matching infinities
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
  };

  for (int l = 0; l < iters; ++l) {
    sk.step();
    dual.step();
    report.max_gap_f = std::max(report.max_gap_f, gap(dual.f, sk.u, eps));
    report.max_gap_g = std::max(report.max_gap_g, gap(dual.g, sk.q, eps));
    report.max_gap_h = std::max(report.max_gap_h, gap(dual.h, sk.v, eps));
  }
  report.final_coupling_divergence = (sk.plan() - dual.plan()).cwiseAbs().maxCoeff();
  return report;
}

}  // namespace dbot
