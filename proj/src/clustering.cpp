#include "dbot/clustering.hpp"

#include "dbot/core.hpp"
#include "dbot/logspace.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace dbot {

namespace {

Matrix ones_like(const Matrix& m) { return Matrix::Ones(m.rows(), m.cols()); }

int row_argmax(const Matrix& m, Index i) {
  int best = 0;
  for (Index j = 1; j < m.cols(); ++j)
    if (m(i, j) > m(i, best)) best = static_cast<int>(j);
  return best;
}

/// Generic D^2 seeding over a distance-to-point callback.
std::vector<Index> kmeanspp_pick(
    Index sample_count, int k, std::uint64_t seed,
    const std::function<Vector(Index)>& distances_to) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Index> chosen;
  chosen.reserve(static_cast<size_t>(k));

  chosen.push_back(static_cast<Index>(unit(rng) * static_cast<double>(sample_count)));
  chosen.back() = std::min(chosen.back(), sample_count - 1);

  Vector closest = distances_to(chosen.back());
  for (int c = 1; c < k; ++c) {
    const double total = closest.sum();
    Index pick = -1;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (Index i = 0; i < sample_count; ++i) {
        acc += closest[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = sample_count - 1;
    } else {
      // All remaining points coincide with chosen centroids; take the first
      // index not yet used.
      for (Index i = 0; i < sample_count && pick < 0; ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
      }
      if (pick < 0) pick = 0;
    }
    chosen.push_back(pick);
    closest = closest.cwiseMin(distances_to(pick));
  }
  return chosen;
}

}  // namespace

void HistogramDataset::validate() const {
  const Index b = support_cost.rows();
  if (support_cost.cols() != b) throw DbotError("histograms: support cost must be square");
  if (histograms.cols() != b)
    throw DbotError("histograms: row width must match the support size");
  for (Index i = 0; i < b; ++i) {
    if (support_cost.entries(i, i) != 0.0)
      throw DbotError("histograms: support cost diagonal must be zero");
    for (Index j = i + 1; j < b; ++j)
      if (std::abs(support_cost.entries(i, j) - support_cost.entries(j, i)) > 1e-12)
        throw DbotError("histograms: support cost must be symmetric");
  }
  for (Index s = 0; s < histograms.rows(); ++s) {
    if (histograms.row(s).minCoeff() < 0.0)
      throw DbotError("histograms: negative weight in row " + std::to_string(s));
    if (std::abs(histograms.row(s).sum() - 1.0) > 1e-9)
      throw DbotError("histograms: row " + std::to_string(s) + " does not sum to 1");
  }
}

ClusterBounds ClusterBounds::uniform(int k, double lo, double up) {
  return ClusterBounds{Vector::Constant(k, lo), Vector::Constant(k, up)};
}

void ClusterBounds::validate(Index sample_count) const {
  if (lower.size() != upper.size()) throw DbotError("cluster bounds: size mismatch");
  for (Index t = 0; t < lower.size(); ++t) {
    if (lower[t] < 0.0) throw DbotError("cluster bounds: negative lower bound");
    if (upper[t] < lower[t]) throw DbotError("cluster bounds: lower exceeds upper");
  }
  const double s = static_cast<double>(sample_count);
  if (lower.sum() > s || (upper.allFinite() && upper.sum() < s))
    throw DbotError("cluster bounds: total mass " + std::to_string(sample_count) +
                    " falls outside [sum lower, sum upper]");
}

Matrix pairwise_sq_euclidean(const Matrix& a, const Matrix& b) {
  Matrix d = -2.0 * a * b.transpose();
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

Matrix init_centroids_kmeanspp(const Matrix& points, int k, std::uint64_t seed) {
  const Index s = points.rows();
  if (k < 1 || static_cast<Index>(k) > s)
    throw DbotError("kmeans++: k must be in [1, sample count]");
  auto dist_to = [&](Index idx) -> Vector {
    return pairwise_sq_euclidean(points, points.row(idx)).col(0);
  };
  const auto chosen = kmeanspp_pick(s, k, seed, dist_to);
  Matrix centroids(k, points.cols());
  for (int c = 0; c < k; ++c) centroids.row(c) = points.row(chosen[static_cast<size_t>(c)]);
  return centroids;
}

Coupling assign(const Matrix& cost, const ClusterBounds& bounds, double epsilon,
                double tolerance, int max_iter) {
  TransportProblem p;
  p.cost = CostMatrix(cost);
  p.source = Histogram::constant(cost.rows(), 1.0);
  p.bounds = Bounds{Histogram(bounds.lower), Histogram(bounds.upper)};
  p.epsilon = epsilon;

  SolverConfig cfg;
  cfg.variant = Variant::sinkhorn_knopp;
  cfg.tolerance = tolerance;
  cfg.max_iter = max_iter;
  return solve_sinkhorn_knopp(p, cfg).coupling;
}

Coupling assign_points(const Matrix& points, const Matrix& centroids,
                       const ClusterBounds& bounds, double epsilon,
                       double tolerance, int max_iter) {
  return assign(pairwise_sq_euclidean(points, centroids), bounds, epsilon, tolerance,
                max_iter);
}

Matrix reweight_matrix(const Coupling& p) {
  Matrix r = Matrix::Zero(p.rows(), p.cols());
  for (Index i = 0; i < p.rows(); ++i) r(i, row_argmax(p.plan, i)) = 1.0;
  return r;
}

Matrix update_centroids_euclidean(const Matrix& points, const Coupling& p, const Matrix& r) {
  if (p.rows() != points.rows() || r.rows() != p.rows() || r.cols() != p.cols())
    throw DbotError("centroid update: shape mismatch");
  const Index k = p.cols();
  Matrix centroids(k, points.cols());
  for (Index t = 0; t < k; ++t) {
    Vector w = p.plan.col(t).cwiseProduct(r.col(t));
    double total = w.sum();
    if (total <= 0.0) {
      w = p.plan.col(t);  // empty argmax column: drop the mask
      total = w.sum();
    }
    if (total <= 0.0) {
      centroids.row(t) = points.colwise().mean();  // dead cluster: global mean
    } else {
      centroids.row(t) = (w.transpose() * points) / total;
    }
  }
  return centroids;
}

Vector wasserstein_barycenter(const CostMatrix& support_cost, const Matrix& members,
                              const Vector& weights, double epsilon, int max_iter,
                              double tolerance) {
  const Index b = support_cost.rows();
  if (members.cols() != b || weights.size() != members.rows())
    throw DbotError("barycenter: shape mismatch");
  if (!(epsilon > 0.0)) throw DbotError("barycenter: epsilon must be positive");

  std::vector<Index> active;
  for (Index s = 0; s < weights.size(); ++s)
    if (weights[s] > 0.0) active.push_back(s);
  if (active.empty()) throw DbotError("barycenter: all weights are zero");
  const double wsum = weights.sum();

  const Matrix log_xi = -support_cost.entries / epsilon;  // symmetric kernel
  Matrix log_u(active.size(), b);  // member scalings
  Matrix log_v = Matrix::Zero(active.size(), b);
  Vector log_h(b), log_p = Vector::Zero(b);
  Vector prev = Vector::Constant(b, 1.0 / static_cast<double>(b));

  for (int it = 0; it < max_iter; ++it) {
    // u_s = h_s / (Xi v_s) for each member, in log space.
    for (size_t s = 0; s < active.size(); ++s) {
      Matrix shifted = log_xi;
      shifted.rowwise() += log_v.row(s);
      const Vector lse = lse_rows(shifted);
      for (Index i = 0; i < b; ++i) {
        const double h = members(active[s], i);
        log_u(s, i) = h > 0.0 ? std::log(h) - lse[i] : kNegInf;
      }
    }
    // Shared marginal: weighted geometric mean of Xi^T u_s.
    log_p.setZero();
    Matrix log_marg(active.size(), b);
    for (size_t s = 0; s < active.size(); ++s) {
      Matrix shifted = log_xi;
      shifted.colwise() += log_u.row(s).transpose();
      log_marg.row(s) = lse_cols(shifted).transpose();
      log_p += (weights[active[s]] / wsum) * log_marg.row(s).transpose();
    }
    for (size_t s = 0; s < active.size(); ++s)
      log_v.row(s) = (log_p - log_marg.row(s).transpose()).transpose();

    const Vector p = log_p.array().exp();
    if ((p - prev).cwiseAbs().maxCoeff() < tolerance) {
      prev = p;
      break;
    }
    prev = p;
  }
  return prev / prev.sum();
}

Matrix update_centroids_wasserstein(const HistogramDataset& data, const Coupling& p,
                                    const Matrix& r, double epsilon_bary, int max_iter) {
  const Index k = p.cols();
  Matrix centroids(k, data.histograms.cols());
  for (Index t = 0; t < k; ++t) {
    Vector w = p.plan.col(t).cwiseProduct(r.col(t));
    if (w.sum() <= 0.0) w = p.plan.col(t);
    if (w.sum() <= 0.0) w = Vector::Ones(p.rows());
    centroids.row(t) =
        wasserstein_barycenter(data.support_cost, data.histograms, w, epsilon_bary, max_iter)
            .transpose();
  }
  return centroids;
}

double entropic_w_distance(const CostMatrix& support_cost, const Vector& a,
                           const Vector& b, double epsilon) {
  SolverConfig cfg;
  cfg.variant = Variant::vanilla;
  Solution s = solve_vanilla_sinkhorn(support_cost, Histogram(a), Histogram(b), epsilon, cfg);
  return transport_cost(s.coupling, support_cost);
}

namespace {

struct LoopState {
  Coupling assignment;
  Matrix mask;
  int iterations = 0;
};

template <class DistanceFn, class UpdateFn>
LoopState alternate(Matrix& centroids, const ClusterBounds& bounds,
                    const ClusterConfig& cfg, DistanceFn distance_matrix, UpdateFn update) {
  LoopState state;
  for (int it = 1; it <= cfg.outer_iters; ++it) {
    const Matrix d = distance_matrix(centroids);
    state.assignment =
        assign(d, bounds, cfg.epsilon, cfg.solver_tolerance, cfg.solver_max_iter);
    state.mask = reweight_matrix(state.assignment);
    const Matrix& used = cfg.reweight ? state.mask : ones_like(state.mask);
    Matrix next = update(state.assignment, used);
    const double moved = (next - centroids).cwiseAbs().maxCoeff();
    centroids = std::move(next);
    state.iterations = it;
    if (cfg.until_stable && moved < cfg.stable_tol) break;
  }
  return state;
}

ClusteringResult pack_result(Matrix centroids, LoopState state) {
  ClusteringResult result;
  result.centroids = std::move(centroids);
  result.reweight = std::move(state.mask);
  result.per_cluster_mass = state.assignment.col_sums();
  result.hard_labels.resize(static_cast<size_t>(state.assignment.rows()));
  for (Index i = 0; i < state.assignment.rows(); ++i)
    result.hard_labels[static_cast<size_t>(i)] = row_argmax(state.assignment.plan, i);
  result.assignment = std::move(state.assignment);
  result.iterations = state.iterations;
  return result;
}

}  // namespace

ClusteringResult cluster(const PointDataset& data, int k, const ClusterBounds& bounds,
                         const ClusterConfig& cfg) {
  const Index s = data.points.rows();
  if (s == 0) throw DbotError("cluster: empty dataset");
  if (static_cast<Index>(k) > s) throw DbotError("cluster: k exceeds sample count");
  bounds.validate(s);

  Matrix centroids = init_centroids_kmeanspp(data.points, k, cfg.seed);
  auto dist = [&](const Matrix& c) { return pairwise_sq_euclidean(data.points, c); };
  auto update = [&](const Coupling& p, const Matrix& r) {
    return update_centroids_euclidean(data.points, p, r);
  };
  LoopState state = alternate(centroids, bounds, cfg, dist, update);
  return pack_result(std::move(centroids), std::move(state));
}

ClusteringResult cluster_histograms(const HistogramDataset& data, int k,
                                    const ClusterBounds& bounds, const ClusterConfig& cfg) {
  data.validate();
  const Index s = data.histograms.rows();
  if (static_cast<Index>(k) > s) throw DbotError("cluster: k exceeds sample count");
  bounds.validate(s);

  // Seed with k member histograms by D^2 sampling in the entropic W metric.
  auto dist_to = [&](Index idx) -> Vector {
    Vector d(s);
    for (Index i = 0; i < s; ++i) {
      d[i] = i == idx ? 0.0
                      : entropic_w_distance(data.support_cost,
                                            data.histograms.row(i).transpose(),
                                            data.histograms.row(idx).transpose(),
                                            cfg.epsilon_bary);
    }
    return d;
  };
  const auto chosen = kmeanspp_pick(s, k, cfg.seed, dist_to);
  Matrix centroids(k, data.histograms.cols());
  for (int c = 0; c < k; ++c) centroids.row(c) = data.histograms.row(chosen[static_cast<size_t>(c)]);

  auto dist = [&](const Matrix& c) {
    Matrix d(s, c.rows());
    for (Index i = 0; i < s; ++i)
      for (Index t = 0; t < c.rows(); ++t)
        d(i, t) = entropic_w_distance(data.support_cost, data.histograms.row(i).transpose(),
                                      c.row(t).transpose(), cfg.epsilon_bary);
    return d;
  };
  auto update = [&](const Coupling& p, const Matrix& r) {
    return update_centroids_wasserstein(data, p, r, cfg.epsilon_bary, cfg.bary_max_iter);
  };
  LoopState state = alternate(centroids, bounds, cfg, dist, update);
  return pack_result(std::move(centroids), std::move(state));
}

double purity(const std::vector<int>& hard_labels, const std::vector<int>& true_labels) {
  if (hard_labels.size() != true_labels.size())
    throw DbotError("purity: label vectors must have equal length");
  if (hard_labels.empty()) throw DbotError("purity: empty labels");

  int k = 0, c = 0;
  for (int x : hard_labels) {
    if (x < 0) throw DbotError("purity: negative cluster id");
    k = std::max(k, x + 1);
  }
  for (int y : true_labels) {
    if (y < 0) throw DbotError("purity: negative class id");
    c = std::max(c, y + 1);
  }
  const int dim = std::max(k, c);
  if (dim > 20) throw DbotError("purity: more than 20 clusters or classes");

  // Contingency table padded to square for one-to-one matching.
  std::vector<std::vector<int>> table(static_cast<size_t>(dim),
                                      std::vector<int>(static_cast<size_t>(dim), 0));
  for (size_t i = 0; i < hard_labels.size(); ++i)
    ++table[static_cast<size_t>(hard_labels[i])][static_cast<size_t>(true_labels[i])];

  // Hungarian assignment by subset DP: dp[mask] = best matches with the first
  // popcount(mask) clusters assigned to the classes in mask.
  const size_t full = size_t{1} << dim;
  std::vector<int> dp(full, -1);
  dp[0] = 0;
  for (size_t mask = 0; mask + 1 < full; ++mask) {
    if (dp[mask] < 0) continue;
    const int row = __builtin_popcountll(mask);
    for (int col = 0; col < dim; ++col) {
      if (mask & (size_t{1} << col)) continue;
      const size_t next = mask | (size_t{1} << col);
      dp[next] = std::max(dp[next], dp[mask] + table[static_cast<size_t>(row)][static_cast<size_t>(col)]);
    }
  }
  return static_cast<double>(dp[full - 1]) / static_cast<double>(hard_labels.size());
}

}  // namespace dbot
