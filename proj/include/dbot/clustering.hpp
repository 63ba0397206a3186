#pragma once

#include "dbot/solvers.hpp"
#include "dbot/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dbot {

struct PointDataset {
  Matrix points;                             // S x d
  std::optional<std::vector<int>> labels;    // evaluation only
};

/// Probability measures on a shared support: histogram rows sum to 1 and the
/// support cost is symmetric with zero diagonal.
struct HistogramDataset {
  CostMatrix support_cost;  // B x B
  Matrix histograms;        // S x B, rows normalized

  void validate() const;
};

/// Per-cluster mass corridor in sample-mass units (each sample carries mass 1).
struct ClusterBounds {
  Vector lower;
  Vector upper;

  static ClusterBounds uniform(int k, double lo, double up);
  void validate(Index sample_count) const;
};

enum class ClusterSpace { euclidean, wasserstein };

struct ClusterConfig {
  int outer_iters = 5;
  double epsilon = 0.01;       // entropic coefficient of the assignment problem
  std::uint64_t seed = 0;
  bool reweight = true;        // apply the argmax mask in centroid updates
  bool until_stable = false;   // stop early once centroids move < stable_tol
  double stable_tol = 1e-6;
  double epsilon_bary = 0.01;  // Wasserstein barycenter regularization
  int bary_max_iter = 200;
  double bary_tol = 1e-10;
  double solver_tolerance = 1e-9;
  int solver_max_iter = 1000;
};

struct ClusteringResult {
  Matrix centroids;             // k x d points, or k x B histograms
  Coupling assignment;          // S x k
  Matrix reweight;              // S x k one-hot rows
  std::vector<int> hard_labels; // row argmax of the assignment
  Vector per_cluster_mass;      // column sums of the assignment
  int iterations = 0;
};

/// Squared Euclidean distances between the rows of two point sets.
Matrix pairwise_sq_euclidean(const Matrix& a, const Matrix& b);

/// D^2-weighted sequential seeding; deterministic for a fixed seed.
Matrix init_centroids_kmeanspp(const Matrix& points, int k, std::uint64_t seed);

/// Assignment step: DB-OT between unit-mass samples and centroids under the
/// cluster-size corridor, solved by the Sinkhorn-Knopp variant.
Coupling assign(const Matrix& cost, const ClusterBounds& bounds, double epsilon,
                double tolerance = 1e-9, int max_iter = 1000);

Coupling assign_points(const Matrix& points, const Matrix& centroids,
                       const ClusterBounds& bounds, double epsilon,
                       double tolerance = 1e-9, int max_iter = 1000);

/// One-hot row argmax of the coupling; ties break to the lowest cluster index.
Matrix reweight_matrix(const Coupling& p);

/// Weighted means under masked coupling weights w_st = P_st R_st / sum_s' P_s't R_s't.
/// An all-zero mask column falls back to plain coupling weights; an all-zero
/// coupling column falls back to the unweighted mean.
Matrix update_centroids_euclidean(const Matrix& points, const Coupling& p, const Matrix& r);

/// Entropic fixed-support Wasserstein barycenter of `members` (rows) with the
/// given weights: coupled Sinkhorn scalings sharing a common second marginal
/// updated as the weighted geometric mean. Log-domain throughout.
Vector wasserstein_barycenter(const CostMatrix& support_cost, const Matrix& members,
                              const Vector& weights, double epsilon, int max_iter,
                              double tolerance = 1e-10);

Matrix update_centroids_wasserstein(const HistogramDataset& data, const Coupling& p,
                                    const Matrix& r, double epsilon_bary, int max_iter);

/// Entropic transport cost between two histograms on the shared support.
double entropic_w_distance(const CostMatrix& support_cost, const Vector& a,
                           const Vector& b, double epsilon);

/// Alternating minimization: assign with DB-OT, mask by row argmax, update
/// centroids; fixed outer iteration count unless cfg.until_stable.
ClusteringResult cluster(const PointDataset& data, int k, const ClusterBounds& bounds,
                         const ClusterConfig& cfg);

ClusteringResult cluster_histograms(const HistogramDataset& data, int k,
                                    const ClusterBounds& bounds, const ClusterConfig& cfg);

/// Best one-to-one cluster-to-class matching accuracy over the contingency
/// table (Hungarian assignment).
double purity(const std::vector<int>& hard_labels, const std::vector<int>& true_labels);

}  // namespace dbot
