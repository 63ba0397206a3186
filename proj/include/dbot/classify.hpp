#pragma once

#include "dbot/clustering.hpp"
#include "dbot/solvers.hpp"
#include "dbot/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dbot {

struct LogitBatch {
  Matrix logits;                           // m samples x n classes
  std::optional<std::vector<int>> labels;  // class ids in [0, n)

  Index samples() const { return logits.rows(); }
  Index classes() const { return logits.cols(); }
  void validate() const;
};

/// Class marginal distribution; nonnegative, sums to 1 within 1e-9.
struct ClassPrior {
  Vector r;

  static ClassPrior uniform(Index n) { return ClassPrior{Vector::Constant(n, 1.0 / n)}; }
  static ClassPrior from_counts(const Vector& counts);
  void validate() const;
};

struct LossConfig {
  double delta = 0.0;   // bound rate: corridor (1 +- delta) r
  int k_iters = 1;      // unrolled scaling cycles
  double epsilon = 1.0;
  std::optional<double> shift_c;  // cost shift; defaults to max logit + 1

  void validate() const;
};

/// Column corridor lower = (1 - delta) r * batch_mass, upper = (1 + delta) r * batch_mass.
Bounds dbot_bounds(const ClassPrior& prior, double delta, double batch_mass = 1.0);

/// C = c - logits with c >= max logit (auto: max + 1), so costs are nonnegative.
CostMatrix cost_from_logits(const LogitBatch& batch, std::optional<double> shift_c);

/// Row-conditional cross-entropy of the unrolled scaling plan against one-hot
/// labels. The plan is diag(u) K diag(q .* v) with column scaling seeded by
/// the prior (v = r, q = 1) and k_iters cycles ordered u, q, v; the plan is
/// read right after the last row update, so k_iters = 1 with delta = 0
/// reproduces Balanced Softmax exactly.
double dbot_loss(const LogitBatch& batch, const ClassPrior& prior, const LossConfig& cfg);

/// -(1/m) sum_i log(r_{y_i} e^{l_iy} / sum_k r_k e^{l_ik}).
double balanced_softmax_loss(const LogitBatch& batch, const ClassPrior& prior);

/// Exact gradient of dbot_loss with respect to the logits, by reverse-mode
/// accumulation through the unrolled scaling updates.
Matrix dbot_loss_grad(const LogitBatch& batch, const ClassPrior& prior, const LossConfig& cfg);

struct InferenceResult {
  std::vector<int> predictions;  // row argmax of the coupling, ties to lowest id
  Coupling coupling;
  Vector column_masses;
  int iterations = 0;
  bool converged = false;
};

/// Testing-time DB-OT: rows a = 1/m, columns confined to (1 +- delta) r,
/// solved by Bregman iterations on the shifted-logit cost.
InferenceResult dbot_infer(const LogitBatch& batch, const ClassPrior& prior, double delta,
                           double epsilon = 1.0, double tolerance = 1e-9,
                           int max_iter = 1000);

/// Class-aware bias baseline: argmax_j (l_ij - tau log n_j).
std::vector<int> logit_adjust_infer(const LogitBatch& batch, const Vector& class_counts,
                                    double tau);

std::vector<int> plain_argmax(const Matrix& logits);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

struct LinearModel {
  Matrix weights;  // n classes x d
  Vector bias;     // n

  Matrix logits(const Matrix& points) const {
    return (points * weights.transpose()).rowwise() + bias.transpose();
  }
};

struct TrainDemoConfig {
  LossConfig loss;
  double learning_rate = 0.5;
  int steps = 300;
  double infer_delta = 0.1;
  double infer_epsilon = 1.0;
  double logit_adjust_tau = 1.0;
};

struct SplitEvaluation {
  std::string split;
  double accuracy_argmax = 0.0;
  double accuracy_dbot = 0.0;         // dbot_infer with the split's true prior
  double accuracy_logit_adjust = 0.0; // adjusted with the training counts
};

struct TrainDemoResult {
  LinearModel model;
  std::vector<SplitEvaluation> table;
  double final_loss = 0.0;
};

/// Desk-scale training stand-in: full-batch gradient descent of a linear
/// classifier on dbot_loss, evaluated with plain argmax, DB-OT inference and
/// the class-aware-bias baseline on the provided test splits.
TrainDemoResult train_demo(const PointDataset& train,
                           const std::vector<std::pair<std::string, PointDataset>>& test_splits,
                           const TrainDemoConfig& cfg);

}  // namespace dbot
