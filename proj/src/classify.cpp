#include "dbot/classify.hpp"

#include "dbot/core.hpp"
#include "dbot/logspace.hpp"

#include <algorithm>
#include <cmath>

namespace dbot {

namespace {

/// Forward tape of the unrolled scaling recursion. Cycle l computes the row
/// scaling u from the column scalings of cycle l-1; q and v follow except in
/// the last cycle, where the plan is read right after the row update so that
/// rows match a exactly (and k=1, delta=0 lands on Balanced Softmax).
struct UnrolledForward {
  Matrix kernel;              // exp((l - c)/eps), rows pre-shifted by their max
  std::vector<Vector> u, s;   // index l-1, l = 1..K
  std::vector<Vector> t, w, z, q, v;  // index l-1, l = 1..K-1
  std::vector<Vector> qv;     // index l, l = 0..K-1
  Matrix plan;
  Vector row_sums;
};

Vector source_of(Index m) { return Vector::Constant(m, 1.0 / static_cast<double>(m)); }

UnrolledForward unrolled_forward(const LogitBatch& batch, const ClassPrior& prior,
                                 const LossConfig& cfg) {
  const Index m = batch.samples();
  const Index n = batch.classes();
  const double eps = cfg.epsilon;
  const int k_iters = cfg.k_iters;

  // The plan is exactly invariant to per-row logit shifts and to the cost
  // shift c (both cancel between u and the kernel), so rows are stabilized
  // by their max and c is pinned to 1.
  Matrix shifted = batch.logits;
  for (Index i = 0; i < m; ++i) shifted.row(i).array() -= batch.logits.row(i).maxCoeff();

  UnrolledForward f;
  f.kernel = ((shifted.array() - 1.0) / eps).exp();

  const Vector a = source_of(m);
  const Vector lower = (1.0 - cfg.delta) * prior.r;
  const Vector upper = (1.0 + cfg.delta) * prior.r;

  Vector q_cur = Vector::Ones(n);
  Vector v_cur = prior.r;
  Vector qv_cur = q_cur.cwiseProduct(v_cur);
  f.qv.push_back(qv_cur);

  for (int l = 1; l <= k_iters; ++l) {
    Vector s_l = f.kernel * qv_cur;
    Vector u_l(m);
    for (Index i = 0; i < m; ++i) {
      if (s_l[i] <= 0.0)
        throw DegenerateKernelError("dbot loss: scaling denominator vanished");
      u_l[i] = a[i] / s_l[i];
    }
    f.s.push_back(s_l);
    f.u.push_back(u_l);
    if (l == k_iters) break;

    Vector t_l = f.kernel.transpose() * u_l;
    Vector w_l = t_l.cwiseProduct(v_cur);
    Vector q_l(n), z_l(n), v_l(n);
    for (Index j = 0; j < n; ++j)
      q_l[j] = lower[j] > 0.0 ? std::max(lower[j] / w_l[j], 1.0) : 1.0;
    z_l = t_l.cwiseProduct(q_l);
    for (Index j = 0; j < n; ++j)
      v_l[j] = upper[j] > 0.0 ? std::min(upper[j] / z_l[j], 1.0) : 0.0;

    f.t.push_back(t_l);
    f.w.push_back(w_l);
    f.z.push_back(z_l);
    f.q.push_back(q_l);
    f.v.push_back(v_l);

    q_cur = q_l;
    v_cur = v_l;
    qv_cur = q_l.cwiseProduct(v_l);
    f.qv.push_back(qv_cur);
  }

  f.plan = f.u.back().asDiagonal() * f.kernel * f.qv.back().asDiagonal();
  f.row_sums = f.plan.rowwise().sum();
  return f;
}

void require_labels(const LogitBatch& batch, const ClassPrior& prior) {
  if (!batch.labels) throw DbotError("loss: labels are required");
  if (static_cast<Index>(batch.labels->size()) != batch.samples())
    throw DbotError("loss: one label per sample required");
  for (int y : *batch.labels) {
    if (y < 0 || y >= batch.classes()) throw DbotError("loss: label out of range");
    if (prior.r[y] <= 0.0)
      throw DbotError("loss: observed label " + std::to_string(y) +
                      " has zero prior mass; loss is infinite");
  }
}

double loss_from_plan(const Matrix& plan, const Vector& row_sums,
                      const std::vector<int>& labels) {
  const Index m = plan.rows();
  double loss = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double p = plan(i, labels[static_cast<size_t>(i)]);
    if (p <= 0.0) throw DbotError("loss: zero plan mass at an observed label");
    loss -= std::log(p / row_sums[i]);
  }
  return loss / static_cast<double>(m);
}

}  // namespace

void LogitBatch::validate() const {
  if (!logits.allFinite()) throw DbotError("logits: entries must be finite");
  if (labels) {
    if (static_cast<Index>(labels->size()) != samples())
      throw DbotError("logits: one label per sample required");
    for (int y : *labels)
      if (y < 0 || y >= classes()) throw DbotError("logits: label out of range");
  }
}

ClassPrior ClassPrior::from_counts(const Vector& counts) {
  if (counts.minCoeff() < 0.0) throw DbotError("prior: negative class count");
  const double total = counts.sum();
  if (!(total > 0.0)) throw DbotError("prior: counts sum to zero");
  return ClassPrior{counts / total};
}

void ClassPrior::validate() const {
  if (r.size() == 0) throw DbotError("prior: empty");
  if (r.minCoeff() < 0.0) throw DbotError("prior: negative entry");
  if (std::abs(r.sum() - 1.0) > 1e-9) throw DbotError("prior: must sum to 1 within 1e-9");
}

void LossConfig::validate() const {
  if (delta < 0.0 || delta >= 1.0) throw DbotError("loss config: delta must be in [0, 1)");
  if (k_iters < 1) throw DbotError("loss config: k_iters must be >= 1");
  if (!(epsilon > 0.0)) throw DbotError("loss config: epsilon must be positive");
}

Bounds dbot_bounds(const ClassPrior& prior, double delta, double batch_mass) {
  prior.validate();
  if (delta < 0.0 || delta >= 1.0) throw DbotError("dbot_bounds: delta must be in [0, 1)");
  if (!(batch_mass > 0.0)) throw DbotError("dbot_bounds: batch mass must be positive");
  return Bounds{Histogram((1.0 - delta) * batch_mass * prior.r),
                Histogram((1.0 + delta) * batch_mass * prior.r)};
}

CostMatrix cost_from_logits(const LogitBatch& batch, std::optional<double> shift_c) {
  batch.validate();
  const double top = batch.logits.maxCoeff();
  const double c = shift_c.value_or(top + 1.0);
  if (c < top) throw DbotError("cost_from_logits: shift must be >= max logit");
  return CostMatrix((c - batch.logits.array()).matrix());
}

double dbot_loss(const LogitBatch& batch, const ClassPrior& prior, const LossConfig& cfg) {
  batch.validate();
  prior.validate();
  cfg.validate();
  if (prior.r.size() != batch.classes()) throw DbotError("loss: prior size mismatch");
  require_labels(batch, prior);
  if (cfg.shift_c && *cfg.shift_c < batch.logits.maxCoeff())
    throw DbotError("loss: shift must be >= max logit");

  const UnrolledForward f = unrolled_forward(batch, prior, cfg);
  return loss_from_plan(f.plan, f.row_sums, *batch.labels);
}

double balanced_softmax_loss(const LogitBatch& batch, const ClassPrior& prior) {
  batch.validate();
  prior.validate();
  if (prior.r.size() != batch.classes()) throw DbotError("loss: prior size mismatch");
  require_labels(batch, prior);

  const Index m = batch.samples();
  const Index n = batch.classes();
  double loss = 0.0;
  for (Index i = 0; i < m; ++i) {
    const int y = (*batch.labels)[static_cast<size_t>(i)];
    const double mx = batch.logits.row(i).maxCoeff();
    double denom = 0.0;
    for (Index j = 0; j < n; ++j)
      if (prior.r[j] > 0.0) denom += prior.r[j] * std::exp(batch.logits(i, j) - mx);
    loss -= std::log(prior.r[y] * std::exp(batch.logits(i, y) - mx) / denom);
  }
  return loss / static_cast<double>(m);
}

Matrix dbot_loss_grad(const LogitBatch& batch, const ClassPrior& prior,
                      const LossConfig& cfg) {
  batch.validate();
  prior.validate();
  cfg.validate();
  if (prior.r.size() != batch.classes()) throw DbotError("loss: prior size mismatch");
  require_labels(batch, prior);

  const UnrolledForward f = unrolled_forward(batch, prior, cfg);
  const Index m = batch.samples();
  const Index n = batch.classes();
  const int k_iters = cfg.k_iters;
  const std::vector<int>& labels = *batch.labels;

  // dL/dP of the row-conditional cross-entropy.
  Matrix plan_bar(m, n);
  for (Index i = 0; i < m; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    for (Index j = 0; j < n; ++j) {
      const double hit = (static_cast<int>(j) == y) ? 1.0 / f.plan(i, y) : 0.0;
      plan_bar(i, j) = -(hit - 1.0 / f.row_sums[i]) / static_cast<double>(m);
    }
  }

  // Readout P = diag(u_K) kernel diag(qv_{K-1}).
  const Matrix pk = plan_bar.cwiseProduct(f.kernel);
  Matrix kernel_bar =
      plan_bar.cwiseProduct(f.u.back() * f.qv.back().transpose());
  Vector u_bar = pk * f.qv.back();
  Vector qv_bar = pk.transpose() * f.u.back();

  // Contributions to v^{(l)} adjoints arriving from the following cycle.
  std::vector<Vector> v_bar_acc(f.v.size(), Vector::Zero(n));

  for (int l = k_iters; l >= 1; --l) {
    const Vector& u_l = f.u[static_cast<size_t>(l - 1)];
    const Vector& s_l = f.s[static_cast<size_t>(l - 1)];
    const Vector s_bar = -u_bar.cwiseProduct(u_l).cwiseQuotient(s_l);
    kernel_bar += s_bar * f.qv[static_cast<size_t>(l - 1)].transpose();
    qv_bar += f.kernel.transpose() * s_bar;
    if (l == 1) break;  // qv_0 = prior is a leaf

    const size_t c = static_cast<size_t>(l - 2);  // cycle l-1 tape index
    const Vector& q_c = f.q[c];
    const Vector& v_c = f.v[c];
    const Vector& z_c = f.z[c];
    const Vector& w_c = f.w[c];
    const Vector& t_c = f.t[c];
    const Vector& v_prev = (l - 2 >= 1) ? f.v[c - 1] : prior.r;

    Vector q_bar = qv_bar.cwiseProduct(v_c);
    Vector v_bar = v_bar_acc[c] + qv_bar.cwiseProduct(q_c);

    Vector z_bar = Vector::Zero(n);
    for (Index j = 0; j < n; ++j)
      if (v_c[j] < 1.0 && v_c[j] > 0.0) z_bar[j] = -v_bar[j] * v_c[j] / z_c[j];
    Vector t_bar = z_bar.cwiseProduct(q_c);
    q_bar += z_bar.cwiseProduct(t_c);

    Vector w_bar = Vector::Zero(n);
    for (Index j = 0; j < n; ++j)
      if (q_c[j] > 1.0) w_bar[j] = -q_bar[j] * q_c[j] / w_c[j];
    t_bar += w_bar.cwiseProduct(v_prev);
    if (l - 2 >= 1) v_bar_acc[c - 1] += w_bar.cwiseProduct(t_c);

    kernel_bar += f.u[static_cast<size_t>(l - 2)] * t_bar.transpose();
    u_bar = f.kernel * t_bar;
    qv_bar.setZero();
  }

  // kernel = exp((l' - 1)/eps); the row shift and the cost shift have exact
  // zero net effect on the loss, so no correction terms are needed.
  return kernel_bar.cwiseProduct(f.kernel) / cfg.epsilon;
}

InferenceResult dbot_infer(const LogitBatch& batch, const ClassPrior& prior, double delta,
                           double epsilon, double tolerance, int max_iter) {
  batch.validate();
  prior.validate();
  if (prior.r.size() != batch.classes()) throw DbotError("infer: prior size mismatch");

  const Index m = batch.samples();
  // Per-row max shift: the DB-OT plan is invariant and the kernel stays tame.
  Matrix shifted = batch.logits;
  for (Index i = 0; i < m; ++i) shifted.row(i).array() -= batch.logits.row(i).maxCoeff();

  TransportProblem p;
  p.cost = CostMatrix((1.0 - shifted.array()).matrix());  // c - l with c = 1
  p.source = Histogram(source_of(m));
  p.bounds = dbot_bounds(prior, delta, 1.0);
  p.epsilon = epsilon;

  SolverConfig cfg;
  cfg.variant = Variant::bregman;
  cfg.tolerance = tolerance;
  cfg.max_iter = max_iter;
  Solution sol = solve_bregman(p, cfg);

  InferenceResult result;
  result.predictions = plain_argmax(sol.coupling.plan);
  result.column_masses = sol.coupling.col_sums();
  result.iterations = sol.iterations;
  result.converged = sol.converged;
  result.coupling = std::move(sol.coupling);
  return result;
}

std::vector<int> logit_adjust_infer(const LogitBatch& batch, const Vector& class_counts,
                                    double tau) {
  batch.validate();
  if (class_counts.size() != batch.classes())
    throw DbotError("logit adjust: one count per class required");
  if (class_counts.minCoeff() <= 0.0)
    throw DbotError("logit adjust: class counts must be positive");
  Matrix adjusted = batch.logits;
  adjusted.rowwise() -= (tau * class_counts.array().log()).matrix().transpose();
  return plain_argmax(adjusted);
}

std::vector<int> plain_argmax(const Matrix& logits) {
  std::vector<int> out(static_cast<size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Index j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = static_cast<int>(j);
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw DbotError("accuracy: size mismatch");
  if (predicted.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

TrainDemoResult train_demo(const PointDataset& train,
                           const std::vector<std::pair<std::string, PointDataset>>& test_splits,
                           const TrainDemoConfig& cfg) {
  if (!train.labels) throw DbotError("train_demo: training labels required");
  const Index m = train.points.rows();
  if (m == 0 || m > 1000) throw DbotError("train_demo: expects 1..1000 training points");
  const Index d = train.points.cols();
  int n_classes = 0;
  for (int y : *train.labels) n_classes = std::max(n_classes, y + 1);
  if (n_classes > 5) throw DbotError("train_demo: at most 5 classes");

  Vector counts = Vector::Zero(n_classes);
  for (int y : *train.labels) counts[y] += 1.0;
  if (counts.minCoeff() <= 0.0) throw DbotError("train_demo: every class needs samples");
  const ClassPrior train_prior = ClassPrior::from_counts(counts);

  LinearModel model{Matrix::Zero(n_classes, d), Vector::Zero(n_classes)};
  LogitBatch batch;
  batch.labels = train.labels;

  for (int step = 0; step < cfg.steps; ++step) {
    batch.logits = model.logits(train.points);
    const Matrix g = dbot_loss_grad(batch, train_prior, cfg.loss);
    model.weights -= cfg.learning_rate * (g.transpose() * train.points);
    model.bias -= cfg.learning_rate * g.colwise().sum().transpose();
  }
  batch.logits = model.logits(train.points);
  TrainDemoResult result;
  result.model = model;
  result.final_loss = dbot_loss(batch, train_prior, cfg.loss);

  for (const auto& [name, split] : test_splits) {
    if (!split.labels) throw DbotError("train_demo: test split labels required");
    SplitEvaluation eval;
    eval.split = name;
    LogitBatch test{model.logits(split.points), split.labels};

    eval.accuracy_argmax = accuracy(plain_argmax(test.logits), *split.labels);

    Vector split_counts = Vector::Zero(n_classes);
    for (int y : *split.labels) split_counts[y] += 1.0;
    const ClassPrior split_prior = ClassPrior::from_counts(split_counts);
    eval.accuracy_dbot = accuracy(
        dbot_infer(test, split_prior, cfg.infer_delta, cfg.infer_epsilon).predictions,
        *split.labels);

    eval.accuracy_logit_adjust =
        accuracy(logit_adjust_infer(test, counts, cfg.logit_adjust_tau), *split.labels);
    result.table.push_back(std::move(eval));
  }
  return result;
}

}  // namespace dbot
