// dbot — doubly-bounded entropic optimal transport toolkit.
//
// Exit codes: 0 success, 1 input/validation error, 2 numerical non-convergence.
// Diagnostics go to stderr (gated by DBOT_LOG); results go to stdout and files.

#include <CLI11.hpp>
#include <json.hpp>

#include "dbot/classify.hpp"
#include "dbot/clustering.hpp"
#include "dbot/core.hpp"
#include "dbot/io.hpp"
#include "dbot/log.hpp"
#include "dbot/oracle.hpp"
#include "dbot/solvers.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using dbot::Index;
using dbot::Matrix;
using dbot::Vector;
using ordered_json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNotConverged = 2;

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_to_json(const Vector& v) {
  ordered_json out = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

void write_json(const std::string& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw dbot::DbotError(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

struct GlobalOptions {
  bool no_timestamp = false;

  void stamp(ordered_json& j) const {
    if (!no_timestamp) j["timestamp"] = utc_timestamp();
  }
};

/// Bound argument: a scalar literal applied to every entry, or a CSV path.
Vector bound_argument(const std::string& text, Index n, double fallback) {
  if (text.empty()) return Vector::Constant(n, fallback);
  try {
    size_t consumed = 0;
    const double value = std::stod(text, &consumed);
    if (consumed == text.size()) return Vector::Constant(n, value);
  } catch (const std::exception&) {
  }
  Vector v = dbot::read_vector_csv(text);
  if (v.size() != n)
    throw dbot::DbotError(text + ": expected " + std::to_string(n) + " entries, got " +
                          std::to_string(v.size()));
  return v;
}

dbot::TransportProblem load_problem(const std::string& cost_path, const std::string& a_path,
                                    const std::string& lower_path,
                                    const std::string& upper_path, double epsilon) {
  dbot::TransportProblem p;
  p.cost = dbot::CostMatrix(dbot::read_matrix_csv(cost_path));
  p.source = dbot::Histogram(dbot::read_vector_csv(a_path));
  p.bounds = dbot::Bounds{dbot::Histogram(dbot::read_vector_csv(lower_path)),
                          dbot::Histogram(dbot::read_vector_csv(upper_path))};
  p.epsilon = epsilon;
  return p;
}

int reject(const dbot::FeasibilityReport& report) {
  for (const auto& v : report.violations) std::cerr << "error: " << v.message << '\n';
  return kExitInvalid;
}

ordered_json solution_to_json(const dbot::Solution& s, dbot::Variant variant) {
  ordered_json j;
  j["variant"] = dbot::variant_name(variant);
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["row_residual"] = s.row_residual;
  j["col_violation"] = s.col_violation;
  j["objective"] = s.objective;
  j["coupling"] = matrix_to_json(s.coupling.plan);
  return j;
}

// --- solve ------------------------------------------------------------------

struct SolveArgs {
  std::string cost, a, lower, upper;
  double epsilon = 1.0;
  std::string variant = "bregman";
  double tol = 1e-9;
  int max_iter = 1000;
  bool log_domain = false;
  int check_every = 1;
  std::string out = "solution.json";
  std::string coupling_csv;
};

int run_solve(const SolveArgs& args, const GlobalOptions& global) {
  const auto p = load_problem(args.cost, args.a, args.lower, args.upper, args.epsilon);
  dbot::logf(dbot::LogLevel::info, "solve: %ld x %ld instance, epsilon %g, variant %s",
             static_cast<long>(p.rows()), static_cast<long>(p.cols()), p.epsilon,
             args.variant.c_str());
  const auto report = dbot::validate_problem(p);
  if (!report.feasible()) return reject(report);

  dbot::SolverConfig cfg;
  cfg.tolerance = args.tol;
  cfg.max_iter = args.max_iter;
  cfg.log_domain = args.log_domain;
  cfg.check_every = args.check_every;

  if (args.variant == "all") {
    const dbot::Variant variants[] = {dbot::Variant::bregman, dbot::Variant::sinkhorn_knopp,
                                      dbot::Variant::dual};
    std::vector<dbot::Solution> solutions;
    ordered_json files = ordered_json::object();
    const auto dot = args.out.rfind(".json");
    const std::string stem = dot == std::string::npos ? args.out : args.out.substr(0, dot);
    for (dbot::Variant v : variants) {
      cfg.variant = v;
      solutions.push_back(dbot::solve(p, cfg));
      ordered_json j = solution_to_json(solutions.back(), v);
      global.stamp(j);
      const std::string path = stem + "." + dbot::variant_name(v) + ".json";
      write_json(path, j);
      files[dbot::variant_name(v)] = path;
    }
    ordered_json report_json;
    report_json["files"] = std::move(files);
    double worst = 0.0;
    ordered_json pairwise = ordered_json::object();
    const char* names[] = {"bregman", "sinkhorn_knopp", "dual"};
    for (int x = 0; x < 3; ++x)
      for (int y = x + 1; y < 3; ++y) {
        const double d =
            (solutions[x].coupling.plan - solutions[y].coupling.plan).cwiseAbs().maxCoeff();
        pairwise[std::string(names[x]) + "_vs_" + names[y]] = d;
        worst = std::max(worst, d);
      }
    report_json["pairwise_max_diff"] = std::move(pairwise);
    report_json["max_diff"] = worst;
    global.stamp(report_json);
    std::cout << report_json.dump(2) << '\n';
    for (const auto& s : solutions)
      if (!s.converged) return kExitNotConverged;
    return kExitOk;
  }

  cfg.variant = dbot::parse_variant(args.variant);
  const dbot::Solution s = dbot::solve(p, cfg);
  dbot::logf(dbot::LogLevel::info, "solve: %s in %d iterations, row residual %g",
             s.converged ? "converged" : "did not converge", s.iterations, s.row_residual);
  ordered_json j = solution_to_json(s, cfg.variant);
  global.stamp(j);
  write_json(args.out, j);
  if (!args.coupling_csv.empty()) dbot::write_matrix_csv(args.coupling_csv, s.coupling.plan);
  std::cout << j.dump(2) << '\n';
  return s.converged ? kExitOk : kExitNotConverged;
}

// --- cluster ----------------------------------------------------------------

struct ClusterArgs {
  std::string data;
  int k = 2;
  std::string lower, upper;
  double epsilon = 0.01;
  int outer_iters = 5;
  std::string space = "euclidean";
  std::uint64_t seed = 0;
  std::string labels;
  bool no_reweight = false;
  bool until_stable = false;
  double epsilon_bary = 0.01;
  std::vector<int> grid;  // H W for CSV histograms in wasserstein space
  double grid_exponent = 2.0;
  std::string out = "result.json";
};

dbot::HistogramDataset load_histogram_dataset(const ClusterArgs& args) {
  dbot::HistogramDataset data;
  if (args.data.size() > 5 && args.data.substr(args.data.size() - 5) == ".json") {
    std::ifstream in(args.data);
    if (!in) throw dbot::ParseError(args.data + ": cannot open file");
    ordered_json j;
    try {
      j = ordered_json::parse(in);
    } catch (const std::exception& e) {
      throw dbot::ParseError(args.data + ": " + e.what());
    }
    if (!j.contains("support") || !j.contains("histograms"))
      throw dbot::ParseError(args.data + ": expected keys 'support' and 'histograms'");
    const auto& support = j["support"];
    if (support.empty()) throw dbot::ParseError(args.data + ": empty support");
    Matrix coords(support.size(), support[0].size());
    for (size_t i = 0; i < support.size(); ++i)
      for (size_t d = 0; d < support[i].size(); ++d)
        coords(static_cast<Index>(i), static_cast<Index>(d)) = support[i][d].get<double>();
    Matrix cost = dbot::pairwise_sq_euclidean(coords, coords);
    if (args.grid_exponent != 2.0) cost = cost.array().sqrt().pow(args.grid_exponent);
    data.support_cost = dbot::CostMatrix(std::move(cost));
    const auto& hists = j["histograms"];
    data.histograms.resize(hists.size(), data.support_cost.rows());
    for (size_t s = 0; s < hists.size(); ++s)
      for (size_t b = 0; b < hists[s].size(); ++b)
        data.histograms(static_cast<Index>(s), static_cast<Index>(b)) = hists[s][b].get<double>();
  } else {
    if (args.grid.size() != 2)
      throw dbot::DbotError("wasserstein space with CSV input needs --grid H W");
    data.support_cost = dbot::grid_cost_matrix(args.grid[0], args.grid[1], args.grid_exponent);
    data.histograms = dbot::read_matrix_csv(args.data);
  }
  return data;
}

int run_cluster(const ClusterArgs& args, const GlobalOptions& global) {
  dbot::ClusterConfig cfg;
  cfg.epsilon = args.epsilon;
  cfg.outer_iters = args.outer_iters;
  cfg.seed = args.seed;
  cfg.reweight = !args.no_reweight;
  cfg.until_stable = args.until_stable;
  cfg.epsilon_bary = args.epsilon_bary;

  dbot::ClusteringResult result;
  if (args.space == "euclidean") {
    dbot::PointDataset data;
    data.points = dbot::read_matrix_csv(args.data);
    const dbot::ClusterBounds bounds{bound_argument(args.lower, args.k, 0.0),
                                     bound_argument(args.upper, args.k, dbot::kUnbounded)};
    result = dbot::cluster(data, args.k, bounds, cfg);
  } else if (args.space == "wasserstein") {
    const dbot::HistogramDataset data = load_histogram_dataset(args);
    const dbot::ClusterBounds bounds{bound_argument(args.lower, args.k, 0.0),
                                     bound_argument(args.upper, args.k, dbot::kUnbounded)};
    result = dbot::cluster_histograms(data, args.k, bounds, cfg);
  } else {
    throw dbot::DbotError("unknown space '" + args.space + "'");
  }

  dbot::logf(dbot::LogLevel::info, "cluster: %d outer iterations, %ld samples, k %d",
             result.iterations, static_cast<long>(result.assignment.rows()), args.k);
  ordered_json j;
  j["centroids"] = matrix_to_json(result.centroids);
  j["hard_labels"] = result.hard_labels;
  j["per_cluster_mass"] = vector_to_json(result.per_cluster_mass);
  if (!args.labels.empty()) {
    const auto truth = dbot::read_labels_csv(args.labels);
    j["purity"] = dbot::purity(result.hard_labels, truth);
  }
  global.stamp(j);
  write_json(args.out, j);
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

// --- infer ------------------------------------------------------------------

struct InferArgs {
  std::string logits;
  std::string prior;
  double delta = 0.1;
  double epsilon = 1.0;
  double tol = 1e-9;
  int max_iter = 1000;
  std::string baseline = "none";
  std::string counts;
  double tau = 1.0;
  std::string predictions = "predictions.csv";
  std::string diagnostics = "diagnostics.json";
};

int run_infer(const InferArgs& args, const GlobalOptions& global) {
  dbot::LogitBatch batch;
  batch.logits = dbot::read_matrix_csv(args.logits);
  const dbot::ClassPrior prior = args.prior.empty()
                                     ? dbot::ClassPrior::uniform(batch.classes())
                                     : dbot::ClassPrior{dbot::read_vector_csv(args.prior)};
  if (prior.r.size() != batch.classes())
    throw dbot::DbotError("prior length does not match the logit columns");

  ordered_json diag;
  std::vector<int> predictions;
  int exit_code = kExitOk;
  if (args.baseline == "logit-adjust") {
    if (args.counts.empty()) throw dbot::DbotError("--baseline logit-adjust requires --counts");
    predictions = dbot::logit_adjust_infer(batch, dbot::read_vector_csv(args.counts), args.tau);
    diag["method"] = "logit-adjust";
    diag["tau"] = args.tau;
  } else if (args.baseline == "none") {
    const auto r =
        dbot::dbot_infer(batch, prior, args.delta, args.epsilon, args.tol, args.max_iter);
    predictions = r.predictions;
    dbot::logf(dbot::LogLevel::info, "infer: %s in %d iterations",
               r.converged ? "converged" : "did not converge", r.iterations);
    diag["method"] = "dbot";
    diag["column_masses"] = vector_to_json(r.column_masses);
    diag["iterations"] = r.iterations;
    diag["converged"] = r.converged;
    if (!r.converged) exit_code = kExitNotConverged;
  } else {
    throw dbot::DbotError("unknown baseline '" + args.baseline + "'");
  }

  dbot::write_labels_csv(args.predictions, predictions);
  global.stamp(diag);
  write_json(args.diagnostics, diag);
  std::cout << diag.dump(2) << '\n';
  return exit_code;
}

// --- loss -------------------------------------------------------------------

struct LossArgs {
  std::string logits, labels, prior;
  double delta = 0.0;
  int k_iters = 1;
  double epsilon = 1.0;
  double shift_c = std::numeric_limits<double>::quiet_NaN();
  std::string grad_out;
  bool fd_check = false;
};

int run_loss(const LossArgs& args, const GlobalOptions&) {
  dbot::LogitBatch batch;
  batch.logits = dbot::read_matrix_csv(args.logits);
  batch.labels = dbot::read_labels_csv(args.labels);
  const dbot::ClassPrior prior{dbot::read_vector_csv(args.prior)};

  dbot::LossConfig cfg;
  cfg.delta = args.delta;
  cfg.k_iters = args.k_iters;
  cfg.epsilon = args.epsilon;
  if (!std::isnan(args.shift_c)) cfg.shift_c = args.shift_c;

  const double loss = dbot::dbot_loss(batch, prior, cfg);
  std::cout << "loss " << dbot::format_double(loss) << '\n';

  if (!args.grad_out.empty() || args.fd_check) {
    const Matrix grad = dbot::dbot_loss_grad(batch, prior, cfg);
    if (!args.grad_out.empty()) dbot::write_matrix_csv(args.grad_out, grad);
    if (args.fd_check) {
      const double h = 1e-5;
      dbot::LogitBatch probe = batch;
      double worst = 0.0;
      for (Index i = 0; i < batch.samples(); ++i)
        for (Index j = 0; j < batch.classes(); ++j) {
          probe.logits = batch.logits;
          probe.logits(i, j) += h;
          const double up = dbot::dbot_loss(probe, prior, cfg);
          probe.logits(i, j) -= 2 * h;
          const double down = dbot::dbot_loss(probe, prior, cfg);
          const double fd = (up - down) / (2 * h);
          const double denom = std::max({std::abs(fd), std::abs(grad(i, j)), 1e-6});
          worst = std::max(worst, std::abs(fd - grad(i, j)) / denom);
        }
      std::cout << "fd_max_rel_error " << dbot::format_double(worst) << '\n';
    }
  }
  return kExitOk;
}

// --- compare ----------------------------------------------------------------

struct CompareArgs {
  std::string cost, a, lower, upper;
  double epsilon = 1.0;
  int iters = 50;
  double tol = 1e-10;
  int max_iter = 10000;
  double resolution = 1e-4;
  std::string out;
};

int run_compare(const CompareArgs& args, const GlobalOptions& global) {
  const auto p = load_problem(args.cost, args.a, args.lower, args.upper, args.epsilon);
  const auto report = dbot::validate_problem(p);
  if (!report.feasible()) return reject(report);

  dbot::SolverConfig cfg;
  cfg.tolerance = args.tol;
  cfg.max_iter = args.max_iter;

  ordered_json j;
  std::vector<dbot::Solution> solutions;
  const dbot::Variant variants[] = {dbot::Variant::bregman, dbot::Variant::sinkhorn_knopp,
                                    dbot::Variant::dual};
  ordered_json per_variant = ordered_json::object();
  for (dbot::Variant v : variants) {
    cfg.variant = v;
    solutions.push_back(dbot::solve(p, cfg));
    ordered_json sj;
    sj["iterations"] = solutions.back().iterations;
    sj["converged"] = solutions.back().converged;
    sj["objective"] = solutions.back().objective;
    per_variant[dbot::variant_name(v)] = std::move(sj);
  }
  j["variants"] = std::move(per_variant);

  double worst = 0.0;
  ordered_json pairwise = ordered_json::object();
  const char* names[] = {"bregman", "sinkhorn_knopp", "dual"};
  for (int x = 0; x < 3; ++x)
    for (int y = x + 1; y < 3; ++y) {
      const double d =
          (solutions[x].coupling.plan - solutions[y].coupling.plan).cwiseAbs().maxCoeff();
      pairwise[std::string(names[x]) + "_vs_" + names[y]] = d;
      worst = std::max(worst, d);
    }
  j["pairwise_max_diff"] = std::move(pairwise);
  j["max_diff"] = worst;

  const auto lockstep = dbot::lockstep_compare(p, args.iters);
  ordered_json lj;
  lj["iterations"] = lockstep.iterations;
  lj["max_gap_f"] = lockstep.max_gap_f;
  lj["max_gap_g"] = lockstep.max_gap_g;
  lj["max_gap_h"] = lockstep.max_gap_h;
  lj["final_coupling_divergence"] = lockstep.final_coupling_divergence;
  j["lockstep"] = std::move(lj);

  if (p.rows() == 2 && p.cols() == 2) {
    const auto oracle = dbot::oracle_grid_2x2(p, args.resolution);
    ordered_json oj;
    oj["resolution"] = oracle.resolution;
    oj["objective"] = oracle.best_objective;
    oj["max_diff_vs_bregman"] =
        (oracle.best_coupling.plan - solutions[0].coupling.plan).cwiseAbs().maxCoeff();
    j["oracle"] = std::move(oj);
  }

  global.stamp(j);
  if (!args.out.empty()) write_json(args.out, j);
  std::cout << j.dump(2) << '\n';
  for (const auto& s : solutions)
    if (!s.converged) return kExitNotConverged;
  return kExitOk;
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
  std::string param;
  std::vector<double> grid;
  std::string logits, labels, prior;
  double delta = 0.0;
  double epsilon = 1.0;
  int k_iters = 1;
  double infer_delta = 0.1;
  std::string out;
};

int run_sweep(const SweepArgs& args, const GlobalOptions&) {
  if (args.grid.empty()) throw dbot::DbotError("grid must be nonempty");

  dbot::LogitBatch batch;
  batch.logits = dbot::read_matrix_csv(args.logits);
  batch.labels = dbot::read_labels_csv(args.labels);
  const dbot::ClassPrior prior{dbot::read_vector_csv(args.prior)};

  std::ostringstream table;
  table << "param,value,loss,infer_accuracy,infer_iterations,infer_converged,"
           "col_mass_violation\n";

  for (const double value : args.grid) {
    dbot::LossConfig cfg;
    cfg.delta = args.delta;
    cfg.epsilon = args.epsilon;
    cfg.k_iters = args.k_iters;
    double infer_delta = args.infer_delta;
    dbot::Bounds corridor;  // only the bounds axis overrides the corridor
    bool custom_corridor = false;

    if (args.param == "delta") {
      cfg.delta = value;
      infer_delta = value;
    } else if (args.param == "epsilon") {
      cfg.epsilon = value;
    } else if (args.param == "k-iters") {
      cfg.k_iters = static_cast<int>(value);
    } else if (args.param == "bounds") {
      // Additive corridor half-width around the prior masses.
      Vector lo = (prior.r.array() - value).cwiseMax(0.0);
      Vector up = prior.r.array() + value;
      corridor = dbot::Bounds{dbot::Histogram(lo), dbot::Histogram(up)};
      custom_corridor = true;
    } else {
      throw dbot::DbotError("unknown sweep parameter '" + args.param + "'");
    }

    const double loss = dbot::dbot_loss(batch, prior, cfg);

    dbot::InferenceResult inf;
    if (custom_corridor) {
      dbot::TransportProblem p;
      p.cost = dbot::cost_from_logits(batch, std::nullopt);
      p.source = dbot::Histogram::uniform(batch.samples());
      p.bounds = corridor;
      p.epsilon = cfg.epsilon;
      dbot::SolverConfig scfg;
      scfg.variant = dbot::Variant::bregman;
      const auto sol = dbot::solve_bregman(p, scfg);
      inf.predictions = dbot::plain_argmax(sol.coupling.plan);
      inf.column_masses = sol.coupling.col_sums();
      inf.iterations = sol.iterations;
      inf.converged = sol.converged;
      inf.coupling = sol.coupling;
    } else {
      inf = dbot::dbot_infer(batch, prior, infer_delta, cfg.epsilon);
    }
    const double acc = dbot::accuracy(inf.predictions, *batch.labels);
    const dbot::Bounds check =
        custom_corridor ? corridor : dbot::dbot_bounds(prior, infer_delta);
    const double violation = inf.coupling.col_violation(check);

    table << args.param << ',' << dbot::format_double(value) << ','
          << dbot::format_double(loss) << ',' << dbot::format_double(acc) << ','
          << inf.iterations << ',' << (inf.converged ? 1 : 0) << ','
          << dbot::format_double(violation) << '\n';
  }

  if (!args.out.empty()) {
    std::ofstream f(args.out);
    if (!f) throw dbot::DbotError(args.out + ": cannot open for writing");
    f << table.str();
  }
  std::cout << table.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "doubly-bounded entropic optimal transport: solvers, clustering, long-tailed "
      "inference"};
  app.set_config("--config", "", "key=value config file; command-line flags win");
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_flag("--no-timestamp", global.no_timestamp,
               "omit the timestamp field from JSON outputs");

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "solve one DB-OT instance from CSV inputs");
  solve->add_option("cost", solve_args.cost, "cost matrix CSV")->required();
  solve->add_option("a", solve_args.a, "source histogram CSV")->required();
  solve->add_option("lower", solve_args.lower, "lower bound CSV")->required();
  solve->add_option("upper", solve_args.upper, "upper bound CSV (inf allowed)")->required();
  solve->add_option("--epsilon", solve_args.epsilon, "entropic regularization");
  solve->add_option("--variant", solve_args.variant, "bregman|sinkhorn_knopp|dual|vanilla|all");
  solve->add_option("--tol", solve_args.tol, "plan-change stopping tolerance");
  solve->add_option("--max-iter", solve_args.max_iter, "iteration cap");
  solve->add_flag("--log-domain", solve_args.log_domain, "force potential-space updates");
  solve->add_option("--check-every", solve_args.check_every, "cycles between checks");
  solve->add_option("--out", solve_args.out, "solution JSON path");
  solve->add_option("--coupling-csv", solve_args.coupling_csv, "also export the plan as CSV");

  ClusterArgs cluster_args;
  auto* cluster = app.add_subcommand("cluster", "bound-controlled barycenter clustering");
  cluster->add_option("data", cluster_args.data, "points CSV, histograms CSV, or JSON")
      ->required();
  cluster->add_option("--k", cluster_args.k, "number of clusters")->required();
  cluster->add_option("--lower", cluster_args.lower,
                      "per-cluster mass lower bound (scalar or CSV)");
  cluster->add_option("--upper", cluster_args.upper,
                      "per-cluster mass upper bound (scalar or CSV)");
  cluster->add_option("--epsilon", cluster_args.epsilon, "assignment regularization");
  cluster->add_option("--outer-iters", cluster_args.outer_iters, "alternation count");
  cluster->add_option("--space", cluster_args.space, "euclidean|wasserstein");
  cluster->add_option("--seed", cluster_args.seed, "kmeans++ seed");
  cluster->add_option("--labels", cluster_args.labels, "true labels CSV (adds purity)");
  cluster->add_flag("--no-reweight", cluster_args.no_reweight,
                    "disable the argmax mask in centroid updates");
  cluster->add_flag("--until-stable", cluster_args.until_stable,
                    "stop once centroids move < 1e-6");
  cluster->add_option("--epsilon-bary", cluster_args.epsilon_bary,
                      "barycenter regularization (wasserstein space)");
  cluster->add_option("--grid", cluster_args.grid, "H W grid for CSV histograms")->expected(2);
  cluster->add_option("--grid-exponent", cluster_args.grid_exponent, "distance exponent");
  cluster->add_option("--out", cluster_args.out, "result JSON path");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "testing-time DB-OT class predictions");
  infer->add_option("logits", infer_args.logits, "logits CSV")->required();
  infer->add_option("--prior", infer_args.prior, "class prior CSV (default uniform)");
  infer->add_option("--delta", infer_args.delta, "bound rate around the prior");
  infer->add_option("--epsilon", infer_args.epsilon, "entropic regularization");
  infer->add_option("--tol", infer_args.tol, "solver tolerance");
  infer->add_option("--max-iter", infer_args.max_iter, "solver iteration cap");
  infer->add_option("--baseline", infer_args.baseline, "none|logit-adjust");
  infer->add_option("--counts", infer_args.counts, "class counts CSV for logit-adjust");
  infer->add_option("--tau", infer_args.tau, "logit-adjust strength");
  infer->add_option("--predictions", infer_args.predictions, "predictions CSV path");
  infer->add_option("--diagnostics", infer_args.diagnostics, "diagnostics JSON path");

  LossArgs loss_args;
  auto* loss = app.add_subcommand("loss", "DB-OT classification loss and gradient");
  loss->add_option("logits", loss_args.logits, "logits CSV")->required();
  loss->add_option("labels", loss_args.labels, "labels CSV")->required();
  loss->add_option("--prior", loss_args.prior, "class prior CSV")->required();
  loss->add_option("--delta", loss_args.delta, "bound rate");
  loss->add_option("--k-iters", loss_args.k_iters, "unrolled scaling cycles");
  loss->add_option("--epsilon", loss_args.epsilon, "entropic regularization");
  loss->add_option("--shift-c", loss_args.shift_c, "cost shift (default max logit + 1)");
  loss->add_option("--grad", loss_args.grad_out, "write the logit gradient CSV here");
  loss->add_flag("--fd-check", loss_args.fd_check,
                 "print the max relative error vs central differences");

  CompareArgs compare_args;
  auto* compare = app.add_subcommand(
      "compare", "run all variants, the lockstep identity, and the 2x2 grid oracle");
  compare->add_option("cost", compare_args.cost, "cost matrix CSV")->required();
  compare->add_option("a", compare_args.a, "source histogram CSV")->required();
  compare->add_option("lower", compare_args.lower, "lower bound CSV")->required();
  compare->add_option("upper", compare_args.upper, "upper bound CSV")->required();
  compare->add_option("--epsilon", compare_args.epsilon, "entropic regularization");
  compare->add_option("--iters", compare_args.iters, "lockstep iterations");
  compare->add_option("--tol", compare_args.tol, "solver tolerance");
  compare->add_option("--max-iter", compare_args.max_iter, "solver iteration cap");
  compare->add_option("--resolution", compare_args.resolution, "grid oracle resolution");
  compare->add_option("--out", compare_args.out, "report JSON path");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "grid a parameter and tabulate metrics");
  sweep->add_option("--param", sweep_args.param, "delta|epsilon|k-iters|bounds")->required();
  sweep->add_option("--grid", sweep_args.grid, "comma-separated grid values")->delimiter(',');
  sweep->add_option("--logits", sweep_args.logits, "logits CSV")->required();
  sweep->add_option("--labels", sweep_args.labels, "labels CSV")->required();
  sweep->add_option("--prior", sweep_args.prior, "class prior CSV")->required();
  sweep->add_option("--delta", sweep_args.delta, "base training bound rate");
  sweep->add_option("--epsilon", sweep_args.epsilon, "base regularization");
  sweep->add_option("--k-iters", sweep_args.k_iters, "base scaling cycles");
  sweep->add_option("--infer-delta", sweep_args.infer_delta, "base inference bound rate");
  sweep->add_option("--out", sweep_args.out, "table CSV path (also printed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (solve->parsed()) return run_solve(solve_args, global);
    if (cluster->parsed()) return run_cluster(cluster_args, global);
    if (infer->parsed()) return run_infer(infer_args, global);
    if (loss->parsed()) return run_loss(loss_args, global);
    if (compare->parsed()) return run_compare(compare_args, global);
    if (sweep->parsed()) return run_sweep(sweep_args, global);
  } catch (const dbot::InfeasibleProblemError& e) {
    return reject(e.report);
  } catch (const dbot::DbotError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}
