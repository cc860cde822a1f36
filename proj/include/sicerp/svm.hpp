#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "sicerp/kernels.hpp"

namespace sicerp {

struct LabeledKernelSet {
  Eigen::MatrixXd gram;    // k, without the 1/C ridge
  Eigen::VectorXd labels;  // +1 / -1
  double c = 1.0;
};

/// Smallest enclosing sphere in feature space: maximizer of
/// sum a_i k_ii - a^T K a over the probability simplex.
struct RadiusSolution {
  Eigen::VectorXd alpha;
  double r_squared = 0.0;
  int iterations = 0;
};

/// L2-soft-margin SVM dual on k + (1/C) I.
struct SvmDual {
  Eigen::VectorXd eta;
  double w_norm_squared = 0.0;  // 2 x optimal dual objective
  double bias = 0.0;
  int iterations = 0;
};

struct QpOptions {
  double tol = 1e-10;  // maximal-violating-pair gap
  int max_iter = 1000000;
};

// Diagonal shift that makes a Gram usable: 0 if its smallest eigenvalue is
// >= -1e-8, otherwise -lambda_min + 1e-10.
double psd_shift(const Eigen::MatrixXd& gram);

RadiusSolution solve_radius(const Eigen::MatrixXd& gram, const QpOptions& opts = {});
SvmDual solve_svm_l2(const LabeledKernelSet& set, const QpOptions& opts = {});

// Largest KKT violation: |d_i^2 - R^2| for alpha_i > 0, max(0, d_i^2 - R^2) otherwise,
// where d_i is the feature-space distance of sample i to the sphere centre.
double radius_kkt_violation(const Eigen::MatrixXd& gram, const RadiusSolution& sol);
// Largest violation of l_i f(x_i) = 1 (eta_i > 0) or l_i f(x_i) >= 1 (eta_i = 0) on k + I/C.
double svm_kkt_violation(const LabeledKernelSet& set, const SvmDual& dual);

/// One binary subproblem over a subset of a cached dataset.
struct BinaryProblem {
  std::vector<std::size_t> subset;  // indices into the block cache
  Eigen::VectorXd labels;           // +1 / -1, aligned with subset
};

struct PairEvaluation {
  double j = 0.0;
  double shift = 0.0;
  RadiusSolution radius;
  SvmDual dual;
};

struct RadiusMarginEvaluation {
  double j = 0.0;  // sum over problems of R^2 ||w||^2
  std::vector<PairEvaluation> pairs;
};

RadiusMarginEvaluation radius_margin_objective(const HierarchyWeights& w, const BlockCache& cache,
                                               std::span<const BinaryProblem> problems, double c,
                                               const QpOptions& opts = {});

// Gradient of the summed objective at the solved duals (envelope theorem).
// Returns T entries for beta-parameterized integrators (single, beta, mkl),
// T*T column-major entries for M, and nothing for emk.
Eigen::VectorXd gradient_weights(const HierarchyWeights& w, const BlockCache& cache,
                                 std::span<const BinaryProblem> problems,
                                 const RadiusMarginEvaluation& at);

// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);
// Symmetrizes, then projects the flattened entries onto the simplex.
Eigen::MatrixXd project_simplex(const Eigen::MatrixXd& m);

struct OptimizeOptions {
  int max_iter = 100;      // I
  double tau = 1e-5;       // stop once |J_{i+1} - J_i| <= tau J_i
  int max_halvings = 30;
  QpOptions qp;
};

struct OptimizeResult {
  HierarchyWeights weights;
  std::vector<double> j_trace;  // J of every accepted iterate, starting with the initial weights
  RadiusMarginEvaluation final_eval;
  int iterations = 0;
  bool converged = false;  // stopped by the tau rule or a stationary line search
  int shifts = 0;          // evaluations that needed a PSD shift
};

// Projected gradient with backtracking on the summed radius-margin bound,
// starting from uniform weights (or `start` when given).
OptimizeResult optimize_weights(Integrator kind, const BlockCache& cache,
                                std::span<const BinaryProblem> problems, double c,
                                const OptimizeOptions& opts = {},
                                const HierarchyWeights* start = nullptr);

struct TrainConfig {
  Integrator integrator = Integrator::Beta;
  double c = 1.0;
  Eigen::Index level = 0;  // for Integrator::Single
  OptimizeOptions optimize;
};

struct PairModel {
  std::size_t positive = 0;  // class index voted for when the decision is > 0
  std::size_t negative = 0;
  std::vector<std::size_t> support;  // indices into TrainedClassifier::support
  std::vector<double> coef;          // eta_i * l_i
  double bias = 0.0;
};

struct RepresentationSpec {
  std::string kind = "hierarchy";  // cov | invcov | sice | hierarchy
  int levels = 10;
  double ratio = 0.01;
  double eps = 1e-7;
};

struct TrainedClassifier {
  static constexpr int kFormatVersion = 1;

  RepresentationSpec representation;
  HierarchyWeights weights;
  KernelConfig kernel;
  double c = 1.0;
  Eigen::Index levels = 0;
  Eigen::Index dim = 0;
  std::vector<std::string> classes;  // sorted
  std::vector<PairModel> pairs;
  std::vector<SiceHierarchy> support;
  std::vector<LogHierarchy> support_logs;
  std::vector<double> j_trace;
  // Cache index of every support sample; only set by train_multiclass.
  std::vector<std::size_t> support_source;

  // Recomputes support_logs from support.
  void refresh_logs();
};

struct TrainingData {
  const BlockCache* cache = nullptr;
  std::span<const SiceHierarchy> samples;  // aligned with the cache
  std::span<const std::string> labels;
  std::span<const std::size_t> subset;  // training indices; empty means all
};

TrainedClassifier train_multiclass(const TrainingData& data, const TrainConfig& cfg,
                                   const KernelConfig& kernel, const RepresentationSpec& rep = {});

struct Prediction {
  std::string label;
  std::map<std::string, int> votes;
  std::vector<double> decision_values;  // one per pair, model.pairs order
};

Prediction predict(const TrainedClassifier& model, const SiceHierarchy& sample);
// Same decision rule, with kernel values taken from the cache the model was trained on.
Prediction predict_cached(const TrainedClassifier& model, const BlockCache& cache, std::size_t index);

}  // namespace sicerp
