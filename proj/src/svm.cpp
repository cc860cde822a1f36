#include "sicerp/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "sicerp/simd.hpp"

namespace sicerp {

namespace {

void require_square_symmetric(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols() || k.rows() == 0) throw Error(ErrorKind::DimensionError, "Gram must be square");
  if (!k.allFinite()) throw Error(ErrorKind::InvalidMatrix, "Gram has non-finite entries");
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::InvalidMatrix, "Gram is not symmetric");
  }
}

void require_binary_labels(const Eigen::VectorXd& labels, Eigen::Index n) {
  if (labels.size() != n) throw Error(ErrorKind::DimensionError, "label count does not match Gram");
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels(i) == 1.0) pos = true;
    else if (labels(i) == -1.0) neg = true;
    else throw Error(ErrorKind::DegenerateLabels, "binary labels must be +1 or -1");
  }
  if (!pos || !neg) throw Error(ErrorKind::DegenerateLabels, "both classes must be present");
}

}  // namespace

double psd_shift(const Eigen::MatrixXd& gram) {
  const double lo = min_eigenvalue(gram);
  return lo >= -1e-8 ? 0.0 : -lo + 1e-10;
}

RadiusSolution solve_radius(const Eigen::MatrixXd& gram, const QpOptions& opts) {
  require_square_symmetric(gram);
  if (min_eigenvalue(gram) < -1e-8) {
    throw Error(ErrorKind::IndefiniteKernel, "radius problem needs a PSD Gram");
  }
  const Eigen::Index n = gram.rows();
  const Eigen::VectorXd diag = gram.diagonal();
  RadiusSolution sol;
  sol.alpha = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  // g_i = k_ii - 2 (K alpha)_i is the gradient of the (concave) objective.
  Eigen::VectorXd g = diag - 2.0 * gram * sol.alpha;

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    Eigen::Index up = 0, down = -1;
    double g_up = -std::numeric_limits<double>::infinity();
    double g_down = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (g(i) > g_up) {
        g_up = g(i);
        up = i;
      }
      if (sol.alpha(i) > 0.0 && g(i) < g_down) {
        g_down = g(i);
        down = i;
      }
    }
    if (down < 0 || up == down || g_up - g_down <= opts.tol) break;

    const double curvature = gram(up, up) + gram(down, down) - 2.0 * gram(up, down);
    double t = curvature > 0.0 ? (g_up - g_down) / (2.0 * curvature) : sol.alpha(down);
    if (t >= sol.alpha(down)) {
      t = sol.alpha(down);
      sol.alpha(down) = 0.0;
    } else {
      sol.alpha(down) -= t;
    }
    sol.alpha(up) += t;
    g -= 2.0 * t * (gram.col(up) - gram.col(down));
    if ((it + 1) % 1000 == 0) g = diag - 2.0 * gram * sol.alpha;
  }
  sol.iterations = it;
  sol.r_squared = std::max(0.0, sol.alpha.dot(diag) - sol.alpha.dot(gram * sol.alpha));
  return sol;
}

SvmDual solve_svm_l2(const LabeledKernelSet& set, const QpOptions& opts) {
  require_square_symmetric(set.gram);
  const Eigen::Index n = set.gram.rows();
  require_binary_labels(set.labels, n);
  if (!(set.c > 0.0)) throw Error(ErrorKind::ConfigError, "C must be positive");

  Eigen::MatrixXd kt = set.gram;
  kt.diagonal().array() += 1.0 / set.c;
  const Eigen::VectorXd& y = set.labels;

  SvmDual dual;
  dual.eta = Eigen::VectorXd::Zero(n);
  // Gradient of 0.5 eta^T Q eta - sum eta, Q = diag(y) kt diag(y).
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);

  auto select = [&](Eigen::Index& up, Eigen::Index& low, double& m_up, double& m_low) {
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    up = low = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y(t) * grad(t);
      if ((y(t) > 0 || dual.eta(t) > 0) && v > m_up) {
        m_up = v;
        up = t;
      }
      if ((y(t) < 0 || dual.eta(t) > 0) && v < m_low) {
        m_low = v;
        low = t;
      }
    }
  };

  int it = 0;
  Eigen::Index i, j;
  double m_up, m_low;
  for (; it < opts.max_iter; ++it) {
    select(i, j, m_up, m_low);
    if (i < 0 || j < 0 || m_up - m_low <= opts.tol) break;
    const double curvature = std::max(kt(i, i) + kt(j, j) - 2.0 * kt(i, j), 1e-300);
    double t = (m_up - m_low) / curvature;
    if (y(i) < 0) t = std::min(t, dual.eta(i));
    if (y(j) > 0) t = std::min(t, dual.eta(j));
    dual.eta(i) += y(i) * t;
    dual.eta(j) -= y(j) * t;
    if (dual.eta(i) < 0.0) dual.eta(i) = 0.0;
    if (dual.eta(j) < 0.0) dual.eta(j) = 0.0;
    grad += t * y.cwiseProduct(kt.col(i) - kt.col(j));
    if ((it + 1) % 1000 == 0) grad = y.cwiseProduct(kt * y.cwiseProduct(dual.eta)) - Eigen::VectorXd::Ones(n);
  }
  dual.iterations = it;

  const Eigen::VectorXd ye = y.cwiseProduct(dual.eta);
  const Eigen::VectorXd f = kt * ye;  // decision value without bias
  grad = y.cwiseProduct(f) - Eigen::VectorXd::Ones(n);
  const double objective = dual.eta.sum() - 0.5 * ye.dot(f);
  dual.w_norm_squared = std::max(0.0, 2.0 * objective);

  double bias_sum = 0.0;
  int free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (dual.eta(t) > 0.0) {
      bias_sum += -y(t) * grad(t);
      ++free;
    }
  }
  if (free > 0) {
    dual.bias = bias_sum / free;
  } else {
    select(i, j, m_up, m_low);
    dual.bias = 0.5 * (m_up + m_low);
  }
  return dual;
}

double radius_kkt_violation(const Eigen::MatrixXd& gram, const RadiusSolution& sol) {
  const Eigen::VectorXd ka = gram * sol.alpha;
  const double aka = sol.alpha.dot(ka);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    const double dist = gram(i, i) - 2.0 * ka(i) + aka;
    const double gap = dist - sol.r_squared;
    worst = std::max(worst, sol.alpha(i) > 0.0 ? std::abs(gap) : std::max(0.0, gap));
  }
  return worst;
}

double svm_kkt_violation(const LabeledKernelSet& set, const SvmDual& dual) {
  Eigen::MatrixXd kt = set.gram;
  kt.diagonal().array() += 1.0 / set.c;
  const Eigen::VectorXd f = kt * set.labels.cwiseProduct(dual.eta);
  double worst = std::abs(set.labels.dot(dual.eta));
  for (Eigen::Index i = 0; i < kt.rows(); ++i) {
    const double margin = set.labels(i) * (f(i) + dual.bias) - 1.0;
    worst = std::max(worst, dual.eta(i) > 0.0 ? std::abs(margin) : std::max(0.0, -margin));
    worst = std::max(worst, -dual.eta(i));
  }
  return worst;
}

RadiusMarginEvaluation radius_margin_objective(const HierarchyWeights& w, const BlockCache& cache,
                                               std::span<const BinaryProblem> problems, double c,
                                               const QpOptions& opts) {
  w.validate(static_cast<Eigen::Index>(cache.levels()));
  const Eigen::MatrixXd effective = w.effective(static_cast<Eigen::Index>(cache.levels()));
  RadiusMarginEvaluation out;
  out.pairs.reserve(problems.size());
  for (const auto& problem : problems) {
    Eigen::MatrixXd k = cache.gram_effective(effective, problem.subset);
    PairEvaluation pe;
    pe.shift = psd_shift(k);
    if (pe.shift > 0.0) k.diagonal().array() += pe.shift;
    pe.radius = solve_radius(k, opts);
    pe.dual = solve_svm_l2(LabeledKernelSet{k, problem.labels, c}, opts);
    pe.j = pe.radius.r_squared * pe.dual.w_norm_squared;
    out.j += pe.j;
    out.pairs.push_back(std::move(pe));
  }
  return out;
}

Eigen::VectorXd gradient_weights(const HierarchyWeights& w, const BlockCache& cache,
                                 std::span<const BinaryProblem> problems,
                                 const RadiusMarginEvaluation& at) {
  if (at.pairs.size() != problems.size()) throw Error(ErrorKind::StaleDuals, "evaluation/problem count mismatch");
  const std::size_t t = cache.levels();
  std::vector<double> acc(t * t, 0.0);  // row-major dJ/dW

  for (std::size_t p = 0; p < problems.size(); ++p) {
    const auto& problem = problems[p];
    const auto& pe = at.pairs[p];
    const auto n = static_cast<Eigen::Index>(problem.subset.size());
    const Eigen::VectorXd& alpha = pe.radius.alpha;
    const Eigen::VectorXd& eta = pe.dual.eta;
    if (alpha.size() != n || eta.size() != n) throw Error(ErrorKind::StaleDuals, "dual size mismatch");
    const double feasibility = std::max({std::abs(alpha.sum() - 1.0), std::abs(eta.dot(problem.labels)),
                                         std::max(0.0, -alpha.minCoeff()), std::max(0.0, -eta.minCoeff())});
    if (feasibility > 1e-6) throw Error(ErrorKind::StaleDuals, "duals are not feasible");

    const double w2 = pe.dual.w_norm_squared;
    const double r2 = pe.radius.r_squared;
    const Eigen::VectorXd ye = problem.labels.cwiseProduct(eta);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = a; b < n; ++b) {
        double coef = -w2 * alpha(a) * alpha(b) - r2 * ye(a) * ye(b);
        if (a == b) coef += w2 * alpha(a);
        else coef *= 2.0;
        if (coef == 0.0) continue;
        const auto s = cache.stored_block(problem.subset[a], problem.subset[b]);
        simd::active().axpy(coef, s.data(), acc.data(), acc.size());
      }
    }
  }

  Eigen::MatrixXd g(t, t);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c = 0; c < t; ++c) g(r, c) = acc[r * t + c];

  switch (w.kind) {
    case Integrator::Single:
    case Integrator::Beta:
      return (g + g.transpose()) * w.beta;
    case Integrator::Mkl:
      return g.diagonal();
    case Integrator::M:
      return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    case Integrator::Emk:
      return {};
  }
  return {};
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) return v;
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

Eigen::MatrixXd project_simplex(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(sym.data(), sym.size());
  const Eigen::VectorXd p = project_simplex(flat);
  Eigen::MatrixXd out = Eigen::Map<const Eigen::MatrixXd>(p.data(), m.rows(), m.cols());
  return 0.5 * (out + out.transpose());
}

namespace {

Eigen::VectorXd parameters(const HierarchyWeights& w) {
  if (w.kind == Integrator::M) return Eigen::Map<const Eigen::VectorXd>(w.m.data(), w.m.size());
  return w.beta;
}

HierarchyWeights with_parameters(const HierarchyWeights& base, const Eigen::VectorXd& p) {
  HierarchyWeights w = base;
  if (w.kind == Integrator::M) {
    const auto t = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(p.size()))));
    w.m = project_simplex(Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(p.data(), t, t)));
  } else {
    w.beta = project_simplex(p);
  }
  return w;
}

int count_shifts(const RadiusMarginEvaluation& e) {
  return static_cast<int>(std::count_if(e.pairs.begin(), e.pairs.end(), [](const PairEvaluation& p) {
    return p.shift > 0.0;
  }));
}

}  // namespace

OptimizeResult optimize_weights(Integrator kind, const BlockCache& cache,
                                std::span<const BinaryProblem> problems, double c,
                                const OptimizeOptions& opts, const HierarchyWeights* start) {
  const auto levels = static_cast<Eigen::Index>(cache.levels());
  OptimizeResult res;
  res.weights = start ? *start : HierarchyWeights::uniform(kind, levels);
  res.weights.kind = kind;
  res.final_eval = radius_margin_objective(res.weights, cache, problems, c, opts.qp);
  res.shifts = count_shifts(res.final_eval);
  res.j_trace.push_back(res.final_eval.j);

  const bool fixed = kind == Integrator::Single || kind == Integrator::Emk || levels == 1;
  if (fixed) {
    res.converged = true;
    return res;
  }

  double trust = 1.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    Eigen::VectorXd grad;
    try {
      grad = gradient_weights(res.weights, cache, problems, res.final_eval);
    } catch (const Error& e) {
      throw Error(e.kind(), "iteration " + std::to_string(it) + ": " + e.message());
    }
    const double gmax = grad.cwiseAbs().maxCoeff();
    if (!(gmax > 0.0) || !std::isfinite(gmax)) {
      res.converged = true;
      break;
    }

    const Eigen::VectorXd current = parameters(res.weights);
    double step = trust / gmax;
    bool accepted = false;
    HierarchyWeights candidate;
    RadiusMarginEvaluation eval;
    for (int h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
      candidate = with_parameters(res.weights, current - step * grad);
      if ((parameters(candidate) - current).cwiseAbs().maxCoeff() <= 1e-15) break;
      eval = radius_margin_objective(candidate, cache, problems, c, opts.qp);
      res.shifts += count_shifts(eval);
      if (eval.j < res.final_eval.j) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;
      break;
    }

    const double previous = res.final_eval.j;
    res.weights = std::move(candidate);
    res.final_eval = std::move(eval);
    res.j_trace.push_back(res.final_eval.j);
    res.iterations = it;
    trust = std::min(1.0, 2.0 * step * gmax);
    if (std::abs(res.final_eval.j - previous) <= opts.tau * previous) {
      res.converged = true;
      break;
    }
  }
  return res;
}

void TrainedClassifier::refresh_logs() {
  support_logs.clear();
  support_logs.reserve(support.size());
  for (const auto& h : support) support_logs.push_back(log_images(h));
}

TrainedClassifier train_multiclass(const TrainingData& data, const TrainConfig& cfg,
                                   const KernelConfig& kernel, const RepresentationSpec& rep) {
  if (data.cache == nullptr) throw Error(ErrorKind::ConfigError, "training needs a block cache");
  const BlockCache& cache = *data.cache;
  const std::size_t n = data.samples.size();
  if (n != cache.size() || data.labels.size() != n) {
    throw Error(ErrorKind::DimensionError, "samples, labels and cache disagree in size");
  }
  std::vector<std::size_t> rows(data.subset.begin(), data.subset.end());
  if (rows.empty()) {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  std::sort(rows.begin(), rows.end());
  if (rows.back() >= n) throw Error(ErrorKind::DimensionError, "training subset index out of range");

  std::set<std::string> class_set;
  for (std::size_t i : rows) class_set.insert(data.labels[i]);
  if (class_set.size() < 2) throw Error(ErrorKind::DegenerateLabels, "need at least two classes");
  TrainedClassifier model;
  model.classes.assign(class_set.begin(), class_set.end());
  std::vector<std::vector<std::size_t>> members(model.classes.size());
  for (std::size_t i : rows) {
    const auto pos = std::lower_bound(model.classes.begin(), model.classes.end(), data.labels[i]) -
                     model.classes.begin();
    members[pos].push_back(i);
  }
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (members[k].size() < 2) {
      throw Error(ErrorKind::InsufficientClass, "class '" + model.classes[k] + "' has fewer than 2 samples");
    }
  }

  std::vector<BinaryProblem> problems;
  std::vector<std::pair<std::size_t, std::size_t>> class_pairs;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      BinaryProblem pr;
      std::merge(members[a].begin(), members[a].end(), members[b].begin(), members[b].end(),
                 std::back_inserter(pr.subset));
      pr.labels.resize(static_cast<Eigen::Index>(pr.subset.size()));
      for (std::size_t k = 0; k < pr.subset.size(); ++k) {
        pr.labels(static_cast<Eigen::Index>(k)) = data.labels[pr.subset[k]] == model.classes[a] ? 1.0 : -1.0;
      }
      problems.push_back(std::move(pr));
      class_pairs.emplace_back(a, b);
    }
  }

  const auto levels = static_cast<Eigen::Index>(cache.levels());
  OptimizeResult opt;
  if (cfg.integrator == Integrator::Single) {
    const HierarchyWeights start = HierarchyWeights::single(levels, cfg.level);
    opt = optimize_weights(Integrator::Single, cache, problems, cfg.c, cfg.optimize, &start);
  } else {
    opt = optimize_weights(cfg.integrator, cache, problems, cfg.c, cfg.optimize);
  }

  model.representation = rep;
  model.weights = opt.weights;
  model.kernel = kernel;
  model.c = cfg.c;
  model.levels = levels;
  model.dim = data.samples[rows.front()].dim();
  model.j_trace = opt.j_trace;

  std::vector<long> support_pos(n, -1);
  for (std::size_t p = 0; p < problems.size(); ++p) {
    const auto& dual = opt.final_eval.pairs[p].dual;
    PairModel pm;
    pm.positive = class_pairs[p].first;
    pm.negative = class_pairs[p].second;
    pm.bias = dual.bias;
    for (std::size_t k = 0; k < problems[p].subset.size(); ++k) {
      const double eta = dual.eta(static_cast<Eigen::Index>(k));
      if (eta <= 0.0) continue;
      const std::size_t idx = problems[p].subset[k];
      if (support_pos[idx] < 0) support_pos[idx] = 0;  // mark; positions assigned below
      pm.support.push_back(idx);
      pm.coef.push_back(eta * problems[p].labels(static_cast<Eigen::Index>(k)));
    }
    model.pairs.push_back(std::move(pm));
  }
  // Support samples in dataset order.
  for (std::size_t i = 0; i < n; ++i) {
    if (support_pos[i] < 0) continue;
    support_pos[i] = static_cast<long>(model.support.size());
    model.support.push_back(data.samples[i]);
    model.support_source.push_back(i);
  }
  for (auto& pm : model.pairs) {
    for (auto& idx : pm.support) idx = static_cast<std::size_t>(support_pos[idx]);
  }
  model.refresh_logs();
  return model;
}

namespace {

Prediction vote(const TrainedClassifier& model, const std::vector<double>& kval) {
  Prediction out;
  std::vector<int> votes(model.classes.size(), 0);
  std::vector<double> strength(model.classes.size(), 0.0);
  for (const auto& pm : model.pairs) {
    double f = pm.bias;
    for (std::size_t k = 0; k < pm.support.size(); ++k) f += pm.coef[k] * kval[pm.support[k]];
    out.decision_values.push_back(f);
    const std::size_t winner = f > 0.0 ? pm.positive : pm.negative;
    ++votes[winner];
    strength[winner] += std::abs(f);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < votes.size(); ++k) {
    if (votes[k] > votes[best] || (votes[k] == votes[best] && strength[k] > strength[best])) best = k;
  }
  out.label = model.classes[best];
  for (std::size_t k = 0; k < votes.size(); ++k) out.votes[model.classes[k]] = votes[k];
  return out;
}

}  // namespace

Prediction predict(const TrainedClassifier& model, const SiceHierarchy& sample) {
  if (static_cast<Eigen::Index>(sample.size()) != model.levels || sample.dim() != model.dim) {
    throw Error(ErrorKind::ModelMismatch, "sample " + sample.sample_id + " has " +
                                              std::to_string(sample.size()) + " levels of dimension " +
                                              std::to_string(sample.dim()) + ", model expects " +
                                              std::to_string(model.levels) + " x " + std::to_string(model.dim));
  }
  if (model.support_logs.size() != model.support.size()) {
    throw Error(ErrorKind::ModelMismatch, "model support logs are not initialised");
  }
  const LogHierarchy x = log_images(sample);
  const Eigen::MatrixXd effective = model.weights.effective(model.levels);

  std::vector<double> kval(model.support.size());
  for (std::size_t s = 0; s < model.support.size(); ++s) {
    kval[s] = effective.cwiseProduct(gram_block(model.support_logs[s], x, model.kernel).values).sum();
  }
  return vote(model, kval);
}

Prediction predict_cached(const TrainedClassifier& model, const BlockCache& cache, std::size_t index) {
  if (model.support_source.size() != model.support.size() ||
      static_cast<Eigen::Index>(cache.levels()) != model.levels || index >= cache.size()) {
    throw Error(ErrorKind::ModelMismatch, "model was not trained on this cache");
  }
  const Eigen::MatrixXd effective = model.weights.effective(model.levels);
  std::vector<double> kval(model.support.size());
  for (std::size_t s = 0; s < model.support.size(); ++s) {
    kval[s] = effective.cwiseProduct(cache.block(model.support_source[s], index).values).sum();
  }
  return vote(model, kval);
}

}  // namespace sicerp
