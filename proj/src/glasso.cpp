#include "sicerp/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sicerp/simd.hpp"

namespace sicerp {

SampleCovariance::SampleCovariance(SymMatrix m) : m_(std::move(m)) {
  if (m_.dim() == 0) throw Error(ErrorKind::DimensionError, "empty covariance");
  const Eigen::MatrixXd& a = m_.matrix();
  if ((a.diagonal().array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidMatrix, "covariance has a negative diagonal entry");
  }
  const double trace = a.trace();
  if (min_eigenvalue(a) < -1e-10 * std::max(trace, 0.0)) {
    throw Error(ErrorKind::InvalidMatrix, "covariance is not positive semidefinite");
  }
}

namespace {

void check_dims(const SampleCovariance& sigma, Eigen::Index d) {
  if (sigma.dim() != d) {
    throw Error(ErrorKind::DimensionError, "covariance is " + std::to_string(sigma.dim()) +
                                               "-dim, estimate is " + std::to_string(d) + "-dim");
  }
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::ConfigError, "penalty must be finite and nonnegative");
  }
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Inverse of an SPD matrix via Cholesky; nullopt if the factorization fails.
std::optional<Eigen::MatrixXd> spd_inverse(const Eigen::MatrixXd& s) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
}

double kkt_from_inverse(const Eigen::MatrixXd& sigma, double lambda, const Eigen::MatrixXd& s,
                        const Eigen::MatrixXd& w) {
  double worst = 0.0;
  const Eigen::Index d = s.rows();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double gap = w(i, j) - sigma(i, j);
      const double sij = s(i, j);
      double r;
      if (std::abs(sij) > kKktZeroThreshold) {
        r = std::abs(gap - lambda * (sij > 0.0 ? 1.0 : -1.0));
      } else {
        r = std::max(0.0, std::abs(gap) - lambda);
      }
      worst = std::max(worst, r);
    }
  }
  return worst;
}

double log_det_spd(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

// Block coordinate descent state: W is the running estimate of S^-1, column j
// of B holds the lasso coefficients for column j (B(j, j) unused, kept at 0).
class GlassoState {
 public:
  GlassoState(const Eigen::MatrixXd& sigma, double lambda) : sigma_(sigma), lambda_(lambda) {
    const Eigen::Index d = sigma.rows();
    w_ = sigma;
    w_.diagonal().array() += lambda;
    b_ = Eigen::MatrixXd::Zero(d, d);
    v_.resize(d);
  }

  // Starts from a previous estimate. Returns false when the warm start does not
  // give a positive definite W after resetting its diagonal.
  bool warm_start(const Eigen::MatrixXd& s0) {
    auto w0 = spd_inverse(s0);
    if (!w0) return false;
    Eigen::MatrixXd w = *w0;
    w.diagonal() = sigma_.diagonal().array() + lambda_;
    if (Eigen::LLT<Eigen::MatrixXd>(w).info() != Eigen::Success) return false;
    w_ = w;
    for (Eigen::Index j = 0; j < s0.cols(); ++j) {
      b_.col(j) = -s0.col(j) / s0(j, j);
      b_(j, j) = 0.0;
    }
    return true;
  }

  void sweep() {
    const Eigen::Index d = w_.rows();
    for (Eigen::Index j = 0; j < d; ++j) update_column(j);
  }

  Eigen::MatrixXd precision() const {
    const Eigen::Index d = w_.rows();
    Eigen::MatrixXd s(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      double w12_beta = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        if (k != j) w12_beta += w_(k, j) * b_(k, j);
      }
      const double sjj = 1.0 / (w_(j, j) - w12_beta);
      // Adding +0 turns the -0 of zero coefficients into +0.
      s.col(j) = (-b_.col(j) * sjj).array() + 0.0;
      s(j, j) = sjj;
    }
    return s;
  }

  const Eigen::MatrixXd& covariance() const { return w_; }

 private:
  void update_column(Eigen::Index j) {
    const Eigen::Index d = w_.rows();
    const auto n = static_cast<std::size_t>(d);
    double* beta = b_.col(j).data();
    beta[j] = 0.0;
    // v = W * beta over the full column; entry j is never read.
    v_.noalias() = w_ * b_.col(j);

    constexpr int kMaxInnerPasses = 10000;
    for (int pass = 0; pass < kMaxInnerPasses; ++pass) {
      double max_change = 0.0;
      double scale = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        if (k == j) continue;
        const double wkk = w_(k, k);
        const double old = beta[k];
        const double r = sigma_(k, j) - (v_(k) - wkk * old);
        const double next = soft_threshold(r, lambda_) / wkk;
        if (next != old) {
          const double delta = next - old;
          beta[k] = next;
          simd::active().axpy(delta, w_.col(k).data(), v_.data(), n);
          max_change = std::max(max_change, std::abs(delta) * wkk);
        }
        scale = std::max(scale, std::abs(next) * wkk);
      }
      if (max_change <= 1e-13 * std::max(scale, 1.0)) break;
    }

    for (Eigen::Index k = 0; k < d; ++k) {
      if (k == j) continue;
      w_(k, j) = v_(k);
      w_(j, k) = v_(k);
    }
  }

  const Eigen::MatrixXd& sigma_;
  double lambda_;
  Eigen::MatrixXd w_;
  Eigen::MatrixXd b_;
  Eigen::VectorXd v_;
};

}  // namespace

double sice_objective(const SampleCovariance& sigma, double lambda, const SpdMatrix& s) {
  check_dims(sigma, s.dim());
  const Eigen::MatrixXd& sm = s.matrix();
  return log_det_spd(sm) - (sigma.matrix().cwiseProduct(sm)).sum() - lambda * sm.cwiseAbs().sum();
}

double kkt_residual(const SampleCovariance& sigma, double lambda, const SpdMatrix& s) {
  check_dims(sigma, s.dim());
  auto w = spd_inverse(s.matrix());
  if (!w) throw Error(ErrorKind::NotPositiveDefinite, "estimate is not invertible");
  return kkt_from_inverse(sigma.matrix(), lambda, s.matrix(), *w);
}

SiceSolution glasso_solve(const SampleCovariance& sigma, double lambda, const GlassoOptions& opts,
                          const std::optional<SpdMatrix>& warm_start) {
  check_lambda(lambda);
  if (!(opts.tol > 0.0)) throw Error(ErrorKind::ConfigError, "tolerance must be positive");
  if (warm_start) check_dims(sigma, warm_start->dim());

  if (lambda == 0.0) {
    const Eigen::MatrixXd& a = sigma.matrix();
    const double trace = a.trace();
    if (!(trace > 0.0) || min_eigenvalue(a) <= 1e-12 * trace) {
      throw Error(ErrorKind::SingularityError, "lambda = 0 requires an invertible covariance");
    }
    auto inv = spd_inverse(a);
    if (!inv) throw Error(ErrorKind::SingularityError, "covariance is not invertible");
    SiceSolution sol{SpdMatrix(*inv), 0.0, 0.0, 0.0, 0, {}};
    sol.objective = sice_objective(sigma, 0.0, sol.estimate);
    sol.kkt_residual = kkt_residual(sigma, 0.0, sol.estimate);
    return sol;
  }

  GlassoState state(sigma.matrix(), lambda);
  if (warm_start) state.warm_start(warm_start->matrix());

  std::vector<double> trace;
  Eigen::MatrixXd best;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    state.sweep();
    trace.push_back(log_det_spd(state.covariance()));

    Eigen::MatrixXd s = state.precision();
    s = 0.5 * (s + s.transpose()).eval();
    auto w = spd_inverse(s);
    if (!w) continue;
    const double residual = kkt_from_inverse(sigma.matrix(), lambda, s, *w);
    if (residual < best_residual) {
      best_residual = residual;
      best = s;
    }
    if (residual <= opts.tol) {
      SiceSolution sol{SpdMatrix(s), lambda, 0.0, residual, it, std::move(trace)};
      sol.objective = sice_objective(sigma, lambda, sol.estimate);
      return sol;
    }
  }
  std::ostringstream msg;
  msg << "glasso did not reach tol " << opts.tol << " in " << opts.max_iter
      << " sweeps (lambda " << lambda << ", best residual " << best_residual << ")";
  throw NotConvergedError(msg.str(), best, best_residual);
}

int off_diagonal_nonzeros(const Eigen::MatrixXd& s, double threshold) {
  int count = 0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      if (i != j && std::abs(s(i, j)) > threshold) ++count;
    }
  }
  return count;
}

int support_violations(const Eigen::MatrixXd& denser, const Eigen::MatrixXd& sparser,
                       double threshold) {
  int count = 0;
  for (Eigen::Index j = 0; j < denser.cols(); ++j) {
    for (Eigen::Index i = 0; i < denser.rows(); ++i) {
      if (i != j && std::abs(sparser(i, j)) > threshold && std::abs(denser(i, j)) <= threshold) {
        ++count;
      }
    }
  }
  return count;
}

SicePath glasso_path(const SampleCovariance& sigma, std::span<const double> lambdas,
                     const GlassoOptions& opts) {
  if (lambdas.empty()) throw Error(ErrorKind::ConfigError, "empty lambda grid");
  for (std::size_t t = 0; t < lambdas.size(); ++t) {
    if (!(lambdas[t] > 0.0)) throw Error(ErrorKind::ConfigError, "path penalties must be positive");
    if (t > 0 && !(lambdas[t] > lambdas[t - 1])) {
      throw Error(ErrorKind::ConfigError, "lambda grid must be strictly increasing");
    }
  }

  SicePath path;
  path.lambdas.assign(lambdas.begin(), lambdas.end());
  std::optional<SpdMatrix> previous;
  for (std::size_t t = 0; t < lambdas.size(); ++t) {
    try {
      path.solutions.push_back(glasso_solve(sigma, lambdas[t], opts, previous));
    } catch (const NotConvergedError& e) {
      throw NotConvergedError(e.message() + " at level " + std::to_string(t),
                              e.best_iterate, e.residual, static_cast<int>(t));
    }
    previous = path.solutions.back().estimate;
    if (t > 0) {
      const int bad = support_violations(path.solutions[t - 1].estimate.matrix(),
                                         path.solutions[t].estimate.matrix());
      if (bad > 0) {
        path.warnings.push_back("level " + std::to_string(t) + ": " + std::to_string(bad) +
                                " off-diagonal entries enter the support");
      }
    }
  }
  return path;
}

}  // namespace sicerp
