#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sicerp/spd.hpp"

namespace sicerp {

/// Sample covariance: symmetric PSD (min eigenvalue >= -1e-10 * trace) with a
/// nonnegative diagonal.
class SampleCovariance {
 public:
  explicit SampleCovariance(SymMatrix m);
  explicit SampleCovariance(const Eigen::MatrixXd& m) : SampleCovariance(SymMatrix(m)) {}

  Eigen::Index dim() const { return m_.dim(); }
  const SymMatrix& sym() const { return m_; }
  const Eigen::MatrixXd& matrix() const { return m_.matrix(); }

 private:
  SymMatrix m_;
};

struct GlassoOptions {
  double tol = 1e-6;
  int max_iter = 1000;
};

struct SiceSolution {
  SpdMatrix estimate;
  double lambda = 0.0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  // log det W after each outer sweep (W the running covariance iterate); the
  // block updates never decrease it.
  std::vector<double> dual_trace;
};

/// Raised when the sweep budget runs out. Carries the last iterate (which may
/// not be SPD) and its residual.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, Eigen::MatrixXd best, double residual, int level = -1)
      : Error(ErrorKind::NotConverged, what),
        best_iterate(std::move(best)),
        residual(residual),
        level(level) {}

  Eigen::MatrixXd best_iterate;
  double residual;
  int level;
};

// log det(S) - tr(sigma S) - lambda * sum_ij |S_ij|; the diagonal is penalized.
double sice_objective(const SampleCovariance& sigma, double lambda, const SpdMatrix& s);

// Maximum violation of the stationarity condition S^-1 - sigma - lambda*Gamma = 0,
// Gamma in the subdifferential of ||S||_1. Entries with |s_ij| <= 1e-9 count as zero.
double kkt_residual(const SampleCovariance& sigma, double lambda, const SpdMatrix& s);

inline constexpr double kKktZeroThreshold = 1e-9;
inline constexpr double kSupportThreshold = 1e-6;

SiceSolution glasso_solve(const SampleCovariance& sigma, double lambda,
                          const GlassoOptions& opts = {},
                          const std::optional<SpdMatrix>& warm_start = std::nullopt);

struct SicePath {
  std::vector<double> lambdas;
  std::vector<SiceSolution> solutions;
  // Off-diagonal support entries that appear at level t+1 but not at t.
  std::vector<std::string> warnings;
};

SicePath glasso_path(const SampleCovariance& sigma, std::span<const double> lambdas,
                     const GlassoOptions& opts = {});

// Number of off-diagonal entries (i != j, both triangles) with |s_ij| > threshold.
int off_diagonal_nonzeros(const Eigen::MatrixXd& s, double threshold = kSupportThreshold);

// Count of (i, j) entries nonzero in `sparser` but zero in `denser`.
int support_violations(const Eigen::MatrixXd& denser, const Eigen::MatrixXd& sparser,
                       double threshold = kSupportThreshold);

}  // namespace sicerp
