#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "sicerp/error.hpp"

namespace sicerp {

/// Symmetric real matrix. Construction symmetrizes via (A + A^T) / 2 and
/// rejects non-finite entries.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& a);

  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix zero(Eigen::Index dim);
  static SymMatrix diagonal(std::span<const double> values);

  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  // Contiguous column-major storage of all dim*dim entries.
  std::span<const double> data() const {
    return {m_.data(), static_cast<std::size_t>(m_.size())};
  }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  Eigen::MatrixXd m_;
};

/// Symmetric positive definite matrix. The smallest eigenvalue must be > 0.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(SymMatrix base);
  explicit SpdMatrix(const Eigen::MatrixXd& a) : SpdMatrix(SymMatrix(a)) {}

  static SpdMatrix identity(Eigen::Index dim) { return SpdMatrix(SymMatrix::identity(dim)); }

  Eigen::Index dim() const { return base_.dim(); }
  const SymMatrix& sym() const { return base_; }
  const Eigen::MatrixXd& matrix() const { return base_.matrix(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return base_(i, j); }

  SpdMatrix inverse() const;

  friend bool operator==(const SpdMatrix& a, const SpdMatrix& b) { return a.base_ == b.base_; }

 private:
  SymMatrix base_;
};

struct EigenDecomposition {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns, aligned with values
};

EigenDecomposition sym_eigen(const SymMatrix& a);

double min_eigenvalue(const Eigen::MatrixXd& symmetric);

SymMatrix matrix_log(const SpdMatrix& a);
SpdMatrix matrix_exp(const SymMatrix& a);

// ||log a - log b||_F
double log_euclidean_distance(const SpdMatrix& a, const SpdMatrix& b);

// Squared Frobenius distance between two precomputed matrix logarithms.
double log_domain_squared_distance(const SymMatrix& log_a, const SymMatrix& log_b);

struct KernelConfig {
  double gamma = 1.0;

  explicit KernelConfig(double g = 1.0);
};

// exp(-gamma * ||log a - log b||_F^2)
double log_euclidean_kernel(const SpdMatrix& a, const SpdMatrix& b, const KernelConfig& cfg);
double log_domain_kernel(const SymMatrix& log_a, const SymMatrix& log_b, const KernelConfig& cfg);

// gamma = 1 / median of squared pairwise log-domain distances. Falls back to
// gamma = 1 when fewer than two matrices or every distance is zero.
KernelConfig median_heuristic(std::span<const SymMatrix> logs);

}  // namespace sicerp
