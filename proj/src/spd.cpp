#include "sicerp/spd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sicerp/simd.hpp"

namespace sicerp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidMatrix: return "InvalidMatrix";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::SingularityError: return "SingularityError";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::IndefiniteKernel: return "IndefiniteKernel";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::StaleDuals: return "StaleDuals";
    case ErrorKind::InsufficientClass: return "InsufficientClass";
    case ErrorKind::ModelMismatch: return "ModelMismatch";
    case ErrorKind::SpecError: return "SpecError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::NotFound: return "NotFound";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::SpecError:
    case ErrorKind::ModelMismatch:
      return 2;
    case ErrorKind::NotConverged:
      return 4;
    default:
      return 3;
  }
}

SymMatrix::SymMatrix(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::DimensionError,
                "matrix is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  if (!a.allFinite()) throw Error(ErrorKind::InvalidMatrix, "non-finite entry");
  m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
  return SymMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

SymMatrix SymMatrix::zero(Eigen::Index dim) {
  return SymMatrix(Eigen::MatrixXd::Zero(dim, dim));
}

SymMatrix SymMatrix::diagonal(std::span<const double> values) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return SymMatrix(m);
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

SpdMatrix::SpdMatrix(SymMatrix base) : base_(std::move(base)) {
  if (base_.dim() == 0) throw Error(ErrorKind::DimensionError, "empty SPD matrix");
  const double lo = min_eigenvalue(base_.matrix());
  if (!(lo > 0.0)) {
    throw Error(ErrorKind::NotPositiveDefinite, "min eigenvalue " + std::to_string(lo));
  }
}

SpdMatrix SpdMatrix::inverse() const {
  Eigen::LLT<Eigen::MatrixXd> llt(matrix());
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "Cholesky failed");
  return SpdMatrix(llt.solve(Eigen::MatrixXd::Identity(dim(), dim())));
}

EigenDecomposition sym_eigen(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.matrix());
  if (es.info() != Eigen::Success) throw Error(ErrorKind::InvalidMatrix, "eigensolver failed");
  // Eigen returns ascending order.
  EigenDecomposition out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

namespace {

Eigen::MatrixXd spectral_map(const EigenDecomposition& ed, double (*f)(double)) {
  const Eigen::VectorXd mapped = ed.values.unaryExpr(f);
  return ed.vectors * mapped.asDiagonal() * ed.vectors.transpose();
}

}  // namespace

SymMatrix matrix_log(const SpdMatrix& a) {
  const EigenDecomposition ed = sym_eigen(a.sym());
  if (!(ed.values(ed.values.size() - 1) > 0.0)) {
    throw Error(ErrorKind::NotPositiveDefinite, "matrix_log of non-SPD input");
  }
  return SymMatrix(spectral_map(ed, [](double x) { return std::log(x); }));
}

SpdMatrix matrix_exp(const SymMatrix& a) {
  return SpdMatrix(spectral_map(sym_eigen(a), [](double x) { return std::exp(x); }));
}

double log_domain_squared_distance(const SymMatrix& log_a, const SymMatrix& log_b) {
  if (log_a.dim() != log_b.dim()) {
    throw Error(ErrorKind::DimensionError, "log-domain matrices differ in dimension");
  }
  return simd::squared_distance(log_a.data(), log_b.data());
}

double log_euclidean_distance(const SpdMatrix& a, const SpdMatrix& b) {
  if (a.dim() != b.dim()) throw Error(ErrorKind::DimensionError, "SPD matrices differ in dimension");
  return std::sqrt(log_domain_squared_distance(matrix_log(a), matrix_log(b)));
}

KernelConfig::KernelConfig(double g) : gamma(g) {
  if (!(g > 0.0) || !std::isfinite(g)) {
    throw Error(ErrorKind::ConfigError, "kernel gamma must be positive and finite");
  }
}

double log_domain_kernel(const SymMatrix& log_a, const SymMatrix& log_b, const KernelConfig& cfg) {
  return std::exp(-cfg.gamma * log_domain_squared_distance(log_a, log_b));
}

double log_euclidean_kernel(const SpdMatrix& a, const SpdMatrix& b, const KernelConfig& cfg) {
  if (a.dim() != b.dim()) throw Error(ErrorKind::DimensionError, "SPD matrices differ in dimension");
  return log_domain_kernel(matrix_log(a), matrix_log(b), cfg);
}

KernelConfig median_heuristic(std::span<const SymMatrix> logs) {
  std::vector<double> sq;
  sq.reserve(logs.size() * (logs.size() - (logs.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    for (std::size_t j = i + 1; j < logs.size(); ++j) {
      sq.push_back(log_domain_squared_distance(logs[i], logs[j]));
    }
  }
  if (sq.empty()) return KernelConfig(1.0);
  const auto mid = sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2);
  std::nth_element(sq.begin(), mid, sq.end());
  double median = *mid;
  if (sq.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(sq.begin(), mid));
  }
  if (!(median > 0.0)) return KernelConfig(1.0);
  return KernelConfig(1.0 / median);
}

}  // namespace sicerp
