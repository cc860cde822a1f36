#pragma once

#include <span>
#include <string>
#include <vector>

#include "sicerp/representation.hpp"

namespace sicerp {

/// T x T base-kernel values between two hierarchies:
/// values(i, j) = kappa(S_i^p, S_j^q).
struct GramBlock {
  Eigen::MatrixXd values;
  std::size_t p = 0;
  std::size_t q = 0;

  Eigen::Index levels() const { return values.rows(); }
};

/// Convex combination over levels: sum beta = 1, beta >= 0.
struct WeightsBeta {
  Eigen::VectorXd beta;

  static WeightsBeta uniform(Eigen::Index levels);
  static WeightsBeta one_hot(Eigen::Index levels, Eigen::Index t);
  void validate() const;
};

/// Convex combination over level pairs: symmetric, nonnegative, sums to 1.
struct WeightsM {
  Eigen::MatrixXd m;

  static WeightsM uniform(Eigen::Index levels);
  static WeightsM outer(const WeightsBeta& w);
  static WeightsM diagonal(const WeightsBeta& w);
  void validate() const;
};

double k_beta(const GramBlock& block, const WeightsBeta& w);
double k_m(const GramBlock& block, const WeightsM& w);
double k_mkl(const GramBlock& block, const WeightsBeta& w);
double k_emk(const GramBlock& block);

enum class Integrator { Single, Beta, M, Mkl, Emk };

std::string to_string(Integrator kind);
Integrator integrator_from_string(const std::string& name);

/// Weights for any integrator. `beta` is used by Single (one-hot), Beta and
/// Mkl; `m` by M; Emk carries neither.
struct HierarchyWeights {
  Integrator kind = Integrator::Emk;
  Eigen::VectorXd beta;
  Eigen::MatrixXd m;

  static HierarchyWeights single(Eigen::Index levels, Eigen::Index level);
  static HierarchyWeights uniform(Integrator kind, Eigen::Index levels);

  // The T x T matrix W with k(p, q) = sum_ij W_ij K_ij for this integrator.
  Eigen::MatrixXd effective(Eigen::Index levels) const;
  void validate(Eigen::Index levels) const;
};

double hierarchy_kernel(const GramBlock& block, const HierarchyWeights& w);

/// Matrix logarithms of every level, computed once per hierarchy.
struct LogHierarchy {
  std::string sample_id;
  std::vector<SymMatrix> logs;

  Eigen::Index levels() const { return static_cast<Eigen::Index>(logs.size()); }
};

LogHierarchy log_images(const SiceHierarchy& h);

GramBlock gram_block(const SiceHierarchy& p, const SiceHierarchy& q, const KernelConfig& cfg);
GramBlock gram_block(const LogHierarchy& p, const LogHierarchy& q, const KernelConfig& cfg);

// Median heuristic over same-level pairwise distances of the given samples.
KernelConfig median_heuristic(std::span<const LogHierarchy> data);

/// All N(N+1)/2 blocks of a dataset, stored once in pair order i <= j with
/// each block row-major. Weight changes only re-run the O(N^2 T^2) reduction.
class BlockCache {
 public:
  BlockCache() = default;
  BlockCache(std::span<const LogHierarchy> data, const KernelConfig& cfg);
  BlockCache(std::size_t n, std::size_t levels, std::vector<double> raw);

  std::size_t size() const { return n_; }
  std::size_t levels() const { return t_; }
  const std::vector<double>& raw() const { return raw_; }

  // Block (i, j); for i > j this is the transpose of the stored (j, i) block.
  GramBlock block(std::size_t i, std::size_t j) const;
  std::span<const double> stored_block(std::size_t i, std::size_t j) const;

  Eigen::MatrixXd gram(const HierarchyWeights& w) const;
  Eigen::MatrixXd gram(const HierarchyWeights& w, std::span<const std::size_t> subset) const;
  // Entry (a, b) is <W, stored block(min, max)>, so it is symmetric in (a, b)
  // and linear in every entry of W.
  Eigen::MatrixXd gram_effective(const Eigen::MatrixXd& effective,
                                 std::span<const std::size_t> subset) const;

 private:
  std::size_t offset(std::size_t i, std::size_t j) const;

  std::size_t n_ = 0;
  std::size_t t_ = 0;
  std::vector<double> raw_;
};

// N x N kernel matrix over a dataset under the given weights.
Eigen::MatrixXd hierarchy_gram(std::span<const SiceHierarchy> data, const HierarchyWeights& w,
                               const KernelConfig& cfg);

}  // namespace sicerp
