#include "sicerp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sicerp/simd.hpp"

namespace sicerp {

namespace {

void require_levels(const GramBlock& block, Eigen::Index t) {
  if (block.values.rows() != t || block.values.cols() != t) {
    throw Error(ErrorKind::DimensionError, "block has " + std::to_string(block.values.rows()) +
                                               " levels, weights have " + std::to_string(t));
  }
}

void require_simplex(const double* begin, const double* end, const char* what) {
  double sum = 0.0;
  for (const double* p = begin; p != end; ++p) {
    if (!(*p >= 0.0)) throw Error(ErrorKind::ConfigError, std::string(what) + " has a negative entry");
    sum += *p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw Error(ErrorKind::ConfigError, std::string(what) + " does not sum to 1");
  }
}

}  // namespace

WeightsBeta WeightsBeta::uniform(Eigen::Index levels) {
  return {Eigen::VectorXd::Constant(levels, 1.0 / static_cast<double>(levels))};
}

WeightsBeta WeightsBeta::one_hot(Eigen::Index levels, Eigen::Index t) {
  WeightsBeta w{Eigen::VectorXd::Zero(levels)};
  w.beta(t) = 1.0;
  return w;
}

void WeightsBeta::validate() const {
  if (beta.size() == 0) throw Error(ErrorKind::ConfigError, "empty beta");
  require_simplex(beta.data(), beta.data() + beta.size(), "beta");
}

WeightsM WeightsM::uniform(Eigen::Index levels) {
  const double v = 1.0 / static_cast<double>(levels * levels);
  return {Eigen::MatrixXd::Constant(levels, levels, v)};
}

WeightsM WeightsM::outer(const WeightsBeta& w) { return {w.beta * w.beta.transpose()}; }

WeightsM WeightsM::diagonal(const WeightsBeta& w) { return {w.beta.asDiagonal().toDenseMatrix()}; }

void WeightsM::validate() const {
  if (m.size() == 0 || m.rows() != m.cols()) throw Error(ErrorKind::ConfigError, "M must be square");
  require_simplex(m.data(), m.data() + m.size(), "M");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorKind::ConfigError, "M must be symmetric");
  }
}

double k_beta(const GramBlock& block, const WeightsBeta& w) {
  require_levels(block, w.beta.size());
  return w.beta.dot(block.values * w.beta);
}

double k_m(const GramBlock& block, const WeightsM& w) {
  require_levels(block, w.m.rows());
  return w.m.cwiseProduct(block.values).sum();
}

double k_mkl(const GramBlock& block, const WeightsBeta& w) {
  require_levels(block, w.beta.size());
  return w.beta.dot(block.values.diagonal());
}

double k_emk(const GramBlock& block) {
  const auto t = static_cast<double>(block.values.rows());
  return block.values.sum() / (t * t);
}

std::string to_string(Integrator kind) {
  switch (kind) {
    case Integrator::Single: return "single";
    case Integrator::Beta: return "beta";
    case Integrator::M: return "M";
    case Integrator::Mkl: return "mkl";
    case Integrator::Emk: return "emk";
  }
  return "?";
}

Integrator integrator_from_string(const std::string& name) {
  if (name == "single") return Integrator::Single;
  if (name == "beta") return Integrator::Beta;
  if (name == "M" || name == "m") return Integrator::M;
  if (name == "mkl") return Integrator::Mkl;
  if (name == "emk") return Integrator::Emk;
  throw Error(ErrorKind::ConfigError, "unknown integrator '" + name + "'");
}

HierarchyWeights HierarchyWeights::single(Eigen::Index levels, Eigen::Index level) {
  if (level < 0 || level >= levels) throw Error(ErrorKind::ConfigError, "level out of range");
  HierarchyWeights w;
  w.kind = Integrator::Single;
  w.beta = WeightsBeta::one_hot(levels, level).beta;
  return w;
}

HierarchyWeights HierarchyWeights::uniform(Integrator kind, Eigen::Index levels) {
  HierarchyWeights w;
  w.kind = kind;
  switch (kind) {
    case Integrator::Single:
      return single(levels, 0);
    case Integrator::Beta:
    case Integrator::Mkl:
      w.beta = WeightsBeta::uniform(levels).beta;
      break;
    case Integrator::M:
      w.m = WeightsM::uniform(levels).m;
      break;
    case Integrator::Emk:
      break;
  }
  return w;
}

Eigen::MatrixXd HierarchyWeights::effective(Eigen::Index levels) const {
  switch (kind) {
    case Integrator::Single:
    case Integrator::Beta:
      return beta * beta.transpose();
    case Integrator::M:
      return m;
    case Integrator::Mkl:
      return beta.asDiagonal().toDenseMatrix();
    case Integrator::Emk:
      return Eigen::MatrixXd::Constant(levels, levels, 1.0 / static_cast<double>(levels * levels));
  }
  return {};
}

void HierarchyWeights::validate(Eigen::Index levels) const {
  switch (kind) {
    case Integrator::Single:
    case Integrator::Beta:
    case Integrator::Mkl:
      if (beta.size() != levels) throw Error(ErrorKind::DimensionError, "beta length mismatch");
      WeightsBeta{beta}.validate();
      break;
    case Integrator::M:
      if (m.rows() != levels) throw Error(ErrorKind::DimensionError, "M size mismatch");
      WeightsM{m}.validate();
      break;
    case Integrator::Emk:
      break;
  }
}

double hierarchy_kernel(const GramBlock& block, const HierarchyWeights& w) {
  switch (w.kind) {
    case Integrator::Single:
    case Integrator::Beta:
      return k_beta(block, WeightsBeta{w.beta});
    case Integrator::M:
      return k_m(block, WeightsM{w.m});
    case Integrator::Mkl:
      return k_mkl(block, WeightsBeta{w.beta});
    case Integrator::Emk:
      return k_emk(block);
  }
  return 0.0;
}

LogHierarchy log_images(const SiceHierarchy& h) {
  LogHierarchy out;
  out.sample_id = h.sample_id;
  out.logs.reserve(h.levels.size());
  for (const auto& level : h.levels) out.logs.push_back(matrix_log(level));
  return out;
}

GramBlock gram_block(const LogHierarchy& p, const LogHierarchy& q, const KernelConfig& cfg) {
  if (p.levels() != q.levels() || p.levels() == 0) {
    throw Error(ErrorKind::DimensionError, "hierarchies " + p.sample_id + " and " + q.sample_id +
                                               " differ in level count");
  }
  if (p.logs.front().dim() != q.logs.front().dim()) {
    throw Error(ErrorKind::DimensionError, "hierarchies " + p.sample_id + " and " + q.sample_id +
                                               " differ in dimension");
  }
  const Eigen::Index t = p.levels();
  GramBlock block;
  block.values.resize(t, t);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < t; ++j) block.values(i, j) = log_domain_kernel(p.logs[i], q.logs[j], cfg);
  return block;
}

GramBlock gram_block(const SiceHierarchy& p, const SiceHierarchy& q, const KernelConfig& cfg) {
  if (p.size() != q.size() || p.dim() != q.dim()) {
    throw Error(ErrorKind::DimensionError, "hierarchies " + p.sample_id + " and " + q.sample_id +
                                               " are not comparable");
  }
  return gram_block(log_images(p), log_images(q), cfg);
}

KernelConfig median_heuristic(std::span<const LogHierarchy> data) {
  std::vector<double> sq;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = i + 1; j < data.size(); ++j) {
      const Eigen::Index t = std::min(data[i].levels(), data[j].levels());
      for (Eigen::Index l = 0; l < t; ++l) {
        sq.push_back(log_domain_squared_distance(data[i].logs[l], data[j].logs[l]));
      }
    }
  }
  if (sq.empty()) return KernelConfig(1.0);
  std::sort(sq.begin(), sq.end());
  const std::size_t mid = sq.size() / 2;
  const double median = sq.size() % 2 ? sq[mid] : 0.5 * (sq[mid - 1] + sq[mid]);
  return median > 0.0 ? KernelConfig(1.0 / median) : KernelConfig(1.0);
}

BlockCache::BlockCache(std::span<const LogHierarchy> data, const KernelConfig& cfg)
    : n_(data.size()), t_(data.empty() ? 0 : static_cast<std::size_t>(data.front().levels())) {
  raw_.reserve(n_ * (n_ + 1) / 2 * t_ * t_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i; j < n_; ++j) {
      const GramBlock b = gram_block(data[i], data[j], cfg);
      for (std::size_t r = 0; r < t_; ++r)
        for (std::size_t c = 0; c < t_; ++c) raw_.push_back(b.values(r, c));
    }
  }
}

BlockCache::BlockCache(std::size_t n, std::size_t levels, std::vector<double> raw)
    : n_(n), t_(levels), raw_(std::move(raw)) {
  if (raw_.size() != n_ * (n_ + 1) / 2 * t_ * t_) {
    throw Error(ErrorKind::FormatError, "block cache payload has the wrong length");
  }
}

std::size_t BlockCache::offset(std::size_t i, std::size_t j) const {
  // Pairs (i, j>=i) enumerated row by row; row i starts after sum_{r<i} (n - r).
  const std::size_t before = i * n_ - i * (i - 1) / 2;
  return (before + (j - i)) * t_ * t_;
}

std::span<const double> BlockCache::stored_block(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  if (j >= n_) throw Error(ErrorKind::NotFound, "block index out of range");
  return {raw_.data() + offset(i, j), t_ * t_};
}

GramBlock BlockCache::block(std::size_t i, std::size_t j) const {
  const auto s = stored_block(i, j);
  GramBlock b;
  b.p = i;
  b.q = j;
  b.values.resize(t_, t_);
  for (std::size_t r = 0; r < t_; ++r)
    for (std::size_t c = 0; c < t_; ++c) b.values(r, c) = s[r * t_ + c];
  if (i > j) b.values.transposeInPlace();
  return b;
}

Eigen::MatrixXd BlockCache::gram_effective(const Eigen::MatrixXd& effective,
                                           std::span<const std::size_t> subset) const {
  if (static_cast<std::size_t>(effective.rows()) != t_) {
    throw Error(ErrorKind::DimensionError, "weights do not match the cached level count");
  }
  // Row-major copy of W so it lines up with the stored blocks.
  std::vector<double> w(t_ * t_);
  for (std::size_t r = 0; r < t_; ++r)
    for (std::size_t c = 0; c < t_; ++c) w[r * t_ + c] = effective(r, c);

  const auto& kernels = simd::active();
  const auto n = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      // Both orders reduce against the stored (min, max) block so the entry is
      // the same linear function of W either way.
      const auto s = stored_block(subset[a], subset[b]);
      const double v = kernels.dot(w.data(), s.data(), w.size());
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  return g;
}

Eigen::MatrixXd BlockCache::gram(const HierarchyWeights& w, std::span<const std::size_t> subset) const {
  return gram_effective(w.effective(static_cast<Eigen::Index>(t_)), subset);
}

Eigen::MatrixXd BlockCache::gram(const HierarchyWeights& w) const {
  std::vector<std::size_t> all(n_);
  std::iota(all.begin(), all.end(), 0);
  return gram(w, all);
}

Eigen::MatrixXd hierarchy_gram(std::span<const SiceHierarchy> data, const HierarchyWeights& w,
                               const KernelConfig& cfg) {
  std::vector<LogHierarchy> logs;
  logs.reserve(data.size());
  for (const auto& h : data) {
    h.validate();
    logs.push_back(log_images(h));
  }
  if (!logs.empty()) w.validate(logs.front().levels());
  return BlockCache(logs, cfg).gram(w);
}

}  // namespace sicerp
