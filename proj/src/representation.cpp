#include "sicerp/representation.hpp"

#include <cmath>

namespace sicerp {

void SkeletonSequence::validate() const {
  if (joints <= 0) throw Error(ErrorKind::FormatError, "skeleton needs at least one joint");
  if (frames.size() < 2) throw Error(ErrorKind::TooShort, "skeleton needs at least two frames");
  const std::size_t width = 3 * static_cast<std::size_t>(joints);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != width) {
      throw Error(ErrorKind::FormatError, "frame " + std::to_string(t) + " has " +
                                              std::to_string(frames[t].size()) +
                                              " coordinates, expected " + std::to_string(width));
    }
    for (double v : frames[t]) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::FormatError, "non-finite coordinate in frame " + std::to_string(t));
      }
    }
  }
}

void FrameFeatureSequence::validate() const {
  if (frames.rows() < 2) throw Error(ErrorKind::TooShort, "sample " + id + " has fewer than two frames");
  if (frames.cols() < 1) throw Error(ErrorKind::FormatError, "sample " + id + " has no features");
  if (!frames.allFinite()) throw Error(ErrorKind::FormatError, "sample " + id + " has non-finite features");
}

void SiceHierarchy::validate() const {
  if (levels.empty()) throw Error(ErrorKind::DimensionError, "empty hierarchy " + sample_id);
  if (lambdas.size() != levels.size()) {
    throw Error(ErrorKind::DimensionError, "hierarchy " + sample_id + " lambda count mismatch");
  }
  for (std::size_t t = 0; t < levels.size(); ++t) {
    if (levels[t].dim() != levels.front().dim()) {
      throw Error(ErrorKind::DimensionError, "hierarchy " + sample_id + " has mixed dimensions");
    }
    if (t > 0 && !(lambdas[t] > lambdas[t - 1])) {
      throw Error(ErrorKind::DimensionError, "hierarchy " + sample_id + " lambdas not increasing");
    }
  }
}

FrameFeatureSequence coordinate_features(const SkeletonSequence& seq) {
  seq.validate();
  const auto m = static_cast<Eigen::Index>(seq.frames.size());
  const Eigen::Index d = 3 * seq.joints;
  FrameFeatureSequence out;
  out.frames.resize(m, d);
  for (Eigen::Index t = 0; t < m; ++t) {
    for (Eigen::Index k = 0; k < d; ++k) out.frames(t, k) = seq.frames[t][k];
  }
  return out;
}

FrameFeatureSequence velocity_features(const SkeletonSequence& seq) {
  if (seq.frames.size() < 3) throw Error(ErrorKind::TooShort, "velocity features need m >= 3");
  seq.validate();
  const auto m = static_cast<Eigen::Index>(seq.frames.size());
  const Eigen::Index w = 3 * seq.joints;
  FrameFeatureSequence out;
  out.frames.resize(m - 2, 2 * w);
  for (Eigen::Index t = 1; t + 1 < m; ++t) {
    const auto& prev = seq.frames[t - 1];
    const auto& cur = seq.frames[t];
    const auto& next = seq.frames[t + 1];
    for (Eigen::Index k = 0; k < w; ++k) {
      out.frames(t - 1, k) = cur[k] - prev[k];
      out.frames(t - 1, w + k) = next[k] - cur[k];
    }
  }
  return out;
}

SampleCovariance sample_covariance(const FrameFeatureSequence& f) {
  f.validate();
  const Eigen::RowVectorXd mean = f.frames.colwise().mean();
  const Eigen::MatrixXd centered = f.frames.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(f.length());
  return SampleCovariance(cov);
}

SpdMatrix cov_rp(const FrameFeatureSequence& f, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::ConfigError, "Cov-RP regularizer must be positive");
  Eigen::MatrixXd c = sample_covariance(f).matrix();
  c.diagonal().array() += eps;
  return SpdMatrix(c);
}

SpdMatrix inverse_cov_rp(const FrameFeatureSequence& f, double eps) {
  return cov_rp(f, eps).inverse();
}

std::vector<double> default_lambda_grid(const SampleCovariance& sigma, int levels, double ratio) {
  if (levels < 1) throw Error(ErrorKind::ConfigError, "grid needs at least one level");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::ConfigError, "grid ratio must be in (0, 1)");
  const Eigen::MatrixXd& a = sigma.matrix();
  double off = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) off = std::max(off, std::abs(a(i, j)));
  const double lambda_max = off > 0.0 ? off : a.diagonal().maxCoeff();
  if (!(lambda_max > 0.0)) throw Error(ErrorKind::DegenerateInput, "covariance is identically zero");

  std::vector<double> grid(levels);
  for (int t = 0; t < levels; ++t) {
    const double frac = levels == 1 ? 1.0 : static_cast<double>(t) / (levels - 1);
    grid[t] = lambda_max * std::pow(ratio, 1.0 - frac);
  }
  grid.back() = lambda_max;
  return grid;
}

SiceHierarchy sice_hierarchy(const FrameFeatureSequence& f, std::span<const double> grid,
                             const GlassoOptions& opts, std::size_t* path_warnings) {
  const SampleCovariance sigma = sample_covariance(f);
  SicePath path;
  try {
    path = glasso_path(sigma, grid, opts);
  } catch (const NotConvergedError& e) {
    throw NotConvergedError("sample " + f.id + ": " + e.message(), e.best_iterate, e.residual, e.level);
  } catch (const Error& e) {
    throw Error(e.kind(), "sample " + f.id + ": " + e.message());
  }
  if (path_warnings) *path_warnings = path.warnings.size();
  SiceHierarchy h;
  h.sample_id = f.id;
  h.lambdas = path.lambdas;
  h.levels.reserve(path.solutions.size());
  for (auto& sol : path.solutions) h.levels.push_back(std::move(sol.estimate));
  return h;
}

SiceHierarchy sice_hierarchy(const FrameFeatureSequence& f, int levels, double ratio,
                             const GlassoOptions& opts, std::size_t* path_warnings) {
  const auto grid = default_lambda_grid(sample_covariance(f), levels, ratio);
  return sice_hierarchy(f, grid, opts, path_warnings);
}

SiceHierarchy single_level(std::string sample_id, SpdMatrix m) {
  SiceHierarchy h;
  h.sample_id = std::move(sample_id);
  h.lambdas = {0.0};
  h.levels.push_back(std::move(m));
  return h;
}

}  // namespace sicerp
