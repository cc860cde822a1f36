#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sicerp/glasso.hpp"

namespace sicerp {

/// Skeleton joint trajectories: m frames of J joints, each frame stored as
/// 3J coordinates in joint-major, axis-minor order (j0x, j0y, j0z, j1x, ...).
struct SkeletonSequence {
  int joints = 0;
  std::vector<std::vector<double>> frames;

  // Validates frame arity (3J), finiteness and m >= 2.
  void validate() const;
};

/// Per-frame feature vectors of one sample. Row t of `frames` is frame t.
struct FrameFeatureSequence {
  std::string id;
  std::optional<std::string> label;
  Eigen::MatrixXd frames;  // m x d

  Eigen::Index dim() const { return frames.cols(); }
  Eigen::Index length() const { return frames.rows(); }
  void validate() const;
};

/// T SPD matrices for one sample at increasing penalties, dense to sparse.
/// Single-matrix representations (Cov-RP, InverseCov-RP) use T = 1 with
/// lambda 0.
struct SiceHierarchy {
  std::string sample_id;
  std::vector<double> lambdas;
  std::vector<SpdMatrix> levels;

  std::size_t size() const { return levels.size(); }
  Eigen::Index dim() const { return levels.empty() ? 0 : levels.front().dim(); }
  void validate() const;
};

FrameFeatureSequence coordinate_features(const SkeletonSequence& seq);

// Frame t (1 <= t <= m-2, zero-based) is concat(p_t - p_{t-1}, p_{t+1} - p_t);
// the first and last frames are dropped.
FrameFeatureSequence velocity_features(const SkeletonSequence& seq);

// (1/m) sum (x_t - mean)(x_t - mean)^T
SampleCovariance sample_covariance(const FrameFeatureSequence& f);

inline constexpr double kDefaultCovEps = 1e-7;
inline constexpr int kDefaultLevels = 10;
inline constexpr double kDefaultGridRatio = 0.01;

SpdMatrix cov_rp(const FrameFeatureSequence& f, double eps = kDefaultCovEps);
SpdMatrix inverse_cov_rp(const FrameFeatureSequence& f, double eps = kDefaultCovEps);

// T log-spaced penalties from ratio * lambda_max to lambda_max, where
// lambda_max is the largest off-diagonal |sigma_ij| (largest diagonal entry if
// the covariance is diagonal).
std::vector<double> default_lambda_grid(const SampleCovariance& sigma, int levels = kDefaultLevels,
                                        double ratio = kDefaultGridRatio);

// `path_warnings`, when given, receives the number of support-growth warnings of the path.
SiceHierarchy sice_hierarchy(const FrameFeatureSequence& f, std::span<const double> grid,
                             const GlassoOptions& opts = {}, std::size_t* path_warnings = nullptr);

// Hierarchy on the per-sample default grid.
SiceHierarchy sice_hierarchy(const FrameFeatureSequence& f, int levels = kDefaultLevels,
                             double ratio = kDefaultGridRatio, const GlassoOptions& opts = {},
                             std::size_t* path_warnings = nullptr);

SiceHierarchy single_level(std::string sample_id, SpdMatrix m);

}  // namespace sicerp
