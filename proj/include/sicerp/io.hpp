#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sicerp/svm.hpp"

namespace sicerp {

enum class FeatureMode { Raw, Coordinates, Velocity };

std::string to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& name);

/// Sequences in JSON Lines form, one {"id", "label", "frames"} object per line.
std::vector<FrameFeatureSequence> read_sequences_jsonl(const std::filesystem::path& path);
void write_sequences_jsonl(const std::filesystem::path& path, const std::vector<FrameFeatureSequence>& seqs);

// Numeric CSV: one row per line, comma separated. Errors carry file:line.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

// Loads a dataset manifest:
//
//   {"mode": "raw" | "coordinates" | "velocity", "joints": J,
//    "samples": [{"id": ..., "label": ..., "frames": [[...], ...]} |
//                {"id": ..., "label": ..., "path": "frames.csv"}],
//    "sequences": "more.jsonl"}
//
// Relative paths resolve against the manifest directory. In skeleton modes
// each frame row must hold 3J coordinates. The result is sorted by id.
std::vector<FrameFeatureSequence> ingest(const std::filesystem::path& manifest);

/// A hierarchy with its class label, as written by the `represent` step.
struct LabeledHierarchy {
  SiceHierarchy hierarchy;
  std::optional<std::string> label;
};

std::vector<LabeledHierarchy> read_hierarchies(const std::filesystem::path& path);
void write_hierarchies(const std::filesystem::path& path, const std::vector<LabeledHierarchy>& data);

void save_model(const std::filesystem::path& path, const TrainedClassifier& model);
TrainedClassifier load_model(const std::filesystem::path& path);

// SRGB cache: "SRGB", u32 version, u32 N, u32 T, then N(N+1)/2 row-major
// T x T float64 blocks for pairs i <= j, all little-endian.
inline constexpr std::uint32_t kBlockCacheVersion = 1;
void write_block_cache(const std::filesystem::path& path, const BlockCache& cache);
BlockCache read_block_cache(const std::filesystem::path& path);

// Row-major CSV with 17 significant digits; reading it back is bit-exact.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Finds level `level` of sample `id`; NotFound if either is missing.
const SpdMatrix& find_level(const std::vector<LabeledHierarchy>& data, const std::string& id, std::size_t level);

}  // namespace sicerp
