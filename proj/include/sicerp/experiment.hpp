#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sicerp/svm.hpp"

namespace sicerp {

struct SplitSpec {
  enum class Mode { OddEven, Ids };
  Mode mode = Mode::OddEven;
  std::vector<std::string> train_ids;  // Mode::Ids only
  std::vector<std::string> test_ids;
};

// Subject number of a sample id: the digits after an "s" that starts the id
// or follows '_', '-' or '/', e.g. 7 for "a02_s07_e01". NotFound if absent.
int subject_of(const std::string& id);

struct ExperimentConfig {
  std::string representation = "hierarchy";  // cov | invcov | sice | hierarchy
  int levels = kDefaultLevels;
  double ratio = kDefaultGridRatio;
  double eps = kDefaultCovEps;
  std::optional<double> gamma;  // empty: median heuristic on the training split
  Integrator integrator = Integrator::Beta;
  std::vector<double> c_grid{0.1, 1.0, 10.0, 100.0};
  int folds = 3;
  std::optional<std::uint64_t> seed;
  SplitSpec split;
  GlassoOptions glasso;
  OptimizeOptions optimize;

  // ConfigError on out-of-range fields or a missing seed.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct Representation {
  std::vector<SiceHierarchy> hierarchies;
  std::size_t path_warnings = 0;
};

// Builds the configured representation for every sequence, in input order.
Representation represent(const std::vector<FrameFeatureSequence>& data, const ExperimentConfig& cfg);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Disjoint train/test index lists; ConfigError if either is empty or they overlap.
Split make_split(const std::vector<FrameFeatureSequence>& data, const SplitSpec& spec);

// Stratified fold id for each training sample, shuffled within each class.
std::vector<int> stratified_folds(const std::vector<std::string>& labels, int folds, std::uint64_t seed);

struct CvResult {
  double c = 1.0;
  Eigen::Index level = 0;
  std::vector<nlohmann::json> table;  // one entry per candidate
};

struct ExperimentResult {
  nlohmann::json report;  // deterministic
  nlohmann::json timing;  // wall clock per stage, seconds
  TrainedClassifier model;
  CvResult cv;
  double accuracy = 0.0;
};

// Cross-validates on the training samples only, trains on all of them and
// evaluates on the test samples. `train` and `test` must be labeled.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<FrameFeatureSequence>& train,
                                const std::vector<FrameFeatureSequence>& test);

// Convenience: split `data` with cfg.split, then run.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<FrameFeatureSequence>& data);

}  // namespace sicerp
