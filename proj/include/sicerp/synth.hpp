#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sicerp/representation.hpp"

namespace sicerp {

enum class Structure { Chain, Grid, RandomSparse };

std::string to_string(Structure s);
Structure structure_from_string(const std::string& name);

struct ClassStructure {
  Structure kind = Structure::Chain;
  double density = 0.1;  // edge probability for RandomSparse
};

/// Zero-mean Gaussian frames whose covariance is the inverse of a sparse,
/// diagonally dominant precision matrix per class.
struct SyntheticSpec {
  int d = 20;
  int m_min = 12;
  int m_max = 18;
  int train_per_class = 30;
  int test_per_class = 30;
  std::vector<ClassStructure> classes{{Structure::Chain}, {Structure::Grid}, {Structure::RandomSparse, 0.1}};
  double edge = 0.45;  // off-diagonal magnitude of the structure matrix
  double noise = 2.0;  // frame scale; the frame precision is P / noise^2
  std::uint64_t seed = 42;

  void validate() const;
};

struct SyntheticData {
  // Training samples get odd subject numbers, test samples even ones; ids
  // look like "c1_s07".
  std::vector<FrameFeatureSequence> samples;
  std::vector<Eigen::MatrixXd> precisions;  // ground-truth frame precision per class
};

// Diagonally dominant structure matrix P for one class (frame precision
// before the noise scaling); `class_seed` only matters for RandomSparse.
Eigen::MatrixXd class_precision(const SyntheticSpec& spec, const ClassStructure& cls, std::uint64_t class_seed);

SyntheticData synth_generate(const SyntheticSpec& spec);

}  // namespace sicerp
