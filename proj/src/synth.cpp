#include "sicerp/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace sicerp {

std::string to_string(Structure s) {
  switch (s) {
    case Structure::Chain: return "chain";
    case Structure::Grid: return "grid";
    case Structure::RandomSparse: return "random-sparse";
  }
  return "chain";
}

Structure structure_from_string(const std::string& name) {
  if (name == "chain") return Structure::Chain;
  if (name == "grid") return Structure::Grid;
  if (name == "random-sparse" || name == "random") return Structure::RandomSparse;
  throw Error(ErrorKind::SpecError, "unknown precision structure '" + name + "'");
}

void SyntheticSpec::validate() const {
  if (d < 2) throw Error(ErrorKind::SpecError, "d must be at least 2");
  if (m_min < 3 || m_max < m_min) throw Error(ErrorKind::SpecError, "frame range must satisfy 3 <= m_min <= m_max");
  if (train_per_class < 0 || test_per_class < 0 || train_per_class + test_per_class == 0) {
    throw Error(ErrorKind::SpecError, "need at least one sample per class");
  }
  if (classes.empty()) throw Error(ErrorKind::SpecError, "need at least one class");
  if (!(edge > 0.0) || !std::isfinite(edge)) throw Error(ErrorKind::SpecError, "edge strength must be positive");
  if (!(noise > 0.0) || !std::isfinite(noise)) throw Error(ErrorKind::SpecError, "noise scale must be positive");
  for (const auto& c : classes) {
    if (c.kind == Structure::RandomSparse && !(c.density > 0.0 && c.density <= 1.0)) {
      throw Error(ErrorKind::SpecError, "random-sparse density must lie in (0, 1]");
    }
  }
}

Eigen::MatrixXd class_precision(const SyntheticSpec& spec, const ClassStructure& cls, std::uint64_t class_seed) {
  const int d = spec.d;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(d, d);
  auto link = [&](int i, int j, double v) {
    p(i, j) = v;
    p(j, i) = v;
  };
  switch (cls.kind) {
    case Structure::Chain:
      for (int i = 0; i + 1 < d; ++i) link(i, i + 1, spec.edge);
      break;
    case Structure::Grid: {
      const int cols = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
      for (int i = 0; i < d; ++i) {
        if ((i + 1) % cols != 0 && i + 1 < d) link(i, i + 1, -spec.edge);
        if (i + cols < d) link(i, i + cols, -spec.edge);
      }
      break;
    }
    case Structure::RandomSparse: {
      std::mt19937_64 rng(class_seed);
      std::bernoulli_distribution edge(cls.density);
      std::bernoulli_distribution sign(0.5);
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
          if (edge(rng)) link(i, j, sign(rng) ? spec.edge : -spec.edge);
      break;
    }
  }
  // Strict diagonal dominance: diagonal exceeds the absolute row sum.
  for (int i = 0; i < d; ++i) p(i, i) = 1.0 + p.row(i).cwiseAbs().sum();
  if (!(min_eigenvalue(p) > 0.0)) throw Error(ErrorKind::SpecError, "class precision is not SPD");
  return p;
}

SyntheticData synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData out;
  std::mt19937_64 master(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> length(spec.m_min, spec.m_max);

  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const std::uint64_t class_seed = master();
    out.precisions.push_back(class_precision(spec, spec.classes[k], class_seed));
  }
  const double scale = spec.noise * spec.noise;

  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    // x = L^{-T} z has covariance (L L^T)^{-1} = P^{-1}.
    const Eigen::LLT<Eigen::MatrixXd> llt(out.precisions[k]);
    const Eigen::MatrixXd upper = llt.matrixU();
    const int total = spec.train_per_class + spec.test_per_class;
    int next_train = 1, next_test = 2;
    for (int s = 0; s < total; ++s) {
      const bool train = s < spec.train_per_class;
      const int subject = train ? next_train : next_test;
      (train ? next_train : next_test) += 2;
      const int m = length(master);
      Eigen::MatrixXd z(spec.d, m);
      for (int c = 0; c < m; ++c)
        for (int r = 0; r < spec.d; ++r) z(r, c) = gauss(master);
      const Eigen::MatrixXd x = upper.triangularView<Eigen::Upper>().solve(z);
      FrameFeatureSequence f;
      char id[48];
      std::snprintf(id, sizeof id, "c%zu_s%03d", k, subject);
      f.id = id;
      f.label = "class" + std::to_string(k);
      f.frames = spec.noise * x.transpose();
      out.samples.push_back(std::move(f));
    }
    out.precisions[k] /= scale;
  }
  return out;
}

}  // namespace sicerp
