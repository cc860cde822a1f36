#include "sicerp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <unordered_map>

namespace sicerp {

using nlohmann::json;

namespace {

const std::set<std::string> kRepresentations{"cov", "invcov", "sice", "hierarchy"};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

Integrator effective_integrator(const ExperimentConfig& cfg) {
  return cfg.representation == "sice" ? Integrator::Single : cfg.integrator;
}

std::vector<std::string> labels_of(const std::vector<FrameFeatureSequence>& data, const char* split) {
  std::vector<std::string> out;
  out.reserve(data.size());
  for (const auto& f : data) {
    if (!f.label) throw Error(ErrorKind::ConfigError, std::string(split) + " sample " + f.id + " has no label");
    out.push_back(*f.label);
  }
  return out;
}

json weights_json(const HierarchyWeights& w) {
  json j{{"kind", to_string(w.kind)}};
  if (w.kind == Integrator::M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < w.m.rows(); ++r) {
      rows.push_back(std::vector<double>());
      for (Eigen::Index c = 0; c < w.m.cols(); ++c) rows.back().push_back(w.m(r, c));
    }
    j["m"] = std::move(rows);
  } else if (w.kind != Integrator::Emk) {
    j["beta"] = std::vector<double>(w.beta.data(), w.beta.data() + w.beta.size());
  }
  return j;
}

}  // namespace

int subject_of(const std::string& id) {
  static const std::regex pattern("(?:^|[_/-])s([0-9]+)");
  std::smatch m;
  if (!std::regex_search(id, m, pattern)) throw Error(ErrorKind::NotFound, "no subject number in id '" + id + "'");
  return std::stoi(m[1].str());
}

void ExperimentConfig::validate() const {
  if (!kRepresentations.count(representation)) {
    throw Error(ErrorKind::ConfigError, "unknown representation '" + representation + "'");
  }
  if (levels < 1 || levels > 100) throw Error(ErrorKind::ConfigError, "levels must be in [1, 100]");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::ConfigError, "ratio must be in (0, 1)");
  if (!(eps > 0.0)) throw Error(ErrorKind::ConfigError, "eps must be positive");
  if (gamma && !(*gamma > 0.0)) throw Error(ErrorKind::ConfigError, "gamma must be positive");
  if (c_grid.empty()) throw Error(ErrorKind::ConfigError, "C grid is empty");
  for (double c : c_grid) {
    if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::ConfigError, "C values must be positive");
  }
  if (folds < 2) throw Error(ErrorKind::ConfigError, "need at least 2 folds");
  if (!seed) throw Error(ErrorKind::ConfigError, "a seed is required");
  if (!(glasso.tol > 0.0) || glasso.max_iter < 1) throw Error(ErrorKind::ConfigError, "bad glasso options");
  if (optimize.max_iter < 0 || !(optimize.tau >= 0.0)) throw Error(ErrorKind::ConfigError, "bad optimizer options");
}

json to_json(const ExperimentConfig& cfg) {
  json split{{"mode", cfg.split.mode == SplitSpec::Mode::OddEven ? "odd-even" : "ids"}};
  if (cfg.split.mode == SplitSpec::Mode::Ids) {
    split["train"] = cfg.split.train_ids;
    split["test"] = cfg.split.test_ids;
  }
  return json{
      {"representation", cfg.representation},
      {"levels", cfg.levels},
      {"ratio", cfg.ratio},
      {"eps", cfg.eps},
      {"gamma", cfg.gamma ? json(*cfg.gamma) : json("auto")},
      {"integrator", to_string(cfg.integrator)},
      {"c_grid", cfg.c_grid},
      {"folds", cfg.folds},
      {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
      {"split", std::move(split)},
      {"glasso", {{"tol", cfg.glasso.tol}, {"max_iter", cfg.glasso.max_iter}}},
      {"optimize", {{"max_iter", cfg.optimize.max_iter}, {"tau", cfg.optimize.tau}}},
  };
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
    cfg.representation = j.value("representation", cfg.representation);
    cfg.levels = j.value("levels", cfg.levels);
    cfg.ratio = j.value("ratio", cfg.ratio);
    cfg.eps = j.value("eps", cfg.eps);
    if (j.contains("gamma")) {
      const json& g = j["gamma"];
      if (g.is_string()) {
        if (g.get<std::string>() != "auto") throw Error(ErrorKind::ConfigError, "gamma must be a number or \"auto\"");
      } else {
        cfg.gamma = g.get<double>();
      }
    }
    if (j.contains("integrator")) cfg.integrator = integrator_from_string(j["integrator"].get<std::string>());
    cfg.c_grid = j.value("c_grid", cfg.c_grid);
    cfg.folds = j.value("folds", cfg.folds);
    if (j.contains("seed") && !j["seed"].is_null()) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("split")) {
      const json& s = j["split"];
      const std::string mode = s.value("mode", std::string("odd-even"));
      if (mode == "odd-even") {
        cfg.split.mode = SplitSpec::Mode::OddEven;
      } else if (mode == "ids") {
        cfg.split.mode = SplitSpec::Mode::Ids;
        cfg.split.train_ids = s.value("train", std::vector<std::string>{});
        cfg.split.test_ids = s.value("test", std::vector<std::string>{});
      } else {
        throw Error(ErrorKind::ConfigError, "unknown split mode '" + mode + "'");
      }
    }
    if (j.contains("glasso")) {
      cfg.glasso.tol = j["glasso"].value("tol", cfg.glasso.tol);
      cfg.glasso.max_iter = j["glasso"].value("max_iter", cfg.glasso.max_iter);
    }
    if (j.contains("optimize")) {
      cfg.optimize.max_iter = j["optimize"].value("max_iter", cfg.optimize.max_iter);
      cfg.optimize.tau = j["optimize"].value("tau", cfg.optimize.tau);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("bad config: ") + e.what());
  }
  return cfg;
}

Representation represent(const std::vector<FrameFeatureSequence>& data, const ExperimentConfig& cfg) {
  Representation out;
  out.hierarchies.reserve(data.size());
  for (const auto& f : data) {
    if (cfg.representation == "cov") {
      out.hierarchies.push_back(single_level(f.id, cov_rp(f, cfg.eps)));
    } else if (cfg.representation == "invcov") {
      out.hierarchies.push_back(single_level(f.id, inverse_cov_rp(f, cfg.eps)));
    } else {
      std::size_t warnings = 0;
      out.hierarchies.push_back(sice_hierarchy(f, cfg.levels, cfg.ratio, cfg.glasso, &warnings));
      out.path_warnings += warnings;
    }
  }
  return out;
}

Split make_split(const std::vector<FrameFeatureSequence>& data, const SplitSpec& spec) {
  Split split;
  if (spec.mode == SplitSpec::Mode::OddEven) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      (subject_of(data[i].id) % 2 == 1 ? split.train : split.test).push_back(i);
    }
  } else {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < data.size(); ++i) index.emplace(data[i].id, i);
    auto lookup = [&](const std::vector<std::string>& ids, std::vector<std::size_t>& into) {
      for (const auto& id : ids) {
        const auto it = index.find(id);
        if (it == index.end()) throw Error(ErrorKind::NotFound, "split references unknown id '" + id + "'");
        into.push_back(it->second);
      }
      std::sort(into.begin(), into.end());
      into.erase(std::unique(into.begin(), into.end()), into.end());
    };
    lookup(spec.train_ids, split.train);
    lookup(spec.test_ids, split.test);
    std::vector<std::size_t> both;
    std::set_intersection(split.train.begin(), split.train.end(), split.test.begin(), split.test.end(),
                          std::back_inserter(both));
    if (!both.empty()) throw Error(ErrorKind::ConfigError, "train and test splits overlap at " + data[both[0]].id);
  }
  if (split.train.empty()) throw Error(ErrorKind::ConfigError, "training split is empty");
  if (split.test.empty()) throw Error(ErrorKind::ConfigError, "test split is empty");
  return split;
}

std::vector<int> stratified_folds(const std::vector<std::string>& labels, int folds, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), 0);
  int offset = 0;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < members.size(); ++k) {
      fold[members[k]] = static_cast<int>((k + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(folds));
    }
    offset += static_cast<int>(members.size());
  }
  return fold;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<FrameFeatureSequence>& train,
                                const std::vector<FrameFeatureSequence>& test) {
  cfg.validate();
  if (train.empty()) throw Error(ErrorKind::ConfigError, "training split is empty");
  if (test.empty()) throw Error(ErrorKind::ConfigError, "test split is empty");
  const std::vector<std::string> train_labels = labels_of(train, "training");

  ExperimentResult res;
  Stopwatch clock;
  double total = 0.0;
  auto stage = [&](const char* name) {
    const double s = clock.lap();
    total += s;
    res.timing[name] = s;
  };

  const Representation rep = represent(train, cfg);
  stage("represent_train");

  std::vector<LogHierarchy> logs;
  logs.reserve(rep.hierarchies.size());
  for (const auto& h : rep.hierarchies) logs.push_back(log_images(h));
  const KernelConfig kernel = cfg.gamma ? KernelConfig(*cfg.gamma) : median_heuristic(std::span<const LogHierarchy>(logs));
  const BlockCache cache(logs, kernel);
  stage("block_cache");

  const Integrator integrator = effective_integrator(cfg);
  const auto levels = static_cast<Eigen::Index>(cache.levels());
  const Eigen::Index level_candidates = integrator == Integrator::Single ? levels : 1;
  RepresentationSpec spec{cfg.representation, cfg.levels, cfg.ratio, cfg.eps};
  if (cfg.representation == "cov" || cfg.representation == "invcov") spec.levels = 1;

  const std::vector<int> fold = stratified_folds(train_labels, cfg.folds, *cfg.seed);
  const TrainingData full{&cache, rep.hierarchies, train_labels, {}};
  double best_accuracy = -1.0;
  for (Eigen::Index level = 0; level < level_candidates; ++level) {
    for (double c : cfg.c_grid) {
      TrainConfig tc;
      tc.integrator = integrator;
      tc.c = c;
      tc.level = level;
      tc.optimize = cfg.optimize;
      std::size_t correct = 0;
      for (int f = 0; f < cfg.folds; ++f) {
        std::vector<std::size_t> fit, held;
        for (std::size_t i = 0; i < train.size(); ++i) (fold[i] == f ? held : fit).push_back(i);
        if (held.empty()) continue;
        TrainingData td = full;
        td.subset = fit;
        TrainedClassifier model;
        try {
          model = train_multiclass(td, tc, kernel, spec);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::InsufficientClass || e.kind() == ErrorKind::DegenerateLabels) {
            throw Error(ErrorKind::ConfigError, std::string("too few training samples for ") +
                                                    std::to_string(cfg.folds) + " folds: " + e.message());
          }
          throw;
        }
        for (std::size_t i : held) correct += predict_cached(model, cache, i).label == train_labels[i] ? 1 : 0;
      }
      const double accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
      json row{{"c", c}, {"accuracy", accuracy}};
      if (integrator == Integrator::Single) row["level"] = level;
      res.cv.table.push_back(std::move(row));
      if (accuracy > best_accuracy) {
        best_accuracy = accuracy;
        res.cv.c = c;
        res.cv.level = level;
      }
    }
  }
  stage("cross_validation");

  TrainConfig final_cfg;
  final_cfg.integrator = integrator;
  final_cfg.c = res.cv.c;
  final_cfg.level = res.cv.level;
  final_cfg.optimize = cfg.optimize;
  res.model = train_multiclass(full, final_cfg, kernel, spec);
  stage("final_training");

  // The test split is represented and its labels read only from here on.
  const Representation test_rep = represent(test, cfg);
  stage("represent_test");

  std::vector<std::string> classes = res.model.classes;
  for (const auto& f : test) {
    if (f.label && !std::binary_search(classes.begin(), classes.end(), *f.label)) {
      classes.insert(std::upper_bound(classes.begin(), classes.end(), *f.label), *f.label);
    }
  }
  auto class_index = [&](const std::string& c) {
    return static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), c) - classes.begin());
  };
  std::vector<std::vector<int>> confusion(classes.size(), std::vector<int>(classes.size(), 0));
  json predictions = json::array();
  std::size_t correct = 0, labeled = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Prediction p = predict(res.model, test_rep.hierarchies[i]);
    json row{{"id", test[i].id}, {"predicted", p.label}};
    if (test[i].label) {
      row["label"] = *test[i].label;
      ++labeled;
      if (p.label == *test[i].label) ++correct;
      ++confusion[class_index(*test[i].label)][class_index(p.label)];
    }
    predictions.push_back(std::move(row));
  }
  if (labeled == 0) throw Error(ErrorKind::ConfigError, "test split has no labels");
  res.accuracy = static_cast<double>(correct) / static_cast<double>(labeled);
  json recall = json::object();
  for (std::size_t k = 0; k < classes.size(); ++k) {
    int row_total = 0;
    for (int v : confusion[k]) row_total += v;
    if (row_total > 0) recall[classes[k]] = static_cast<double>(confusion[k][k]) / row_total;
  }
  stage("evaluation");
  res.timing["total"] = total;

  json cv_table = json::array();
  for (const auto& row : res.cv.table) cv_table.push_back(row);
  json selected{{"c", res.cv.c}};
  if (integrator == Integrator::Single) selected["level"] = res.cv.level;
  res.report = json{
      {"config", to_json(cfg)},
      {"n_train", train.size()},
      {"n_test", test.size()},
      {"dim", res.model.dim},
      {"levels", res.model.levels},
      {"gamma", kernel.gamma},
      {"path_warnings", rep.path_warnings + test_rep.path_warnings},
      {"cross_validation", {{"selected", std::move(selected)}, {"candidates", std::move(cv_table)}}},
      {"weights", weights_json(res.model.weights)},
      {"j_trace", res.model.j_trace},
      {"accuracy", res.accuracy},
      {"classes", classes},
      {"confusion", confusion},
      {"recall", std::move(recall)},
      {"predictions", std::move(predictions)},
  };
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<FrameFeatureSequence>& data) {
  const Split split = make_split(data, cfg.split);
  std::vector<FrameFeatureSequence> train, test;
  for (std::size_t i : split.train) train.push_back(data[i]);
  for (std::size_t i : split.test) test.push_back(data[i]);
  return run_experiment(cfg, train, test);
}

}  // namespace sicerp
