// Command-line front end: ingest, synth, represent, train, eval, dump.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sicerp/experiment.hpp"
#include "sicerp/io.hpp"
#include "sicerp/synth.hpp"

using namespace sicerp;
using nlohmann::json;

namespace {

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, path + ": " + e.what());
  }
}

std::vector<std::string> read_id_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::optional<double> parse_gamma(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double g = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return g;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ConfigError, "gamma must be a number or 'auto', got '" + text + "'");
  }
}

// Options shared by `represent` and `train`.
struct RepresentationFlags {
  std::optional<std::string> representation;
  std::optional<int> levels;
  std::optional<double> ratio;
  std::optional<double> eps;
  std::optional<std::string> gamma;

  void add_to(CLI::App* app) {
    app->add_option("--representation", representation, "cov | invcov | sice | hierarchy")
        ->check(CLI::IsMember({"cov", "invcov", "sice", "hierarchy"}));
    app->add_option("--levels", levels, "number of SICE levels T");
    app->add_option("--ratio", ratio, "smallest penalty as a fraction of the largest");
    app->add_option("--eps", eps, "ridge added to covariances for cov/invcov");
    app->add_option("--gamma", gamma, "log-Euclidean kernel width, or 'auto'");
  }

  void apply(ExperimentConfig& cfg) const {
    if (representation) cfg.representation = *representation;
    if (levels) cfg.levels = *levels;
    if (ratio) cfg.ratio = *ratio;
    if (eps) cfg.eps = *eps;
    if (gamma) cfg.gamma = parse_gamma(*gamma);
  }
};

int run_ingest(const std::string& manifest, const std::string& out) {
  const auto data = ingest(manifest);
  write_sequences_jsonl(out, data);
  std::printf("ingested %zu samples\n", data.size());
  return 0;
}

struct SynthFlags {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string truth;
  SyntheticSpec spec;
  std::vector<std::string> classes{"chain", "grid", "random-sparse"};
  double density = 0.1;
};

int run_synth(SynthFlags& f) {
  f.spec.seed = *f.seed;
  f.spec.classes.clear();
  for (const auto& c : f.classes) f.spec.classes.push_back({structure_from_string(c), f.density});
  const auto data = synth_generate(f.spec);
  write_sequences_jsonl(f.out, data.samples);
  if (!f.truth.empty()) {
    json truth = json::array();
    for (std::size_t k = 0; k < data.precisions.size(); ++k) {
      const auto& p = data.precisions[k];
      json rows = json::array();
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        rows.push_back(json::array());
        for (Eigen::Index c = 0; c < p.cols(); ++c) rows.back().push_back(p(r, c));
      }
      truth.push_back({{"label", "class" + std::to_string(k)}, {"structure", f.classes[k]}, {"precision", rows}});
    }
    write_json(f.truth, truth);
  }
  std::printf("wrote %zu samples\n", data.samples.size());
  return 0;
}

int run_represent(const std::string& data_path, const std::string& out, const std::string& cache_path,
                  const RepresentationFlags& flags) {
  ExperimentConfig cfg;
  flags.apply(cfg);
  cfg.seed = 0;  // unused here
  cfg.validate();
  const auto data = read_sequences_jsonl(data_path);
  const Representation rep = represent(data, cfg);
  std::vector<LabeledHierarchy> labeled;
  for (std::size_t i = 0; i < data.size(); ++i) labeled.push_back({rep.hierarchies[i], data[i].label});
  write_hierarchies(out, labeled);
  if (!cache_path.empty()) {
    std::vector<LogHierarchy> logs;
    for (const auto& h : rep.hierarchies) logs.push_back(log_images(h));
    const KernelConfig kernel = cfg.gamma ? KernelConfig(*cfg.gamma) : median_heuristic(std::span<const LogHierarchy>(logs));
    write_block_cache(cache_path, BlockCache(logs, kernel));
    std::printf("gamma %.17g\n", kernel.gamma);
  }
  std::printf("represented %zu samples, %zu path warnings\n", data.size(), rep.path_warnings);
  return 0;
}

struct TrainFlags {
  std::string data;
  std::string config;
  std::string model;
  std::string report;
  std::optional<std::uint64_t> seed;
  RepresentationFlags rep;
  std::optional<std::string> integrator;
  std::vector<double> c_grid;
  std::optional<int> folds;
  std::optional<std::string> split;
  std::string train_ids;
  std::string test_ids;
};

int run_train(const TrainFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : experiment_config_from_json(read_json(f.config));
  f.rep.apply(cfg);
  cfg.seed = *f.seed;
  if (f.integrator) cfg.integrator = integrator_from_string(*f.integrator);
  if (!f.c_grid.empty()) cfg.c_grid = f.c_grid;
  if (f.folds) cfg.folds = *f.folds;
  if (f.split) cfg.split.mode = *f.split == "ids" ? SplitSpec::Mode::Ids : SplitSpec::Mode::OddEven;
  if (!f.train_ids.empty()) cfg.split.train_ids = read_id_list(f.train_ids);
  if (!f.test_ids.empty()) cfg.split.test_ids = read_id_list(f.test_ids);
  cfg.validate();

  const auto data = read_sequences_jsonl(f.data);
  const ExperimentResult res = run_experiment(cfg, data);
  save_model(f.model, res.model);
  if (!f.report.empty()) {
    write_json(f.report, res.report);
    write_json(f.report + ".timing.json", res.timing);
  }
  std::printf("test accuracy %.4f (C=%g", res.accuracy, res.cv.c);
  if (res.model.weights.kind == Integrator::Single) std::printf(", level %ld", static_cast<long>(res.cv.level));
  std::printf(")\n");
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_path, const std::string& out) {
  const TrainedClassifier model = load_model(model_path);
  const auto data = read_sequences_jsonl(data_path);
  ExperimentConfig cfg;
  cfg.representation = model.representation.kind;
  cfg.levels = model.representation.levels;
  cfg.ratio = model.representation.ratio;
  cfg.eps = model.representation.eps;
  const Representation rep = represent(data, cfg);

  json predictions = json::array();
  std::size_t correct = 0, labeled = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Prediction p = predict(model, rep.hierarchies[i]);
    json row{{"id", data[i].id}, {"predicted", p.label}, {"decision_values", p.decision_values}};
    if (data[i].label) {
      row["label"] = *data[i].label;
      ++labeled;
      correct += p.label == *data[i].label;
    }
    predictions.push_back(std::move(row));
  }
  json result{{"predictions", predictions}};
  if (labeled > 0) result["accuracy"] = static_cast<double>(correct) / static_cast<double>(labeled);
  if (!out.empty()) write_json(out, result);
  if (labeled > 0) std::printf("accuracy %.4f over %zu labeled samples\n", result["accuracy"].get<double>(), labeled);
  else std::printf("predicted %zu samples\n", data.size());
  return 0;
}

int run_dump(const std::string& hierarchies, const std::string& model_path, const std::string& id, std::size_t level,
             const std::string& out) {
  std::vector<LabeledHierarchy> data;
  if (!hierarchies.empty()) {
    data = read_hierarchies(hierarchies);
  } else {
    const TrainedClassifier model = load_model(model_path);
    for (const auto& h : model.support) data.push_back({h, std::nullopt});
  }
  write_matrix_csv(out, find_level(data, id, level).matrix());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse inverse covariance representations for skeleton sequences"};
  app.require_subcommand(1);

  std::string manifest, ingest_out;
  auto* ingest_cmd = app.add_subcommand("ingest", "read a dataset manifest into a JSONL sequence file");
  ingest_cmd->add_option("--manifest", manifest)->required();
  ingest_cmd->add_option("--out", ingest_out)->required();

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic Gaussian benchmark");
  synth_cmd->add_option("--seed", synth.seed)->required();
  synth_cmd->add_option("--out", synth.out)->required();
  synth_cmd->add_option("--truth", synth.truth, "write ground-truth precisions as JSON");
  synth_cmd->add_option("--d", synth.spec.d);
  synth_cmd->add_option("--m-min", synth.spec.m_min);
  synth_cmd->add_option("--m-max", synth.spec.m_max);
  synth_cmd->add_option("--train-per-class", synth.spec.train_per_class);
  synth_cmd->add_option("--test-per-class", synth.spec.test_per_class);
  synth_cmd->add_option("--classes", synth.classes, "chain | grid | random-sparse, one per class")->delimiter(',');
  synth_cmd->add_option("--density", synth.density, "edge probability for random-sparse classes");
  synth_cmd->add_option("--edge", synth.spec.edge);
  synth_cmd->add_option("--noise", synth.spec.noise);

  std::string rep_data, rep_out, rep_cache;
  RepresentationFlags rep_flags;
  auto* rep_cmd = app.add_subcommand("represent", "compute SPD representations of every sequence");
  rep_cmd->add_option("--data", rep_data)->required();
  rep_cmd->add_option("--out", rep_out)->required();
  rep_cmd->add_option("--cache", rep_cache, "also write the SRGB Gram block cache");
  rep_flags.add_to(rep_cmd);

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "cross-validate, train and evaluate on a split");
  train_cmd->add_option("--data", train.data)->required();
  train_cmd->add_option("--seed", train.seed)->required();
  train_cmd->add_option("--model", train.model)->required();
  train_cmd->add_option("--report", train.report, "report JSON; timing goes to <report>.timing.json");
  train_cmd->add_option("--config", train.config, "experiment config JSON; flags override it");
  train.rep.add_to(train_cmd);
  train_cmd->add_option("--integrator", train.integrator)->check(CLI::IsMember({"single", "beta", "M", "mkl", "emk"}));
  train_cmd->add_option("--c-grid", train.c_grid)->delimiter(',');
  train_cmd->add_option("--folds", train.folds);
  train_cmd->add_option("--split", train.split)->check(CLI::IsMember({"odd-even", "ids"}));
  train_cmd->add_option("--train-ids", train.train_ids, "file with one training id per line");
  train_cmd->add_option("--test-ids", train.test_ids, "file with one test id per line");

  std::string eval_model, eval_data, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "predict sequences with a saved model");
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--out", eval_out, "predictions JSON");

  std::string dump_hier, dump_model, dump_id, dump_out;
  std::size_t dump_level = 0;
  auto* dump_cmd = app.add_subcommand("dump", "write one SPD level as a CSV matrix");
  auto* hier_opt = dump_cmd->add_option("--hierarchies", dump_hier, "file written by 'represent'");
  auto* model_opt = dump_cmd->add_option("--model", dump_model, "dump a support sample of a model");
  hier_opt->excludes(model_opt);
  dump_cmd->add_option("--id", dump_id)->required();
  dump_cmd->add_option("--level", dump_level);
  dump_cmd->add_option("--out", dump_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest_cmd) return run_ingest(manifest, ingest_out);
    if (*synth_cmd) return run_synth(synth);
    if (*rep_cmd) return run_represent(rep_data, rep_out, rep_cache, rep_flags);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval_model, eval_data, eval_out);
    if (*dump_cmd) {
      if (dump_hier.empty() && dump_model.empty()) {
        throw Error(ErrorKind::ConfigError, "dump needs --hierarchies or --model");
      }
      return run_dump(dump_hier, dump_model, dump_id, dump_level, dump_out);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
