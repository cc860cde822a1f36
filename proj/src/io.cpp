#include "sicerp/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sicerp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error format_error(const fs::path& file, std::size_t line, const std::string& what) {
  return Error(ErrorKind::FormatError, file.string() + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
  return out;
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

json parse_document(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw format_error(path, line_of_offset(text, e.byte), "invalid JSON");
  }
}

// A rows x cols array of finite numbers; rows may be required to share a width.
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::FormatError, what + " must be a non-empty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw Error(ErrorKind::FormatError, what + " row " + std::to_string(r) + " has the wrong arity");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw Error(ErrorKind::FormatError, what + " row " + std::to_string(r) + " has a non-numeric value");
      }
      const double v = row[c].get<double>();
      if (!std::isfinite(v)) throw Error(ErrorKind::FormatError, what + " has a non-finite value");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string required_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
    throw Error(ErrorKind::FormatError, where + ": missing or empty \"" + key + "\"");
  }
  return j[key].get<std::string>();
}

FrameFeatureSequence sequence_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::FormatError, where + ": expected an object");
  FrameFeatureSequence f;
  f.id = required_string(j, "id", where);
  if (j.contains("label") && !j["label"].is_null()) f.label = required_string(j, "label", where);
  if (!j.contains("frames")) throw Error(ErrorKind::FormatError, where + ": missing \"frames\"");
  f.frames = matrix_from_json(j["frames"], where + ": frames");
  return f;
}

double parse_double(std::string_view s, bool& ok) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  ok = ec == std::errc() && ptr == s.data() + s.size() && !s.empty() && std::isfinite(v);
  return v;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const fs::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorKind::FormatError, path.string() + ": truncated header");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

json weights_to_json(const HierarchyWeights& w) {
  json j = json::object();
  if (w.kind == Integrator::M) j["m"] = matrix_to_json(w.m);
  else if (w.kind != Integrator::Emk) j["beta"] = std::vector<double>(w.beta.data(), w.beta.data() + w.beta.size());
  return j;
}

json hierarchy_to_json(const SiceHierarchy& h) {
  json levels = json::array();
  for (const auto& l : h.levels) levels.push_back(matrix_to_json(l.matrix()));
  return json{{"id", h.sample_id}, {"lambdas", h.lambdas}, {"levels", std::move(levels)}};
}

SiceHierarchy hierarchy_from_json(const json& j, const std::string& where) {
  SiceHierarchy h;
  h.sample_id = required_string(j, "id", where);
  if (!j.contains("lambdas") || !j.contains("levels") || !j["levels"].is_array()) {
    throw Error(ErrorKind::FormatError, where + ": missing lambdas or levels");
  }
  for (const auto& l : j["lambdas"]) {
    if (!l.is_number()) throw Error(ErrorKind::FormatError, where + ": non-numeric lambda");
    h.lambdas.push_back(l.get<double>());
  }
  for (const auto& l : j["levels"]) {
    try {
      h.levels.emplace_back(matrix_from_json(l, where + ": level"));
    } catch (const Error& e) {
      throw Error(ErrorKind::FormatError, where + ": " + e.message());
    }
  }
  h.validate();
  return h;
}

}  // namespace

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::Raw: return "raw";
    case FeatureMode::Coordinates: return "coordinates";
    case FeatureMode::Velocity: return "velocity";
  }
  return "raw";
}

FeatureMode feature_mode_from_string(const std::string& name) {
  if (name == "raw") return FeatureMode::Raw;
  if (name == "coordinates") return FeatureMode::Coordinates;
  if (name == "velocity") return FeatureMode::Velocity;
  throw Error(ErrorKind::ConfigError, "unknown feature mode '" + name + "'");
}

std::vector<FrameFeatureSequence> read_sequences_jsonl(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<FrameFeatureSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw format_error(path, lineno, "invalid JSON");
    }
    try {
      out.push_back(sequence_from_json(j, "sample"));
      out.back().validate();
    } catch (const Error& e) {
      throw format_error(path, lineno, e.message());
    }
  }
  return out;
}

void write_sequences_jsonl(const fs::path& path, const std::vector<FrameFeatureSequence>& seqs) {
  std::ofstream out = open_out(path);
  for (const auto& s : seqs) {
    json j{{"id", s.id}};
    if (s.label) j["label"] = *s.label;
    j["frames"] = matrix_to_json(s.frames);
    out << j.dump() << '\n';
  }
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell(line.data() + start, (comma == std::string::npos ? line.size() : comma) - start);
      bool ok = false;
      const double v = parse_double(cell, ok);
      if (!ok) throw format_error(path, lineno, "bad value '" + std::string(cell) + "'");
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw format_error(path, lineno, "expected " + std::to_string(rows.front().size()) + " columns, found " +
                                           std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FrameFeatureSequence> ingest(const fs::path& manifest) {
  const json doc = parse_document(manifest);
  if (!doc.is_object()) throw format_error(manifest, 1, "manifest must be an object");
  const fs::path base = manifest.parent_path();
  const FeatureMode mode = feature_mode_from_string(doc.value("mode", std::string("raw")));
  int joints = 0;
  if (mode != FeatureMode::Raw) {
    if (!doc.contains("joints") || !doc["joints"].is_number_integer() || doc["joints"].get<int>() <= 0) {
      throw Error(ErrorKind::ConfigError, manifest.string() + ": skeleton modes need a positive \"joints\"");
    }
    joints = doc["joints"].get<int>();
  }

  std::vector<FrameFeatureSequence> raw;
  if (doc.contains("sequences")) {
    auto more = read_sequences_jsonl(base / doc["sequences"].get<std::string>());
    raw.insert(raw.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  if (doc.contains("samples")) {
    const json& samples = doc["samples"];
    if (!samples.is_array()) throw format_error(manifest, 1, "\"samples\" must be an array");
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const json& s = samples[k];
      const std::string where = "samples[" + std::to_string(k) + "]";
      if (!s.is_object()) throw Error(ErrorKind::FormatError, manifest.string() + ": " + where + " must be an object");
      if (s.contains("path")) {
        FrameFeatureSequence f;
        f.id = required_string(s, "id", manifest.string() + ": " + where);
        if (s.contains("label") && !s["label"].is_null()) f.label = required_string(s, "label", where);
        const fs::path file = base / s["path"].get<std::string>();
        const auto rows = read_numeric_csv(file);
        if (rows.empty()) throw format_error(file, 1, "no frames");
        f.frames.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
          for (std::size_t c = 0; c < rows[r].size(); ++c)
            f.frames(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        raw.push_back(std::move(f));
      } else {
        try {
          raw.push_back(sequence_from_json(s, where));
        } catch (const Error& e) {
          throw Error(ErrorKind::FormatError, manifest.string() + ": " + e.message());
        }
      }
    }
  }

  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (raw[i].id == raw[i - 1].id) {
      throw Error(ErrorKind::FormatError, manifest.string() + ": duplicate sample id '" + raw[i].id + "'");
    }
  }

  std::vector<FrameFeatureSequence> out;
  out.reserve(raw.size());
  for (auto& f : raw) {
    if (mode == FeatureMode::Raw) {
      f.validate();
      out.push_back(std::move(f));
      continue;
    }
    SkeletonSequence skel;
    skel.joints = joints;
    for (Eigen::Index r = 0; r < f.frames.rows(); ++r) {
      std::vector<double> frame(static_cast<std::size_t>(f.frames.cols()));
      for (Eigen::Index c = 0; c < f.frames.cols(); ++c) frame[static_cast<std::size_t>(c)] = f.frames(r, c);
      skel.frames.push_back(std::move(frame));
    }
    FrameFeatureSequence feat;
    try {
      feat = mode == FeatureMode::Coordinates ? coordinate_features(skel) : velocity_features(skel);
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + f.id + ": " + e.message());
    }
    feat.id = f.id;
    feat.label = f.label;
    out.push_back(std::move(feat));
  }
  return out;
}

std::vector<LabeledHierarchy> read_hierarchies(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<LabeledHierarchy> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      LabeledHierarchy lh;
      lh.hierarchy = hierarchy_from_json(j, "hierarchy");
      if (j.contains("label") && j["label"].is_string()) lh.label = j["label"].get<std::string>();
      out.push_back(std::move(lh));
    } catch (const json::exception&) {
      throw format_error(path, lineno, "invalid hierarchy record");
    } catch (const Error& e) {
      throw format_error(path, lineno, e.message());
    }
  }
  return out;
}

void write_hierarchies(const fs::path& path, const std::vector<LabeledHierarchy>& data) {
  std::ofstream out = open_out(path);
  for (const auto& lh : data) {
    json j = hierarchy_to_json(lh.hierarchy);
    if (lh.label) j["label"] = *lh.label;
    out << j.dump() << '\n';
  }
}

void save_model(const fs::path& path, const TrainedClassifier& model) {
  json pairs = json::array();
  for (const auto& p : model.pairs) {
    pairs.push_back({{"positive", p.positive}, {"negative", p.negative}, {"support", p.support},
                     {"coef", p.coef}, {"bias", p.bias}});
  }
  json support = json::array();
  for (const auto& h : model.support) support.push_back(hierarchy_to_json(h));
  const json doc{
      {"format", "sicerp-model"},
      {"format_version", TrainedClassifier::kFormatVersion},
      {"representation",
       {{"kind", model.representation.kind},
        {"levels", model.representation.levels},
        {"ratio", model.representation.ratio},
        {"eps", model.representation.eps}}},
      {"integrator", to_string(model.weights.kind)},
      {"weights", weights_to_json(model.weights)},
      {"kernel", {{"gamma", model.kernel.gamma}}},
      {"c", model.c},
      {"levels", model.levels},
      {"dim", model.dim},
      {"classes", model.classes},
      {"pairs", std::move(pairs)},
      {"support", std::move(support)},
      {"j_trace", model.j_trace},
  };
  std::ofstream out = open_out(path);
  out << doc.dump(1) << '\n';
}

TrainedClassifier load_model(const fs::path& path) {
  const json doc = parse_document(path);
  TrainedClassifier m;
  try {
    if (doc.at("format").get<std::string>() != "sicerp-model") {
      throw Error(ErrorKind::FormatError, path.string() + ": not a model file");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != TrainedClassifier::kFormatVersion) {
      throw Error(ErrorKind::FormatError, path.string() + ": unsupported model version " + std::to_string(version));
    }
    const json& rep = doc.at("representation");
    m.representation.kind = rep.at("kind").get<std::string>();
    m.representation.levels = rep.at("levels").get<int>();
    m.representation.ratio = rep.at("ratio").get<double>();
    m.representation.eps = rep.at("eps").get<double>();
    m.levels = doc.at("levels").get<Eigen::Index>();
    m.dim = doc.at("dim").get<Eigen::Index>();
    m.weights.kind = integrator_from_string(doc.at("integrator").get<std::string>());
    const json& w = doc.at("weights");
    if (w.contains("beta")) {
      const auto b = w["beta"].get<std::vector<double>>();
      m.weights.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    }
    if (w.contains("m")) m.weights.m = matrix_from_json(w["m"], "weights");
    m.weights.validate(m.levels);
    m.kernel = KernelConfig(doc.at("kernel").at("gamma").get<double>());
    m.c = doc.at("c").get<double>();
    m.classes = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& s : doc.at("support")) m.support.push_back(hierarchy_from_json(s, "support"));
    for (const auto& p : doc.at("pairs")) {
      PairModel pm;
      pm.positive = p.at("positive").get<std::size_t>();
      pm.negative = p.at("negative").get<std::size_t>();
      pm.support = p.at("support").get<std::vector<std::size_t>>();
      pm.coef = p.at("coef").get<std::vector<double>>();
      pm.bias = p.at("bias").get<double>();
      if (pm.support.size() != pm.coef.size() || pm.positive >= m.classes.size() ||
          pm.negative >= m.classes.size()) {
        throw Error(ErrorKind::FormatError, path.string() + ": inconsistent pair record");
      }
      for (std::size_t s : pm.support) {
        if (s >= m.support.size()) throw Error(ErrorKind::FormatError, path.string() + ": bad support index");
      }
      m.pairs.push_back(std::move(pm));
    }
    m.j_trace = doc.at("j_trace").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, path.string() + ": " + e.what());
  }
  m.refresh_logs();
  return m;
}

void write_block_cache(const fs::path& path, const BlockCache& cache) {
  std::ofstream out = open_out(path, true);
  out.write("SRGB", 4);
  write_u32(out, kBlockCacheVersion);
  write_u32(out, static_cast<std::uint32_t>(cache.size()));
  write_u32(out, static_cast<std::uint32_t>(cache.levels()));
  for (double v : cache.raw()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
    out.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!out) throw Error(ErrorKind::ConfigError, "failed writing " + path.string());
}

BlockCache read_block_cache(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "SRGB") {
    throw Error(ErrorKind::FormatError, path.string() + ": bad magic");
  }
  const std::uint32_t version = read_u32(in, path);
  if (version != kBlockCacheVersion) {
    throw Error(ErrorKind::FormatError, path.string() + ": unsupported cache version " + std::to_string(version));
  }
  const std::uint64_t n = read_u32(in, path);
  const std::uint64_t t = read_u32(in, path);
  const std::uint64_t count = n * (n + 1) / 2 * t * t;
  std::vector<double> raw(count);
  for (auto& v : raw) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorKind::FormatError, path.string() + ": truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::FormatError, path.string() + ": trailing bytes");
  }
  return BlockCache(static_cast<std::size_t>(n), static_cast<std::size_t>(t), std::move(raw));
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out = open_out(path);
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      if (c > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  const auto rows = read_numeric_csv(path);
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

const SpdMatrix& find_level(const std::vector<LabeledHierarchy>& data, const std::string& id, std::size_t level) {
  for (const auto& lh : data) {
    if (lh.hierarchy.sample_id != id) continue;
    if (level >= lh.hierarchy.size()) {
      throw Error(ErrorKind::NotFound, "sample " + id + " has no level " + std::to_string(level));
    }
    return lh.hierarchy.levels[level];
  }
  throw Error(ErrorKind::NotFound, "unknown sample id '" + id + "'");
}

}  // namespace sicerp
