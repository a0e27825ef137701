#include "mgtcalib/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mgtcalib {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Thrown inside a record parse; converted into a LineIssue by the caller.
struct RecordError {
  IssueKind kind;
  std::string detail;
};

[[noreturn]] void malformed(const std::string& detail) {
  throw RecordError{IssueKind::kMalformed, detail};
}

std::vector<double> real_array(const json& j, const std::string& name) {
  if (!j.is_array()) malformed("'" + name + "' must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) malformed("'" + name + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<std::int64_t> int_array(const json& j, const std::string& name) {
  if (!j.is_array()) malformed("'" + name + "' must be an array");
  std::vector<std::int64_t> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (v.is_number_integer()) {
      out.push_back(v.get<std::int64_t>());
    } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
               std::abs(v.get<double>()) < 9.0e18) {
      out.push_back(static_cast<std::int64_t>(v.get<double>()));
    } else {
      malformed("'" + name + "' must hold integers");
    }
  }
  return out;
}

ScoreChannels parse_channels(const json& j) {
  if (!j.is_object()) malformed("'scores' must be an object");
  ScoreChannels ch;
  for (const auto& [key, value] : j.items()) {
    if (key == "logprob") {
      ch.logprob = real_array(value, key);
    } else if (key == "rank") {
      ch.rank = int_array(value, key);
    } else if (key == "entropy") {
      ch.entropy = real_array(value, key);
    } else {
      malformed("unknown score channel '" + key + "'");
    }
  }
  return ch;
}

std::size_t first_length(const ScoreChannels& ch) {
  if (ch.logprob) return ch.logprob->size();
  if (ch.rank) return ch.rank->size();
  if (ch.entropy) return ch.entropy->size();
  return 0;
}

TokenScoreSequence parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) malformed("record must be a JSON object");

  TokenScoreSequence seq;
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
    malformed("'id' must be a non-empty string");
  }
  seq.id = j["id"].get<std::string>();

  if (j.contains("label") && !j["label"].is_null()) {
    const auto& l = j["label"];
    if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1)) {
      malformed("'label' must be 0, 1 or null");
    }
    seq.label = static_cast<Label>(l.get<int>());
  }
  if (j.contains("source") && !j["source"].is_null()) {
    if (!j["source"].is_string()) malformed("'source' must be a string");
    seq.source = j["source"].get<std::string>();
  }
  if (!j.contains("scores")) malformed("missing 'scores'");
  seq.scores = parse_channels(j["scores"]);
  seq.n_tokens = first_length(seq.scores);
  if (j.contains("n_tokens")) {
    if (!j["n_tokens"].is_number_unsigned()) malformed("'n_tokens' must be a non-negative integer");
    seq.n_tokens = j["n_tokens"].get<std::size_t>();
  }
  if (j.contains("aux")) {
    if (!j["aux"].is_array()) malformed("'aux' must be an array");
    for (const auto& a : j["aux"]) {
      if (!a.is_object() || !a.contains("kind") || !a["kind"].is_string()) {
        malformed("aux entries need a string 'kind'");
      }
      const auto kind = parse_aux_kind(a["kind"].get<std::string>());
      if (!kind) malformed("unknown aux kind '" + a["kind"].get<std::string>() + "'");
      if (!a.contains("scores")) malformed("aux entry missing 'scores'");
      seq.aux.push_back(AuxSequence{*kind, parse_channels(a["scores"])});
    }
  }
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "id" && key != "label" && key != "source" && key != "scores" && key != "n_tokens" &&
        key != "aux") {
      malformed("unknown field '" + key + "'");
    }
  }

  const auto violations = validate_sequence(seq);
  if (!violations.empty()) {
    std::string detail;
    for (const auto& v : violations) detail += (detail.empty() ? "" : "; ") + v;
    throw RecordError{IssueKind::kInvariant, detail};
  }
  return seq;
}

std::string issue_text(const LineIssue& issue) {
  return "line " + std::to_string(issue.line) + ": " + issue.detail;
}

[[noreturn]] void throw_issue(const LineIssue& issue) {
  switch (issue.kind) {
    case IssueKind::kMalformed:
      throw MalformedLine(issue.line, issue.detail);
    case IssueKind::kInvariant:
      throw InvariantViolation(issue.line, issue.detail);
    case IssueKind::kDuplicateId:
      throw DuplicateId(issue.line, issue.detail);
  }
  throw MalformedLine(issue.line, issue.detail);
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

/// Shared line loop; `on_issue` returns false to stop.
template <typename OnIssue>
Dataset read_lines(std::istream& in, OnIssue&& on_issue) {
  Dataset out;
  std::set<std::string> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (blank(line)) continue;
    try {
      auto seq = parse_record(line);
      if (!seen.insert(seq.id).second) {
        throw RecordError{IssueKind::kDuplicateId, "duplicate id '" + seq.id + "'"};
      }
      out.push_back(std::move(seq));
    } catch (const RecordError& e) {
      if (!on_issue(LineIssue{n, e.kind, e.detail})) break;
    }
  }
  return out;
}

ordered_json channels_json(const ScoreChannels& ch) {
  ordered_json j = ordered_json::object();
  if (ch.logprob) j["logprob"] = *ch.logprob;
  if (ch.rank) j["rank"] = *ch.rank;
  if (ch.entropy) j["entropy"] = *ch.entropy;
  return j;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

ScanResult scan_scores(std::istream& in) {
  ScanResult out;
  out.dataset = read_lines(in, [&](LineIssue issue) {
    out.issues.push_back(std::move(issue));
    return true;
  });
  return out;
}

ParseResult parse_scores(std::istream& in, const ParseOptions& options) {
  ParseResult out;
  out.dataset = read_lines(in, [&](const LineIssue& issue) {
    if (options.strict) throw_issue(issue);
    out.warnings.push_back(issue_text(issue));
    return true;
  });
  return out;
}

ParseResult parse_scores(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return parse_scores(in, options);
}

std::string to_jsonl_record(const TokenScoreSequence& seq) {
  ordered_json j;
  j["id"] = seq.id;
  j["label"] = seq.label ? json(static_cast<int>(*seq.label)) : json(nullptr);
  if (seq.source) j["source"] = *seq.source;
  j["scores"] = channels_json(seq.scores);
  if (!seq.aux.empty()) {
    ordered_json aux = ordered_json::array();
    for (const auto& a : seq.aux) {
      ordered_json e;
      e["kind"] = std::string(to_string(a.kind));
      e["scores"] = channels_json(a.scores);
      aux.push_back(std::move(e));
    }
    j["aux"] = std::move(aux);
  }
  return j.dump();
}

void write_scores(const Dataset& dataset, std::ostream& out) {
  for (const auto& seq : dataset) out << to_jsonl_record(seq) << "\n";
}

void write_scores(const Dataset& dataset, const std::filesystem::path& path) {
  std::ostringstream os;
  write_scores(dataset, os);
  write_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

std::string model_to_json(const ModelFile& model) {
  const auto& p = model.params;
  ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["w_mrf"] = {p.w_mrf[0][0], p.w_mrf[0][1], p.w_mrf[1][0], p.w_mrf[1][1]};
  j["t0"] = p.t0;
  j["T"] = p.iterations;
  j["use_mrf"] = p.use_mrf;
  j["use_positional"] = p.use_positional;
  j["epsilon_clip"] = p.epsilon_clip;
  j["calibrate_aux"] = p.calibrate_aux;
  j["normalization"] = p.normalization
                           ? ordered_json{{"lo", p.normalization->lo}, {"hi", p.normalization->hi}}
                           : ordered_json(nullptr);
  j["detector_kind"] = std::string(to_string(model.spec.kind));
  j["orientation"] = model.spec.orientation;
  j["rank_log"] = model.spec.rank_log;
  j["threshold"] = model.spec.threshold ? ordered_json(*model.spec.threshold) : ordered_json(nullptr);
  j["training_provenance"] = model.provenance;
  return j.dump(2) + "\n";
}

namespace {

const json& field(const json& j, const char* name) {
  if (!j.contains(name)) throw Malformed(std::string("model file missing '") + name + "'");
  return j.at(name);
}

template <typename T>
T typed(const json& j, const char* name) {
  const json& v = field(j, name);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw Malformed("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw Malformed("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw Malformed("");
    } else {
      if (!v.is_string()) throw Malformed("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw Malformed(std::string("model field '") + name + "' has the wrong type");
  }
}

}  // namespace

ModelFile model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Malformed(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Malformed("model file must be a JSON object");
  const int version = typed<int>(j, "schema_version");
  if (version != kModelSchemaVersion) {
    throw VersionMismatch("unsupported model schema_version " + std::to_string(version));
  }

  ModelFile m;
  const json& w = field(j, "w_mrf");
  if (!w.is_array() || w.size() != 4) throw Malformed("'w_mrf' must hold 4 numbers");
  for (std::size_t i = 0; i < 4; ++i) {
    if (!w[i].is_number()) throw Malformed("'w_mrf' must hold 4 numbers");
    m.params.w_mrf[i / 2][i % 2] = w[i].get<double>();
  }
  m.params.t0 = typed<double>(j, "t0");
  m.params.iterations = typed<int>(j, "T");
  m.params.use_mrf = typed<bool>(j, "use_mrf");
  m.params.use_positional = typed<bool>(j, "use_positional");
  m.params.epsilon_clip = typed<double>(j, "epsilon_clip");
  if (j.contains("calibrate_aux")) m.params.calibrate_aux = typed<bool>(j, "calibrate_aux");
  if (j.contains("normalization") && !j["normalization"].is_null()) {
    const json& n = j["normalization"];
    if (!n.is_object()) throw Malformed("'normalization' must be an object or null");
    m.params.normalization = NormalizationRange{typed<double>(n, "lo"), typed<double>(n, "hi")};
  }

  const auto kind = parse_detector_kind(typed<std::string>(j, "detector_kind"));
  if (!kind) throw Malformed("unknown detector_kind");
  m.spec.kind = *kind;
  m.spec.orientation = typed<int>(j, "orientation");
  if (m.spec.orientation != 1 && m.spec.orientation != -1) {
    throw ModelInvariantViolation("orientation must be +1 or -1");
  }
  m.spec.rank_log = typed<bool>(j, "rank_log");
  if (j.contains("threshold") && !j["threshold"].is_null()) {
    m.spec.threshold = typed<double>(j, "threshold");
  }
  if (j.contains("training_provenance")) {
    const json& p = j["training_provenance"];
    if (!p.is_object()) throw Malformed("'training_provenance' must be an object");
    for (const auto& [k, v] : p.items()) {
      m.provenance[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }

  const auto violations = validate_params(m.params);
  if (!violations.empty()) {
    std::string msg = "invalid model:";
    for (const auto& v : violations) msg += " " + v + ";";
    throw ModelInvariantViolation(msg);
  }
  return m;
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  require_valid(model.params);
  write_file(path, model_to_json(model));
}

ModelFile load_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  for (const auto& [k, v] : j.items()) {
    (void)v;
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw Malformed(std::string("unknown key '") + k + "' in " + where);
  }
}

Matrix2 matrix_field(const json& j, const char* name) {
  const json& w = j.at(name);
  Matrix2 out{};
  if (!w.is_array() || w.size() != 4) throw Malformed(std::string("'") + name + "' must hold 4 numbers");
  for (std::size_t i = 0; i < 4; ++i) {
    if (!w[i].is_number()) throw Malformed(std::string("'") + name + "' must hold 4 numbers");
    out[i / 2][i % 2] = w[i].get<double>();
  }
  return out;
}

template <typename T>
void maybe(const json& j, const char* name, T& target) {
  if (!j.contains(name)) return;
  try {
    const json& v = j.at(name);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw Malformed("");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!v.is_number()) throw Malformed("");
    }
    target = v.get<T>();
  } catch (const std::exception&) {
    throw Malformed(std::string("config key '") + name + "' has the wrong type");
  }
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Malformed(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Malformed("config must be a JSON object");
  reject_unknown(j, {"detector", "calibration", "train"}, "config");

  RunConfig c;
  if (j.contains("detector")) {
    const json& d = j["detector"];
    if (!d.is_object()) throw Malformed("'detector' must be an object");
    reject_unknown(d, {"kind", "rank_log", "orientation"}, "detector");
    if (d.contains("kind")) {
      if (!d["kind"].is_string()) throw Malformed("'kind' must be a string");
      c.kind = parse_detector_kind(d["kind"].get<std::string>());
      if (!c.kind) throw Malformed("unknown detector kind '" + d["kind"].get<std::string>() + "'");
    }
    maybe(d, "rank_log", c.rank_log);
    if (d.contains("orientation")) {
      int o = 0;
      maybe(d, "orientation", o);
      if (o != 1 && o != -1) throw Malformed("'orientation' must be 1 or -1");
      c.orientation = o;
    }
  }
  if (j.contains("calibration")) {
    const json& p = j["calibration"];
    if (!p.is_object()) throw Malformed("'calibration' must be an object");
    reject_unknown(p, {"w_mrf", "t0", "T", "use_mrf", "use_positional", "epsilon_clip", "calibrate_aux"},
                   "calibration");
    if (p.contains("w_mrf")) c.params.w_mrf = matrix_field(p, "w_mrf");
    maybe(p, "t0", c.params.t0);
    maybe(p, "T", c.params.iterations);
    maybe(p, "use_mrf", c.params.use_mrf);
    maybe(p, "use_positional", c.params.use_positional);
    maybe(p, "epsilon_clip", c.params.epsilon_clip);
    maybe(p, "calibrate_aux", c.params.calibrate_aux);
    const auto violations = validate_params(c.params);
    if (!violations.empty()) throw Malformed("invalid calibration settings: " + violations.front());
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    if (!t.is_object()) throw Malformed("'train' must be an object");
    reject_unknown(t, {"learning_rate", "epochs", "w_init", "batch", "normalization_trim"}, "train");
    maybe(t, "learning_rate", c.train.learning_rate);
    maybe(t, "epochs", c.train.epochs);
    if (t.contains("w_init")) c.train.w_init = matrix_field(t, "w_init");
    if (t.contains("batch") && !t["batch"].is_null()) {
      if (t["batch"].is_string() && t["batch"].get<std::string>() == "all") {
        c.train.batch.reset();
      } else if (t["batch"].is_number_unsigned() && t["batch"].get<std::size_t>() > 0) {
        c.train.batch = t["batch"].get<std::size_t>();
      } else {
        throw Malformed("'batch' must be a positive integer or \"all\"");
      }
    }
    maybe(t, "normalization_trim", c.train.normalization_trim);
    if (!(c.train.learning_rate > 0.0)) throw Malformed("'learning_rate' must be positive");
    if (c.train.epochs < 1) throw Malformed("'epochs' must be at least 1");
    for (const auto& row : c.train.w_init) {
      for (double w : row) {
        if (!(w >= 0.0)) throw Malformed("'w_init' entries must be non-negative");
      }
    }
    if (!(c.train.normalization_trim >= 0.0 && c.train.normalization_trim < 0.5)) {
      throw Malformed("'normalization_trim' must lie in [0, 0.5)");
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_json(read_file(path)); }

std::string config_to_json(const RunConfig& c) {
  ordered_json j;
  ordered_json d;
  if (c.kind) d["kind"] = std::string(to_string(*c.kind));
  d["rank_log"] = c.rank_log;
  if (c.orientation) d["orientation"] = *c.orientation;
  j["detector"] = d;
  const auto& p = c.params;
  j["calibration"] = {{"w_mrf", {p.w_mrf[0][0], p.w_mrf[0][1], p.w_mrf[1][0], p.w_mrf[1][1]}},
                      {"t0", p.t0},
                      {"T", p.iterations},
                      {"use_mrf", p.use_mrf},
                      {"use_positional", p.use_positional},
                      {"epsilon_clip", p.epsilon_clip},
                      {"calibrate_aux", p.calibrate_aux}};
  const auto& t = c.train;
  ordered_json train;
  train["learning_rate"] = t.learning_rate;
  train["epochs"] = t.epochs;
  train["w_init"] = {t.w_init[0][0], t.w_init[0][1], t.w_init[1][0], t.w_init[1][1]};
  train["batch"] = t.batch ? ordered_json(*t.batch) : ordered_json("all");
  train["normalization_trim"] = t.normalization_trim;
  j["train"] = train;
  return j.dump(2) + "\n";
}

DetectorSpec make_spec(DetectorKind kind, const RunConfig& config) {
  DetectorSpec spec = DetectorSpec::for_kind(kind);
  spec.rank_log = config.rank_log;
  if (config.orientation) spec.orientation = *config.orientation;
  return spec;
}

}  // namespace mgtcalib
