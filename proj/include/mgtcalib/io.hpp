#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mgtcalib/training.hpp"
#include "mgtcalib/types.hpp"

namespace mgtcalib {

/// Error tied to a 1-based line of a JSONL score file.
class LineError : public Error {
 public:
  LineError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MalformedLine : public LineError {
 public:
  using LineError::LineError;
};
class InvariantViolation : public LineError {
 public:
  using LineError::LineError;
};
class DuplicateId : public LineError {
 public:
  using LineError::LineError;
};

/// Model or config document that cannot be read.
class Malformed : public Error {
 public:
  using Error::Error;
};
class VersionMismatch : public Error {
 public:
  using Error::Error;
};
class ModelInvariantViolation : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// JSONL score files
// ---------------------------------------------------------------------------

enum class IssueKind { kMalformed, kInvariant, kDuplicateId };

struct LineIssue {
  std::size_t line = 0;
  IssueKind kind = IssueKind::kMalformed;
  std::string detail;
};

struct ScanResult {
  Dataset dataset;               // valid records, in file order
  std::vector<LineIssue> issues; // every problem found
};

/// Reads every line and records all problems; never throws on bad data.
/// Blank lines are ignored.
ScanResult scan_scores(std::istream& in);

struct ParseOptions {
  /// Strict mode throws on the first bad line; lenient mode skips bad lines
  /// and reports them as warnings.
  bool strict = true;
};

struct ParseResult {
  Dataset dataset;
  std::vector<std::string> warnings;
};

ParseResult parse_scores(std::istream& in, const ParseOptions& options = {});
ParseResult parse_scores(const std::filesystem::path& path, const ParseOptions& options = {});

/// One JSONL record. Numbers are written with round-trip precision.
std::string to_jsonl_record(const TokenScoreSequence& seq);
void write_scores(const Dataset& dataset, std::ostream& out);
void write_scores(const Dataset& dataset, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

struct ModelFile {
  DetectorSpec spec;
  CalibrationParams params;
  std::map<std::string, std::string> provenance;
};

std::string model_to_json(const ModelFile& model);
/// Throws Malformed, VersionMismatch or ModelInvariantViolation.
ModelFile model_from_json(const std::string& text);
void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Detector, calibration and training settings of one run.
struct RunConfig {
  std::optional<DetectorKind> kind;
  bool rank_log = true;
  std::optional<int> orientation;
  CalibrationParams params;
  TrainConfig train;
};

/// Parses a config document; every key is optional and unknown keys are
/// rejected. Throws Malformed.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);

/// Detector spec of `kind` with the config's rank_log/orientation applied.
DetectorSpec make_spec(DetectorKind kind, const RunConfig& config);

}  // namespace mgtcalib
