#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mgtcalib {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingChannel : public Error {
 public:
  using Error::Error;
};
class SequenceTooShort : public Error {
 public:
  using Error::Error;
};
class EmptyVector : public Error {
 public:
  using Error::Error;
};
class DegenerateSpread : public Error {
 public:
  using Error::Error;
};
class NoContinuations : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class InvalidArgument : public Error {
 public:
  using Error::Error;
};
class SingleClass : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Score sequences
// ---------------------------------------------------------------------------

enum class Label : int { kHuman = 0, kMachine = 1 };

enum class AuxKind { kPerturbed, kRegenerated, kContinuation };

std::string_view to_string(AuxKind kind);
std::optional<AuxKind> parse_aux_kind(std::string_view name);

/// Per-token score channels produced by a proxy language model. Index 0 is the
/// unconditioned first token; it is stored but never aggregated.
struct ScoreChannels {
  std::optional<std::vector<double>> logprob;
  std::optional<std::vector<std::int64_t>> rank;
  std::optional<std::vector<double>> entropy;

  /// Length shared by all present channels (0 when none are present).
  std::size_t length() const;
};

struct AuxSequence {
  AuxKind kind = AuxKind::kPerturbed;
  ScoreChannels scores;
};

struct TokenScoreSequence {
  std::string id;
  std::optional<Label> label;
  /// Generator or corpus the text came from, for per-source breakdowns.
  std::optional<std::string> source;
  std::size_t n_tokens = 0;
  ScoreChannels scores;
  std::vector<AuxSequence> aux;
};

using Dataset = std::vector<TokenScoreSequence>;

/// Returns every invariant violation of `seq`; an empty result means valid.
/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

std::vector<std::string> validate_sequence(const TokenScoreSequence& seq);

/// Convenience constructor that fills n_tokens from the logprob channel.
TokenScoreSequence make_sequence(std::string id, std::optional<Label> label,
                                 std::vector<double> logprob);

// ---------------------------------------------------------------------------
// Detector description
// ---------------------------------------------------------------------------

enum class DetectorKind {
  kLikelihood,
  kLogRank,
  kEntropy,
  kDetectGpt,
  kFastDetectGpt,
  kDnaGpt,
};

std::string_view to_string(DetectorKind kind);
std::optional<DetectorKind> parse_detector_kind(std::string_view name);

/// True for the detectors whose token score is the probability p(s_t|s_<t).
bool uses_probability_channel(DetectorKind kind);
/// True for the detectors that compare the candidate against aux samples.
bool is_multi_sample(DetectorKind kind);
/// Aux kind consumed by a multi-sample detector.
std::optional<AuxKind> required_aux_kind(DetectorKind kind);

struct DetectorSpec {
  DetectorKind kind = DetectorKind::kLikelihood;
  /// +1 when a larger aggregated score means "machine", -1 otherwise.
  int orientation = 1;
  bool rank_log = true;
  std::optional<double> threshold;

  static DetectorSpec for_kind(DetectorKind kind);
};

// ---------------------------------------------------------------------------
// Calibration parameters and belief matrices
// ---------------------------------------------------------------------------

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Affine 0-1 map for token scores that are not already probabilities.
/// Fitted over a training split; absent means per-text min-max.
struct NormalizationRange {
  double lo = 0.0;
  double hi = 1.0;

  friend bool operator==(const NormalizationRange&, const NormalizationRange&) = default;
};

struct CalibrationParams {
  Matrix2 w_mrf{{{0.5, 0.5}, {0.5, 0.5}}};
  double t0 = 30.0;
  int iterations = 10;
  bool use_mrf = true;
  bool use_positional = true;
  double epsilon_clip = 1e-3;
  /// Whether aux sequences of multi-sample detectors are calibrated too.
  bool calibrate_aux = true;
  std::optional<NormalizationRange> normalization;

  friend bool operator==(const CalibrationParams&, const CalibrationParams&) = default;
};

std::vector<std::string> validate_params(const CalibrationParams& params);
/// Throws InvalidArgument listing the violations of validate_params.
void require_valid(const CalibrationParams& params);

/// N x 2 row-stochastic matrix; column 0 is human, column 1 is machine.
using BeliefMatrix = std::vector<std::array<double, 2>>;
using UnaryMatrix = BeliefMatrix;

/// Violations of the row-stochastic invariant (tolerance on row sums).
std::vector<std::string> validate_belief(const BeliefMatrix& q, double tol = 1e-9);

}  // namespace mgtcalib
