#include "mgtcalib/types.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace mgtcalib {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string_view to_string(AuxKind kind) {
  switch (kind) {
    case AuxKind::kPerturbed:
      return "perturbed";
    case AuxKind::kRegenerated:
      return "regenerated";
    case AuxKind::kContinuation:
      return "continuation";
  }
  return "unknown";
}

std::optional<AuxKind> parse_aux_kind(std::string_view name) {
  if (name == "perturbed") return AuxKind::kPerturbed;
  if (name == "regenerated") return AuxKind::kRegenerated;
  if (name == "continuation") return AuxKind::kContinuation;
  return std::nullopt;
}

std::size_t ScoreChannels::length() const {
  if (logprob) return logprob->size();
  if (rank) return rank->size();
  if (entropy) return entropy->size();
  return 0;
}

namespace {

void check_channels(const ScoreChannels& ch, std::size_t n, const std::string& where,
                    std::vector<std::string>& out) {
  auto length_check = [&](const char* name, std::size_t len) {
    if (len != n) {
      std::ostringstream os;
      os << where << name << " has " << len << " entries, expected " << n;
      out.push_back(os.str());
    }
  };
  if (ch.logprob) {
    length_check("logprob", ch.logprob->size());
    for (std::size_t i = 0; i < ch.logprob->size(); ++i) {
      const double v = (*ch.logprob)[i];
      if (!std::isfinite(v)) {
        out.push_back(where + "logprob not finite at " + std::to_string(i));
      } else if (v > 0.0) {
        out.push_back(where + "logprob > 0 at " + std::to_string(i));
      }
    }
  }
  if (ch.rank) {
    length_check("rank", ch.rank->size());
    for (std::size_t i = 0; i < ch.rank->size(); ++i) {
      if ((*ch.rank)[i] < 1) out.push_back(where + "rank < 1 at " + std::to_string(i));
    }
  }
  if (ch.entropy) {
    length_check("entropy", ch.entropy->size());
    for (std::size_t i = 0; i < ch.entropy->size(); ++i) {
      const double v = (*ch.entropy)[i];
      if (!std::isfinite(v)) {
        out.push_back(where + "entropy not finite at " + std::to_string(i));
      } else if (v < 0.0) {
        out.push_back(where + "entropy < 0 at " + std::to_string(i));
      }
    }
  }
}

}  // namespace

std::vector<std::string> validate_sequence(const TokenScoreSequence& seq) {
  std::vector<std::string> out;
  if (seq.n_tokens < 2) out.emplace_back("n_tokens < 2");
  check_channels(seq.scores, seq.n_tokens, "", out);
  for (std::size_t i = 0; i < seq.aux.size(); ++i) {
    const auto& aux = seq.aux[i];
    const std::string where = "aux[" + std::to_string(i) + "].";
    const std::size_t len = aux.scores.length();
    if (len < 2) out.push_back(where + "length < 2");
    check_channels(aux.scores, len, where, out);
  }
  return out;
}

TokenScoreSequence make_sequence(std::string id, std::optional<Label> label,
                                 std::vector<double> logprob) {
  TokenScoreSequence seq;
  seq.id = std::move(id);
  seq.label = label;
  seq.n_tokens = logprob.size();
  seq.scores.logprob = std::move(logprob);
  return seq;
}

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kLikelihood:
      return "likelihood";
    case DetectorKind::kLogRank:
      return "logrank";
    case DetectorKind::kEntropy:
      return "entropy";
    case DetectorKind::kDetectGpt:
      return "detectgpt";
    case DetectorKind::kFastDetectGpt:
      return "fastdetectgpt";
    case DetectorKind::kDnaGpt:
      return "dnagpt";
  }
  return "unknown";
}

std::optional<DetectorKind> parse_detector_kind(std::string_view name) {
  for (auto k : {DetectorKind::kLikelihood, DetectorKind::kLogRank, DetectorKind::kEntropy,
                 DetectorKind::kDetectGpt, DetectorKind::kFastDetectGpt, DetectorKind::kDnaGpt}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

bool uses_probability_channel(DetectorKind kind) {
  return kind == DetectorKind::kDetectGpt || kind == DetectorKind::kFastDetectGpt ||
         kind == DetectorKind::kDnaGpt;
}

bool is_multi_sample(DetectorKind kind) { return uses_probability_channel(kind); }

std::optional<AuxKind> required_aux_kind(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kDetectGpt:
      return AuxKind::kPerturbed;
    case DetectorKind::kFastDetectGpt:
      return AuxKind::kRegenerated;
    case DetectorKind::kDnaGpt:
      return AuxKind::kContinuation;
    default:
      return std::nullopt;
  }
}

DetectorSpec DetectorSpec::for_kind(DetectorKind kind) {
  DetectorSpec spec;
  spec.kind = kind;
  // A lower log-rank indicates machine text; every other score is already
  // machine-positive.
  spec.orientation = kind == DetectorKind::kLogRank ? -1 : 1;
  return spec;
}

std::vector<std::string> validate_params(const CalibrationParams& params) {
  std::vector<std::string> out;
  for (const auto& row : params.w_mrf) {
    for (double w : row) {
      if (!std::isfinite(w) || w < 0.0) {
        out.emplace_back("w_mrf entry negative or not finite");
        break;
      }
    }
  }
  if (params.iterations < 1) out.emplace_back("iterations < 1");
  if (!(params.epsilon_clip > 0.0 && params.epsilon_clip < 0.5)) {
    out.emplace_back("epsilon_clip outside (0, 0.5)");
  }
  if (!std::isfinite(params.t0)) out.emplace_back("t0 not finite");
  if (params.normalization &&
      !(std::isfinite(params.normalization->lo) && std::isfinite(params.normalization->hi) &&
        params.normalization->lo <= params.normalization->hi)) {
    out.emplace_back("normalization range invalid");
  }
  return out;
}

void require_valid(const CalibrationParams& params) {
  const auto violations = validate_params(params);
  if (violations.empty()) return;
  std::string msg = "invalid calibration params:";
  for (const auto& v : violations) msg += " " + v + ";";
  throw InvalidArgument(msg);
}

std::vector<std::string> validate_belief(const BeliefMatrix& q, double tol) {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < q.size(); ++r) {
    const auto& row = q[r];
    if (!(row[0] >= 0.0 && row[0] <= 1.0 && row[1] >= 0.0 && row[1] <= 1.0)) {
      out.push_back("entry outside [0,1] in row " + std::to_string(r));
    }
    if (std::abs(row[0] + row[1] - 1.0) > tol) {
      out.push_back("row " + std::to_string(r) + " does not sum to 1");
    }
  }
  return out;
}

}  // namespace mgtcalib
