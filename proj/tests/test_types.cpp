#include <doctest.h>

#include <cmath>

#include <algorithm>

#include "mgtcalib/types.hpp"

using namespace mgtcalib;

namespace {

TokenScoreSequence two_token() {
  TokenScoreSequence s;
  s.id = "a";
  s.n_tokens = 2;
  s.scores.logprob = std::vector<double>{-1.0, -2.0};
  s.scores.rank = std::vector<std::int64_t>{3, 5};
  s.scores.entropy = std::vector<double>{2.0, 1.5};
  return s;
}

bool mentions(const std::vector<std::string>& v, const std::string& what) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(what) != std::string::npos; });
}

}  // namespace

TEST_CASE("valid two-token sequence has no violations") {
  CHECK(validate_sequence(two_token()).empty());
}

TEST_CASE("single token violates the length invariant") {
  auto s = make_sequence("b", Label::kHuman, {-1.0});
  CHECK(mentions(validate_sequence(s), "n_tokens < 2"));
}

TEST_CASE("positive log-prob is a violation") {
  auto s = two_token();
  (*s.scores.logprob)[1] = 0.5;
  CHECK(mentions(validate_sequence(s), "logprob > 0"));
}

TEST_CASE("rank, entropy, finiteness and length violations are all reported") {
  auto s = two_token();
  (*s.scores.rank)[0] = 0;
  (*s.scores.entropy)[1] = -0.1;
  s.scores.logprob->push_back(-1.0);
  s.scores.logprob->at(0) = std::nan("");
  const auto v = validate_sequence(s);
  CHECK(mentions(v, "rank < 1"));
  CHECK(mentions(v, "entropy < 0"));
  CHECK(mentions(v, "logprob"));
  CHECK(v.size() >= 4);
}

TEST_CASE("short aux sequences are violations") {
  auto s = two_token();
  AuxSequence a;
  a.kind = AuxKind::kPerturbed;
  a.scores.logprob = std::vector<double>{-1.0};
  s.aux.push_back(a);
  CHECK(mentions(validate_sequence(s), "aux[0]"));
}

TEST_CASE("validation is idempotent and leaves the input untouched") {
  auto s = two_token();
  (*s.scores.rank)[1] = 0;
  const auto copy = s;
  const auto first = validate_sequence(s);
  const auto second = validate_sequence(s);
  CHECK(first == second);
  CHECK(*s.scores.rank == *copy.scores.rank);
}

TEST_CASE("detector and aux names round-trip") {
  for (auto k : {DetectorKind::kLikelihood, DetectorKind::kLogRank, DetectorKind::kEntropy,
                 DetectorKind::kDetectGpt, DetectorKind::kFastDetectGpt, DetectorKind::kDnaGpt}) {
    CHECK(parse_detector_kind(to_string(k)) == k);
  }
  for (auto k : {AuxKind::kPerturbed, AuxKind::kRegenerated, AuxKind::kContinuation}) {
    CHECK(parse_aux_kind(to_string(k)) == k);
  }
  CHECK_FALSE(parse_detector_kind("gptzero"));
}

TEST_CASE("orientation table") {
  CHECK(DetectorSpec::for_kind(DetectorKind::kLogRank).orientation == -1);
  for (auto k : {DetectorKind::kLikelihood, DetectorKind::kEntropy, DetectorKind::kDetectGpt,
                 DetectorKind::kFastDetectGpt, DetectorKind::kDnaGpt}) {
    CHECK(DetectorSpec::for_kind(k).orientation == 1);
  }
  CHECK(DetectorSpec::for_kind(DetectorKind::kLogRank).rank_log);
  CHECK(required_aux_kind(DetectorKind::kDetectGpt) == AuxKind::kPerturbed);
  CHECK(required_aux_kind(DetectorKind::kFastDetectGpt) == AuxKind::kRegenerated);
  CHECK(required_aux_kind(DetectorKind::kDnaGpt) == AuxKind::kContinuation);
  CHECK_FALSE(required_aux_kind(DetectorKind::kLikelihood));
}

TEST_CASE("calibration params invariants") {
  CalibrationParams p;
  CHECK(validate_params(p).empty());
  CHECK(p.t0 == 30.0);
  CHECK(p.iterations == 10);
  p.w_mrf[1][0] = -0.1;
  CHECK_FALSE(validate_params(p).empty());
  CHECK_THROWS_AS(require_valid(p), InvalidArgument);
  p = CalibrationParams{};
  p.iterations = 0;
  CHECK_FALSE(validate_params(p).empty());
  p = CalibrationParams{};
  p.epsilon_clip = 0.5;
  CHECK_FALSE(validate_params(p).empty());
  p.epsilon_clip = 0.0;
  CHECK_FALSE(validate_params(p).empty());
}

TEST_CASE("belief validation") {
  CHECK(validate_belief({{0.3, 0.7}, {1.0, 0.0}}).empty());
  CHECK_FALSE(validate_belief({{0.3, 0.6}}).empty());
  CHECK_FALSE(validate_belief({{-0.1, 1.1}}).empty());
  CHECK(validate_belief({{0.3, 0.7 + 5e-10}}).empty());
}
