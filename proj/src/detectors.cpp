#include "mgtcalib/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgtcalib {

TokenScoreVector token_scores(const ScoreChannels& channels, const DetectorSpec& spec) {
  const std::size_t n = channels.length();
  if (n < 2) throw SequenceTooShort("sequence needs at least 2 tokens");

  TokenScoreVector out;
  out.values.reserve(n - 1);
  switch (spec.kind) {
    case DetectorKind::kLikelihood:
      if (!channels.logprob) throw MissingChannel("likelihood needs the logprob channel");
      out.channel = ScoreChannel::kLogProb;
      out.values.assign(channels.logprob->begin() + 1, channels.logprob->end());
      break;
    case DetectorKind::kLogRank:
      if (!channels.rank) throw MissingChannel("logrank needs the rank channel");
      out.channel = spec.rank_log ? ScoreChannel::kLogRank : ScoreChannel::kRank;
      for (std::size_t t = 1; t < n; ++t) {
        const auto r = static_cast<double>((*channels.rank)[t]);
        out.values.push_back(spec.rank_log ? std::log(r) : r);
      }
      break;
    case DetectorKind::kEntropy:
      if (!channels.entropy) throw MissingChannel("entropy needs the entropy channel");
      out.channel = ScoreChannel::kNegEntropy;
      for (std::size_t t = 1; t < n; ++t) out.values.push_back(-(*channels.entropy)[t]);
      break;
    case DetectorKind::kDetectGpt:
    case DetectorKind::kFastDetectGpt:
    case DetectorKind::kDnaGpt:
      if (!channels.logprob) throw MissingChannel("probability detectors need the logprob channel");
      out.channel = ScoreChannel::kProbability;
      for (std::size_t t = 1; t < n; ++t) {
        out.values.push_back(std::clamp(std::exp((*channels.logprob)[t]), 0.0, 1.0));
      }
      break;
  }
  return out;
}

TokenScoreVector token_scores(const TokenScoreSequence& seq, const DetectorSpec& spec) {
  if (seq.n_tokens < 2) throw SequenceTooShort("sequence '" + seq.id + "' has fewer than 2 tokens");
  return token_scores(seq.scores, spec);
}

double aggregate_single(std::span<const double> values) {
  if (values.empty()) throw EmptyVector("cannot aggregate an empty score vector");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / n);
  return out;
}

double aggregate_zscore(double candidate_mean, std::span<const double> aux_means) {
  if (aux_means.size() < 2) throw InvalidArgument("z-score needs at least 2 aux samples");
  const auto [mu, sigma] = mean_std(aux_means);
  if (sigma < 1e-12) throw DegenerateSpread("aux samples have zero spread");
  return (candidate_mean - mu) / sigma;
}

namespace {

double mean_logprob(const ScoreChannels& ch) {
  if (!ch.logprob) throw MissingChannel("DNA-GPT needs the logprob channel");
  if (ch.logprob->size() < 2) throw SequenceTooShort("sequence needs at least 2 tokens");
  return aggregate_single(std::span<const double>(*ch.logprob).subspan(1));
}

}  // namespace

double aggregate_dnagpt(const TokenScoreSequence& candidate,
                        std::span<const AuxSequence> continuations) {
  if (continuations.empty()) throw NoContinuations("DNA-GPT needs at least one continuation");
  double sum = 0.0;
  for (const auto& c : continuations) sum += mean_logprob(c.scores);
  return mean_logprob(candidate.scores) - sum / static_cast<double>(continuations.size());
}

std::vector<const AuxSequence*> matching_aux(const TokenScoreSequence& seq, DetectorKind kind) {
  std::vector<const AuxSequence*> out;
  const auto want = required_aux_kind(kind);
  if (!want) return out;
  for (const auto& a : seq.aux) {
    if (a.kind == *want) out.push_back(&a);
  }
  return out;
}

double baseline_score(const TokenScoreSequence& seq, const DetectorSpec& spec) {
  switch (spec.kind) {
    case DetectorKind::kLikelihood:
    case DetectorKind::kLogRank:
    case DetectorKind::kEntropy:
      return aggregate_single(token_scores(seq, spec));
    case DetectorKind::kDetectGpt:
    case DetectorKind::kFastDetectGpt: {
      const double cand = aggregate_single(token_scores(seq, spec));
      std::vector<double> aux_means;
      for (const auto* a : matching_aux(seq, spec.kind)) {
        aux_means.push_back(aggregate_single(token_scores(a->scores, spec)));
      }
      return aggregate_zscore(cand, aux_means);
    }
    case DetectorKind::kDnaGpt: {
      std::vector<AuxSequence> conts;
      for (const auto* a : matching_aux(seq, spec.kind)) conts.push_back(*a);
      return aggregate_dnagpt(seq, conts);
    }
  }
  throw InvalidArgument("unknown detector kind");
}

Label detect(double score, double epsilon) {
  return score > epsilon ? Label::kMachine : Label::kHuman;
}

}  // namespace mgtcalib
