#include "mgtcalib/analysis.hpp"

#include <cmath>
#include <sstream>

namespace mgtcalib {

std::string_view to_string(ScoreChannel channel) {
  switch (channel) {
    case ScoreChannel::kLogProb:
      return "logprob";
    case ScoreChannel::kRank:
      return "rank";
    case ScoreChannel::kLogRank:
      return "logrank";
    case ScoreChannel::kNegEntropy:
      return "entropy";
    case ScoreChannel::kProbability:
      return "prob";
  }
  return "unknown";
}

std::optional<ScoreChannel> parse_score_channel(std::string_view name) {
  for (auto c : {ScoreChannel::kLogProb, ScoreChannel::kRank, ScoreChannel::kLogRank,
                 ScoreChannel::kNegEntropy, ScoreChannel::kProbability}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::vector<double> channel_scores(const TokenScoreSequence& seq, ScoreChannel channel) {
  DetectorSpec spec;
  switch (channel) {
    case ScoreChannel::kLogProb:
      spec.kind = DetectorKind::kLikelihood;
      break;
    case ScoreChannel::kRank:
    case ScoreChannel::kLogRank:
      spec.kind = DetectorKind::kLogRank;
      spec.rank_log = channel == ScoreChannel::kLogRank;
      break;
    case ScoreChannel::kNegEntropy:
      spec.kind = DetectorKind::kEntropy;
      break;
    case ScoreChannel::kProbability:
      spec.kind = DetectorKind::kDetectGpt;
      break;
  }
  return token_scores(seq, spec).values;
}

namespace {

bool selected(const TokenScoreSequence& seq, std::optional<Label> label) {
  return !label || seq.label == label;
}

}  // namespace

HopDistance hop_distance(std::span<const TokenScoreSequence> dataset, ScoreChannel channel,
                         std::size_t k, std::optional<Label> label) {
  if (k < 1) throw InvalidArgument("hop must be at least 1");
  HopDistance out;
  out.hop = k;
  double total = 0.0;
  for (const auto& seq : dataset) {
    if (!selected(seq, label)) continue;
    const auto s = channel_scores(seq, channel);
    if (s.size() <= k) {
      ++out.texts_skipped;
      continue;
    }
    double sum = 0.0;
    for (std::size_t t = 0; t + k < s.size(); ++t) sum += std::abs(s[t] - s[t + k]);
    total += sum / static_cast<double>(s.size() - k);
    ++out.texts_used;
  }
  if (out.texts_used == 0) {
    throw HopTooLarge("no text has more than " + std::to_string(k) + " scored tokens");
  }
  out.distance = total / static_cast<double>(out.texts_used);
  return out;
}

PositionalBins positional_instability(std::span<const TokenScoreSequence> dataset,
                                      ScoreChannel channel, std::size_t bins,
                                      std::optional<Label> label) {
  if (bins < 2) throw InvalidArgument("positional instability needs at least 2 bins");
  PositionalBins out;
  out.mean.assign(bins, 0.0);
  out.count.assign(bins, 0);
  for (const auto& seq : dataset) {
    if (!selected(seq, label)) continue;
    const auto s = channel_scores(seq, channel);
    const std::size_t m = s.size();
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const std::size_t b = std::min(bins - 1, bins * i / m);
      out.mean[b] += std::abs(s[i] - s[i + 1]);
      ++out.count[b];
    }
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out.count[b] > 0) out.mean[b] /= static_cast<double>(out.count[b]);
  }
  return out;
}

std::string hop_csv(std::span<const HopDistance> rows) {
  std::ostringstream os;
  os << "hop,distance,texts_used,texts_skipped\n";
  for (const auto& r : rows) {
    os << r.hop << "," << format_double(r.distance) << "," << r.texts_used << "," << r.texts_skipped << "\n";
  }
  return os.str();
}

std::string positional_csv(const PositionalBins& bins) {
  std::ostringstream os;
  os << "bin,relative_start,relative_end,mean_distance,count\n";
  const auto n = static_cast<double>(bins.mean.size());
  for (std::size_t b = 0; b < bins.mean.size(); ++b) {
    os << b << "," << format_double(static_cast<double>(b) / n) << ","
       << format_double(static_cast<double>(b + 1) / n) << "," << format_double(bins.mean[b]) << "," << bins.count[b] << "\n";
  }
  return os.str();
}

}  // namespace mgtcalib
