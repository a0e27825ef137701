#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgtcalib/detectors.hpp"
#include "mgtcalib/types.hpp"

namespace mgtcalib {

/// Raised when no text in a dataset is long enough for the requested hop.
class HopTooLarge : public Error {
 public:
  using Error::Error;
};

std::string_view to_string(ScoreChannel channel);
/// Accepts logprob, rank, logrank, entropy (negated) and prob.
std::optional<ScoreChannel> parse_score_channel(std::string_view name);

/// Token scores t = 2..N of one channel. Throws MissingChannel.
std::vector<double> channel_scores(const TokenScoreSequence& seq, ScoreChannel channel);

struct HopDistance {
  std::size_t hop = 0;
  double distance = 0.0;
  std::size_t texts_used = 0;
  std::size_t texts_skipped = 0;
};

/// Mean over texts of the per-text mean |s_t - s_{t+k}|. Texts with at most
/// k scored tokens are skipped; HopTooLarge when every text is skipped.
/// `label` restricts the statistic to one class.
HopDistance hop_distance(std::span<const TokenScoreSequence> dataset, ScoreChannel channel,
                         std::size_t k, std::optional<Label> label = std::nullopt);

struct PositionalBins {
  std::vector<double> mean;          // 0 for empty bins
  std::vector<std::size_t> count;
};

/// Adjacent-pair distances |s_i - s_{i+1}| pooled into `bins` bins by the
/// relative position i / M of the pair in a text with M scored tokens.
PositionalBins positional_instability(std::span<const TokenScoreSequence> dataset,
                                      ScoreChannel channel, std::size_t bins = 20,
                                      std::optional<Label> label = std::nullopt);

std::string hop_csv(std::span<const HopDistance> rows);
std::string positional_csv(const PositionalBins& bins);

}  // namespace mgtcalib
