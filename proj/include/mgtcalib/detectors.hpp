#pragma once

#include <span>
#include <vector>

#include "mgtcalib/types.hpp"

namespace mgtcalib {

enum class ScoreChannel { kLogProb, kRank, kLogRank, kNegEntropy, kProbability };

/// Token-level scores for positions t = 2..N (the first token is dropped).
struct TokenScoreVector {
  std::vector<double> values;
  ScoreChannel channel = ScoreChannel::kLogProb;
};

TokenScoreVector token_scores(const ScoreChannels& channels, const DetectorSpec& spec);
TokenScoreVector token_scores(const TokenScoreSequence& seq, const DetectorSpec& spec);

/// Arithmetic mean of the token scores. Throws EmptyVector.
double aggregate_single(std::span<const double> values);
inline double aggregate_single(const TokenScoreVector& vec) { return aggregate_single(vec.values); }

/// Population mean and standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(std::span<const double> values);

/// (candidate - mean(aux)) / std(aux), population std. Used by DetectGPT and
/// Fast-DetectGPT. Throws DegenerateSpread when std < 1e-12.
double aggregate_zscore(double candidate_mean, std::span<const double> aux_means);

/// Candidate mean log-prob minus the average continuation mean log-prob.
double aggregate_dnagpt(const TokenScoreSequence& candidate,
                        std::span<const AuxSequence> continuations);

/// The aux sequences of `seq` consumed by `kind`, in file order.
std::vector<const AuxSequence*> matching_aux(const TokenScoreSequence& seq, DetectorKind kind);

/// Uncalibrated detector output, before orientation is applied.
double baseline_score(const TokenScoreSequence& seq, const DetectorSpec& spec);

/// Baseline score multiplied by the detector orientation (larger = machine).
inline double oriented_baseline_score(const TokenScoreSequence& seq, const DetectorSpec& spec) {
  return spec.orientation * baseline_score(seq, spec);
}

/// Machine iff score > epsilon (strict).
Label detect(double score, double epsilon);

}  // namespace mgtcalib
