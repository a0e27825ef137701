#pragma once

#include <optional>
#include <vector>

#include "mgtcalib/detectors.hpp"
#include "mgtcalib/types.hpp"

namespace mgtcalib {

/// Positional weight 1 / (1 + exp(-(t - t0))) for a 1-based position t.
double beta(double t, double t0);

/// Positional weights for positions 1..n; all ones when `positional` is off.
std::vector<double> positional_weights(std::size_t n, double t0, bool positional);

/// Prior class probabilities per token, rows [1 - p_t, p_t].
///
/// Probability channels are used as-is. Other channels are mapped to [0, 1]
/// after orientation: with `range` through the fixed affine map lo -> 0,
/// hi -> 1; without it by min-max over this text (constant text -> 0.5).
/// Every p_t is then clamped to [eps, 1 - eps].
UnaryMatrix build_unary(const TokenScoreVector& vec, const DetectorSpec& spec, double eps,
                        const std::optional<NormalizationRange>& range = std::nullopt);

/// Sparse tridiagonal A^corr. Row r (0-based) couples to r+1 with weight
/// upper[r] and row r+1 couples to r with weight lower[r]; the weight of an
/// edge is the positional weight of the neighbour it points at.
struct AdjacencyWeights {
  std::size_t n = 0;
  std::vector<double> upper;
  std::vector<double> lower;
};

AdjacencyWeights build_adjacency(std::size_t n, double t0);
/// Adjacency built from explicit per-position weights (length n).
AdjacencyWeights build_adjacency(const std::vector<double>& weights);

/// Sign pattern of the pairwise potential, W_mrf (.) [[-1, 1], [1, -1]].
Matrix2 signed_coupling(const Matrix2& w);

/// One mean-field update in the log domain:
///   log Q' = log_softmax(log Q - (A Q) (W (.) S)).
BeliefMatrix mean_field_step_log(const BeliefMatrix& log_q, const AdjacencyWeights& adj,
                                 const Matrix2& w);

/// Probability-domain wrapper of mean_field_step_log. `h` only participates
/// in the shape check.
BeliefMatrix mean_field_step(const BeliefMatrix& q, const UnaryMatrix& h,
                             const AdjacencyWeights& adj, const Matrix2& w);

/// Everything a backward pass needs from one calibration.
struct CalibrationTrace {
  std::vector<double> weights;            // positional weights, or ones
  AdjacencyWeights adjacency;
  std::vector<BeliefMatrix> log_states;   // log Q^0 .. log Q^T
};

CalibrationTrace calibrate_traced(const UnaryMatrix& h, const CalibrationParams& params);

/// Q_final = weights (.) Q^T, rows not re-normalized.
BeliefMatrix final_beliefs(const CalibrationTrace& trace);

/// Runs T mean-field steps from Q^0 = H and applies the positional weighting.
BeliefMatrix calibrate(const UnaryMatrix& h, const CalibrationParams& params);

/// sum_t Q_final[t][machine] / sum_t weight(t); lies in [0, 1].
double enhanced_score(const BeliefMatrix& q_final, const CalibrationParams& params);
double enhanced_score(const CalibrationTrace& trace);

double sigmoid(double x);

/// Calibrated score of one text plus the per-sequence means it was built from.
struct CalibratedScore {
  double raw = 0.0;                // machine-oriented, before any squashing
  double candidate_mean = 0.0;
  std::vector<double> aux_means;   // empty for single-text detectors
};

/// f1 -> MRF -> f2. Single-text detectors return enhanced_score of the
/// candidate. Multi-sample detectors calibrate the candidate and each aux
/// sequence with shared params and aggregate the resulting means with the
/// detector's own rule (z-score or DNA difference).
CalibratedScore calibrated_detector_score(const TokenScoreSequence& seq, const DetectorSpec& spec,
                                          const CalibrationParams& params);

/// Unary matrix of the candidate or of one aux channel set, per `params`.
UnaryMatrix unary_for(const ScoreChannels& channels, const DetectorSpec& spec,
                      const CalibrationParams& params);

}  // namespace mgtcalib
