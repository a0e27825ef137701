#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mgtcalib/mrf.hpp"
#include "mgtcalib/types.hpp"

namespace mgtcalib {

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 10;
  std::uint64_t seed = 1;
  Matrix2 w_init{{{0.5, 0.5}, {0.5, 0.5}}};
  /// Mini-batch size; nullopt means full batch.
  std::optional<std::size_t> batch;
  unsigned threads = 1;
  /// Fraction trimmed from each tail when fitting the 0-1 token-score map.
  double normalization_trim = 0.1;
};

/// Clip applied to predictions before the log in the BCE loss.
inline constexpr double kBceClip = 1e-7;

/// -(y log p + (1 - y) log(1 - p)) with p clamped to [kBceClip, 1 - kBceClip].
double bce_loss(double pred, int label);

/// The (0, 1) prediction fed into the loss: the enhanced score itself for
/// single-text detectors, sigmoid of the aggregated score otherwise.
double training_prediction(const CalibratedScore& score, DetectorKind kind);

/// Reverse-mode derivative of enhanced_score(trace) with respect to W_mrf,
/// scaled by `upstream` (d loss / d score).
Matrix2 backprop_enhanced_score(const CalibrationTrace& trace, const Matrix2& w, double upstream);

struct LossGrad {
  double loss = 0.0;
  Matrix2 grad{};
};

/// Mean BCE over `batch` and its exact gradient with respect to W_mrf.
/// Every item must carry a label.
LossGrad loss_and_grad(std::span<const TokenScoreSequence> batch, const DetectorSpec& spec,
                       const CalibrationParams& params, unsigned threads = 1);

inline Matrix2 grad_w(std::span<const TokenScoreSequence> batch, const DetectorSpec& spec,
                      const CalibrationParams& params, unsigned threads = 1) {
  return loss_and_grad(batch, spec, params, threads).grad;
}

double mean_loss(std::span<const TokenScoreSequence> batch, const DetectorSpec& spec,
                 const CalibrationParams& params, unsigned threads = 1);

struct TrainResult {
  CalibrationParams params;
  std::vector<double> loss_history;  // mean loss per epoch
};

/// Projected gradient descent on W_mrf (entries clamped at 0 after each step).
TrainResult train(std::span<const TokenScoreSequence> dataset, const TrainConfig& config,
                  const DetectorSpec& spec, const CalibrationParams& params0);

}  // namespace mgtcalib
