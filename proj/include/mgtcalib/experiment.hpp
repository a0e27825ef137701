#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgtcalib/evaluation.hpp"
#include "mgtcalib/mrf.hpp"
#include "mgtcalib/training.hpp"

namespace mgtcalib {

/// Range of the machine-oriented token scores over `dataset`, used as the
/// 0-1 map for non-probability channels: the `trim` and `1 - trim` quantiles
/// (trim = 0 gives min and max). Nullopt for probability kinds.
std::optional<NormalizationRange> fit_normalization(std::span<const TokenScoreSequence> dataset,
                                                    const DetectorSpec& spec, double trim = 0.0);

/// Oriented baseline scores. Texts whose aux samples have zero spread are
/// counted in `skipped` and left out.
ScoredSet score_baseline(std::span<const TokenScoreSequence> dataset, const DetectorSpec& spec,
                         unsigned threads = 1);

/// Calibrated raw scores (already machine-oriented).
ScoredSet score_calibrated(std::span<const TokenScoreSequence> dataset, const DetectorSpec& spec,
                           const CalibrationParams& params, unsigned threads = 1);

struct ExperimentResult {
  TrainResult trained;
  double val_auroc_initial = 0.0;
  double val_auroc_trained = 0.0;
  EvalReport baseline;    // test split
  EvalReport calibrated;  // test split
};

/// Split by seed, fit the normalization on the train split, train W_mrf,
/// and evaluate baseline and calibrated detectors on the test split.
ExperimentResult run_experiment(const Dataset& dataset, const DetectorSpec& spec,
                                const CalibrationParams& base, TrainConfig config,
                                std::uint64_t seed);

/// Rows of the ablation grid, in display order.
enum class AblationVariant { kFull, kWithoutPos, kWithoutMrf, kBaseline };
std::string_view to_string(AblationVariant v);

struct AblationRow {
  AblationVariant variant = AblationVariant::kFull;
  std::vector<double> auroc_per_seed;
  std::vector<double> tpr_per_seed;
  double mean_auroc = 0.0;
  double mean_tpr = 0.0;
};

/// Full calibration, calibration without positional weighting, calibration
/// without the MRF layer, and the uncalibrated detector, each trained and
/// tested per seed on identical splits.
std::vector<AblationRow> run_ablation(const Dataset& dataset, const DetectorSpec& spec,
                                      const CalibrationParams& base, const TrainConfig& config,
                                      std::span<const std::uint64_t> seeds);

std::string ablation_table(std::span<const AblationRow> rows);

}  // namespace mgtcalib
