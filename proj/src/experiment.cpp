#include "mgtcalib/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "mgtcalib/detectors.hpp"
#include "mgtcalib/parallel.hpp"

namespace mgtcalib {

std::optional<NormalizationRange> fit_normalization(std::span<const TokenScoreSequence> dataset,
                                                    const DetectorSpec& spec, double trim) {
  if (uses_probability_channel(spec.kind)) return std::nullopt;
  if (!(trim >= 0.0 && trim < 0.5)) throw InvalidArgument("normalization trim must lie in [0, 0.5)");
  std::vector<double> values;
  const double sign = spec.orientation < 0 ? -1.0 : 1.0;
  for (const auto& seq : dataset) {
    for (double v : token_scores(seq, spec).values) values.push_back(sign * v);
  }
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const auto last = static_cast<double>(values.size() - 1);
  const auto at = [&](double q) { return values[static_cast<std::size_t>(std::llround(q * last))]; };
  return NormalizationRange{at(trim), at(1.0 - trim)};
}

namespace {

template <typename ScoreFn>
ScoredSet score_with(std::span<const TokenScoreSequence> dataset, unsigned threads, ScoreFn&& fn) {
  std::vector<std::optional<double>> slots(dataset.size());
  parallel_for(dataset.size(), threads, [&](std::size_t i) {
    try {
      slots[i] = fn(dataset[i]);
    } catch (const DegenerateSpread&) {
      slots[i].reset();
    }
  });
  ScoredSet out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!slots[i]) {
      ++out.skipped;
      continue;
    }
    out.scores.push_back(*slots[i]);
    out.labels.push_back(dataset[i].label ? static_cast<int>(*dataset[i].label) : -1);
    out.sources.push_back(dataset[i].source.value_or("unknown"));
  }
  return out;
}

std::map<std::string, std::string> config_echo(const DetectorSpec& spec, const CalibrationParams& p) {
  std::map<std::string, std::string> c;
  c["detector"] = std::string(to_string(spec.kind));
  c["rank_log"] = spec.rank_log ? "true" : "false";
  c["t0"] = format_double(p.t0);
  c["iterations"] = std::to_string(p.iterations);
  c["use_mrf"] = p.use_mrf ? "true" : "false";
  c["use_positional"] = p.use_positional ? "true" : "false";
  c["w_mrf"] = format_double(p.w_mrf[0][0]) + "," + format_double(p.w_mrf[0][1]) + "," +
               format_double(p.w_mrf[1][0]) + "," + format_double(p.w_mrf[1][1]);
  return c;
}

}  // namespace

ScoredSet score_baseline(std::span<const TokenScoreSequence> dataset, const DetectorSpec& spec,
                         unsigned threads) {
  return score_with(dataset, threads,
                    [&](const TokenScoreSequence& s) { return oriented_baseline_score(s, spec); });
}

ScoredSet score_calibrated(std::span<const TokenScoreSequence> dataset, const DetectorSpec& spec,
                           const CalibrationParams& params, unsigned threads) {
  return score_with(dataset, threads, [&](const TokenScoreSequence& s) {
    return calibrated_detector_score(s, spec, params).raw;
  });
}

ExperimentResult run_experiment(const Dataset& dataset, const DetectorSpec& spec,
                                const CalibrationParams& base, TrainConfig config,
                                std::uint64_t seed) {
  const auto split = split_dataset(dataset, seed);
  const Dataset train_set = select(dataset, split.train);
  const Dataset val_set = select(dataset, split.val);
  const Dataset test_set = select(dataset, split.test);

  CalibrationParams params0 = base;
  params0.normalization = fit_normalization(train_set, spec, config.normalization_trim);
  config.seed = seed;

  ExperimentResult out;
  CalibrationParams initial = params0;
  initial.w_mrf = config.w_init;
  if (params0.use_mrf) {
    out.trained = train(train_set, config, spec, params0);
  } else {
    out.trained.params = initial;
  }

  const auto val_initial = score_calibrated(val_set, spec, initial, config.threads);
  const auto val_trained = score_calibrated(val_set, spec, out.trained.params, config.threads);
  out.val_auroc_initial = auroc(val_initial.scores, val_initial.labels);
  out.val_auroc_trained = auroc(val_trained.scores, val_trained.labels);

  const std::string name(to_string(spec.kind));
  out.baseline = evaluate(score_baseline(test_set, spec, config.threads), name, "baseline", seed,
                          {{"detector", name}});
  out.calibrated = evaluate(score_calibrated(test_set, spec, out.trained.params, config.threads), name,
                            "calibrated", seed, config_echo(spec, out.trained.params));
  return out;
}

std::string_view to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::kFull:
      return "full";
    case AblationVariant::kWithoutPos:
      return "w/o Pos";
    case AblationVariant::kWithoutMrf:
      return "w/o MRF";
    case AblationVariant::kBaseline:
      return "baseline";
  }
  return "unknown";
}

std::vector<AblationRow> run_ablation(const Dataset& dataset, const DetectorSpec& spec,
                                      const CalibrationParams& base, const TrainConfig& config,
                                      std::span<const std::uint64_t> seeds) {
  std::vector<AblationRow> rows(4);
  rows[0].variant = AblationVariant::kFull;
  rows[1].variant = AblationVariant::kWithoutPos;
  rows[2].variant = AblationVariant::kWithoutMrf;
  rows[3].variant = AblationVariant::kBaseline;

  for (std::uint64_t seed : seeds) {
    CalibrationParams full = base;
    full.use_mrf = true;
    full.use_positional = true;
    CalibrationParams no_pos = full;
    no_pos.use_positional = false;
    CalibrationParams no_mrf = full;
    no_mrf.use_mrf = false;

    const auto r_full = run_experiment(dataset, spec, full, config, seed);
    const auto r_no_pos = run_experiment(dataset, spec, no_pos, config, seed);
    const auto r_no_mrf = run_experiment(dataset, spec, no_mrf, config, seed);

    const EvalReport* reports[4] = {&r_full.calibrated, &r_no_pos.calibrated, &r_no_mrf.calibrated,
                                    &r_full.baseline};
    for (std::size_t i = 0; i < 4; ++i) {
      rows[i].auroc_per_seed.push_back(reports[i]->auroc);
      rows[i].tpr_per_seed.push_back(reports[i]->tpr_at_fpr_1);
    }
  }
  for (auto& row : rows) {
    const double n = static_cast<double>(row.auroc_per_seed.size());
    row.mean_auroc = std::accumulate(row.auroc_per_seed.begin(), row.auroc_per_seed.end(), 0.0) / n;
    row.mean_tpr = std::accumulate(row.tpr_per_seed.begin(), row.tpr_per_seed.end(), 0.0) / n;
  }
  return rows;
}

std::string ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "variant" << std::setw(12) << "mean AUROC" << "mean TPR@FPR-1%\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::setw(12) << to_string(r.variant) << std::setw(12) << r.mean_auroc << r.mean_tpr << "\n";
  }
  return os.str();
}

}  // namespace mgtcalib
