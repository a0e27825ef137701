#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgtcalib/types.hpp"

namespace mgtcalib {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// P(machine score > human score) with ties counted 1/2, computed from
/// mid-ranks (Mann-Whitney U). `labels` holds 0 (human) / 1 (machine).
/// Throws SingleClass when either class is missing.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Largest TPR over thresholds tau (predict machine iff score > tau) whose
/// empirical FPR is at most `fpr_cap`.
double tpr_at_fpr(std::span<const double> scores, std::span<const int> labels,
                  double fpr_cap = 0.01);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Label-stratified deterministic split: floor(0.1 n) train, the remainder
/// halved into validation (rounded down) and test. Throws InvalidArgument for
/// fewer than 10 items.
SplitIndices split_dataset(const Dataset& dataset, std::uint64_t seed);

Dataset select(const Dataset& dataset, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Synthetic token-score generator
// ---------------------------------------------------------------------------

/// Synthetic token scores. Every token carries a hidden human/machine token
/// label drawn from a sticky two-state chain (each step re-draws the label
/// with probability `label_switch_prob`, from Bernoulli(fraction of the text's
/// class)). A token's score is the mean of its label plus stationary AR(1)
/// noise with correlation `rho` and standard deviation `sigma`, plus
/// independent heavy-tailed per-token noise. On the first `inflate_tokens`
/// tokens the noise is scaled so its variance is `inflate_factor` times the
/// stationary variance, and by default those tokens carry no class signal.
struct SynthProfile {
  std::size_t n_texts = 400;
  double machine_fraction = 0.5;
  std::size_t min_tokens = 80;
  std::size_t max_tokens = 160;
  double human_token_mean = -3.0;
  double machine_token_mean = -2.7;
  /// Share of machine-labelled tokens in human / machine texts.
  double human_text_machine_tokens = 0.0;
  double machine_text_machine_tokens = 1.0;
  double label_switch_prob = 0.1;
  /// Switch probability inside human texts; negative means same as above.
  double human_label_switch_prob = -1.0;
  double sigma = 0.5;
  double rho = 0.9;
  /// Independent per-token noise: Student-t with `token_noise_dof` degrees
  /// of freedom (0 = Gaussian) scaled by `token_noise`.
  double token_noise = 1.0;
  double token_noise_dof = 2.0;
  std::size_t inflate_tokens = 20;
  double inflate_factor = 5.0;
  /// Whether the inflated initial tokens still carry the class signal.
  bool initial_tokens_informative = false;
  /// Aux sequences per text, generated for each kind listed in `aux_kinds`.
  std::size_t aux_per_kind = 0;
  std::vector<AuxKind> aux_kinds;
  /// Mean log-prob drop of perturbed / regenerated samples per class.
  double human_aux_drop = 0.1;
  double machine_aux_drop = 0.5;
};

/// Profile used by the acceptance suite and `synth --profile default`.
SynthProfile default_profile();

/// Named profiles: "default", "stationary" (no initial inflation), "iid"
/// (rho = 0) and "multi" (default plus 5 aux samples of every kind).
std::optional<SynthProfile> named_profile(std::string_view name);
std::vector<std::string> profile_names();

Dataset synth_generate(const SynthProfile& profile, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct EvalReport {
  std::string detector;
  std::string mode;  // "baseline" or "calibrated"
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t n_human = 0;
  std::size_t n_machine = 0;
  std::size_t skipped = 0;
  double auroc = 0.0;
  double tpr_at_fpr_1 = 0.0;
  /// AUROC of each machine source against all human texts.
  std::map<std::string, double> per_source_auroc;
  std::map<std::string, std::string> config;
};

/// Machine-oriented scores of a labelled set, aligned with labels/sources.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> sources;
  std::size_t skipped = 0;
};

EvalReport evaluate(const ScoredSet& scored, std::string detector, std::string mode,
                    std::uint64_t seed, std::map<std::string, std::string> config = {});

std::string to_json_line(const EvalReport& report);
std::string to_table(std::span<const EvalReport> reports);

}  // namespace mgtcalib
