#include "mgtcalib/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mgtcalib {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels,
                  std::size_t& n_pos, std::size_t& n_neg) {
  if (scores.size() != labels.size()) throw ShapeMismatch("scores and labels differ in length");
  n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw SingleClass("both classes must be present");
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  check_inputs(scores, labels, n_pos, n_neg);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of mid-ranks (1-based) of the positives. Ranks are multiples of 1/2,
  // so the sum is exact.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum += mid;
    }
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

double tpr_at_fpr(std::span<const double> scores, std::span<const int> labels, double fpr_cap) {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  check_inputs(scores, labels, n_pos, n_neg);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Lowering tau past each distinct score admits that whole tie group.
  double best = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    if (fpr <= fpr_cap) best = std::max(best, static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  return best;
}

SplitIndices split_dataset(const Dataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n < 10) throw InvalidArgument("split needs at least 10 items");

  // Shuffle within each label stratum, then interleave strata by relative
  // position so every prefix is close to label-proportional.
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    const int key = dataset[i].label ? static_cast<int>(*dataset[i].label) : -1;
    strata[key].push_back(i);
  }
  std::mt19937_64 rng(seed);
  struct Keyed {
    double pos;
    int stratum;
    std::size_t index;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(n);
  for (auto& [key, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    const double m = static_cast<double>(members.size());
    for (std::size_t r = 0; r < members.size(); ++r) {
      keyed.push_back({(static_cast<double>(r) + 0.5) / m, key, members[r]});
    }
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.pos != b.pos) return a.pos < b.pos;
    return a.stratum < b.stratum;
  });

  const std::size_t n_train = n / 10;
  const std::size_t n_val = (n - n_train) / 2;
  SplitIndices out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& bucket = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    bucket.push_back(keyed[i].index);
  }
  return out;
}

Dataset select(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(dataset.at(i));
  return out;
}

SynthProfile default_profile() { return SynthProfile{}; }

std::optional<SynthProfile> named_profile(std::string_view name) {
  SynthProfile p = default_profile();
  if (name == "default") return p;
  if (name == "stationary") {
    p.inflate_factor = 1.0;
    return p;
  }
  if (name == "iid") {
    p.rho = 0.0;
    return p;
  }
  if (name == "multi") {
    p.aux_per_kind = 5;
    p.aux_kinds = {AuxKind::kPerturbed, AuxKind::kRegenerated, AuxKind::kContinuation};
    return p;
  }
  return std::nullopt;
}

std::vector<std::string> profile_names() { return {"default", "stationary", "iid", "multi"}; }

namespace {

class ScoreSampler {
 public:
  explicit ScoreSampler(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }

  std::size_t uniform(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  double token_noise(double dof) {
    if (dof <= 0.0) return normal();
    return std::student_t_distribution<double>(dof)(rng_);
  }

  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  /// Label-dependent means plus AR(1) noise with initial-segment inflation.
  std::vector<double> path(std::size_t n, double machine_share, double switch_prob,
                           const SynthProfile& p) {
    std::vector<double> out(n);
    const double innov = p.sigma * std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho));
    const double inflate = std::sqrt(std::max(0.0, p.inflate_factor));
    bool machine_token = unit() < machine_share;
    double z = p.sigma * normal();
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0) {
        z = p.rho * z + innov * normal();
        if (unit() < switch_prob) machine_token = unit() < machine_share;
      }
      const bool early = t < p.inflate_tokens;
      double mean = machine_token ? p.machine_token_mean : p.human_token_mean;
      if (early && !p.initial_tokens_informative) {
        mean = 0.5 * (p.machine_token_mean + p.human_token_mean);
      }
      double noise = z;
      if (p.token_noise > 0.0) noise += p.token_noise * token_noise(p.token_noise_dof);
      out[t] = mean + (early ? inflate * noise : noise);
    }
    return out;
  }

  ScoreChannels channels_from(const std::vector<double>& latent) {
    ScoreChannels ch;
    std::vector<double> lp(latent.size());
    std::vector<std::int64_t> rank(latent.size());
    std::vector<double> ent(latent.size());
    for (std::size_t t = 0; t < latent.size(); ++t) {
      lp[t] = std::min(0.0, latent[t]);
      const double log_rank = std::max(0.0, 0.8 * -lp[t] + 0.3 * normal());
      rank[t] = std::max<std::int64_t>(1, std::llround(std::exp(log_rank)));
      ent[t] = std::max(0.0, 0.7 * -lp[t] + 0.5 + 0.3 * normal());
    }
    ch.logprob = std::move(lp);
    ch.rank = std::move(rank);
    ch.entropy = std::move(ent);
    return ch;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace

Dataset synth_generate(const SynthProfile& profile, std::uint64_t seed) {
  if (profile.min_tokens < 2 || profile.max_tokens < profile.min_tokens) {
    throw InvalidArgument("synthetic profile needs 2 <= min_tokens <= max_tokens");
  }
  ScoreSampler sampler(seed);
  const auto n_machine =
      static_cast<std::size_t>(std::llround(profile.machine_fraction * static_cast<double>(profile.n_texts)));

  Dataset out;
  out.reserve(profile.n_texts);
  for (std::size_t i = 0; i < profile.n_texts; ++i) {
    const bool machine = i < n_machine;
    const double share =
        machine ? profile.machine_text_machine_tokens : profile.human_text_machine_tokens;
    const std::size_t n = sampler.uniform(profile.min_tokens, profile.max_tokens);
    const double switch_prob = !machine && profile.human_label_switch_prob >= 0.0
                                   ? profile.human_label_switch_prob
                                   : profile.label_switch_prob;
    const auto latent = sampler.path(n, share, switch_prob, profile);

    TokenScoreSequence seq;
    std::ostringstream id;
    id << "synth-" << seed << "-" << std::setw(5) << std::setfill('0') << i;
    seq.id = id.str();
    seq.label = machine ? Label::kMachine : Label::kHuman;
    seq.source = machine ? "synth-machine" : "synth-human";
    seq.n_tokens = n;
    seq.scores = sampler.channels_from(latent);

    for (AuxKind kind : profile.aux_kinds) {
      for (std::size_t a = 0; a < profile.aux_per_kind; ++a) {
        AuxSequence aux;
        aux.kind = kind;
        std::vector<double> aux_latent;
        if (kind == AuxKind::kContinuation) {
          // Continuations are written by the model whatever the source.
          aux_latent = sampler.path(std::max<std::size_t>(2, n / 2), profile.machine_text_machine_tokens,
                                    profile.label_switch_prob, profile);
        } else {
          const double drop = machine ? profile.machine_aux_drop : profile.human_aux_drop;
          aux_latent = latent;
          for (double& v : aux_latent) v += -drop + 0.3 * profile.sigma * sampler.normal();
        }
        aux.scores = sampler.channels_from(aux_latent);
        seq.aux.push_back(std::move(aux));
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

EvalReport evaluate(const ScoredSet& scored, std::string detector, std::string mode,
                    std::uint64_t seed, std::map<std::string, std::string> config) {
  EvalReport r;
  r.detector = std::move(detector);
  r.mode = std::move(mode);
  r.seed = seed;
  r.n = scored.scores.size();
  r.n_machine = static_cast<std::size_t>(std::count(scored.labels.begin(), scored.labels.end(), 1));
  r.n_human = r.n - r.n_machine;
  r.skipped = scored.skipped;
  r.auroc = auroc(scored.scores, scored.labels);
  r.tpr_at_fpr_1 = tpr_at_fpr(scored.scores, scored.labels, 0.01);
  r.config = std::move(config);

  if (scored.sources.size() == scored.scores.size()) {
    std::map<std::string, std::vector<std::size_t>> by_source;
    std::vector<std::size_t> humans;
    for (std::size_t i = 0; i < r.n; ++i) {
      if (scored.labels[i] == 1) {
        by_source[scored.sources[i]].push_back(i);
      } else {
        humans.push_back(i);
      }
    }
    for (const auto& [source, members] : by_source) {
      std::vector<double> s;
      std::vector<int> l;
      for (std::size_t i : members) {
        s.push_back(scored.scores[i]);
        l.push_back(1);
      }
      for (std::size_t i : humans) {
        s.push_back(scored.scores[i]);
        l.push_back(0);
      }
      r.per_source_auroc[source] = auroc(s, l);
    }
  }
  return r;
}

std::string to_json_line(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["detector"] = report.detector;
  j["mode"] = report.mode;
  j["seed"] = report.seed;
  j["n"] = report.n;
  j["n_human"] = report.n_human;
  j["n_machine"] = report.n_machine;
  j["skipped"] = report.skipped;
  j["auroc"] = report.auroc;
  j["tpr_at_fpr_1"] = report.tpr_at_fpr_1;
  j["per_source_auroc"] = report.per_source_auroc;
  j["config"] = report.config;
  return j.dump();
}

std::string to_table(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "detector" << std::setw(12) << "mode" << std::setw(6) << "seed"
     << std::setw(7) << "n" << std::setw(10) << "AUROC" << "TPR@FPR-1%\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    os << std::setw(16) << r.detector << std::setw(12) << r.mode << std::setw(6) << r.seed << std::setw(7)
       << r.n << std::setw(10) << r.auroc << r.tpr_at_fpr_1 << "\n";
  }
  return os.str();
}

}  // namespace mgtcalib
