#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mgtcalib/analysis.hpp"
#include "mgtcalib/evaluation.hpp"
#include "mgtcalib/experiment.hpp"

using namespace mgtcalib;
using doctest::Approx;

namespace {

double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

double brute_tpr(const std::vector<double>& s, const std::vector<int>& y, double cap) {
  std::vector<double> taus = s;
  taus.push_back(-INFINITY);
  double best = 0.0;
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double neg = static_cast<double>(y.size()) - pos;
  for (double tau : taus) {
    double tp = 0.0;
    double fp = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] > tau) (y[i] == 1 ? tp : fp) += 1.0;
    }
    if (fp / neg <= cap) best = std::max(best, tp / pos);
  }
  return best;
}

Dataset labelled(std::size_t n_machine, std::size_t n_human) {
  Dataset d;
  for (std::size_t i = 0; i < n_machine + n_human; ++i) {
    d.push_back(make_sequence("x" + std::to_string(i), i < n_machine ? Label::kMachine : Label::kHuman,
                              {-1.0, -2.0}));
  }
  return d;
}

}  // namespace

TEST_CASE("AUROC examples") {
  CHECK(auroc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(auroc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  CHECK(auroc(std::vector<double>{0.9, 0.4, 0.6, 0.1}, std::vector<int>{1, 1, 0, 0}) == 0.75);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), SingleClass);
}

TEST_CASE("AUROC equals brute-force counting with ties") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 49;
    std::vector<double> s(n);
    std::vector<int> y(n);
    std::uniform_int_distribution<int> level(0, 6);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) * 0.25;
      y[i] = static_cast<int>(i % 2);
    }
    std::shuffle(y.begin(), y.end(), rng);
    CHECK(auroc(s, y) == brute_auroc(s, y));
  }
}

TEST_CASE("AUROC is invariant under increasing transforms") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < s.size(); ++i) {
    y[i] = static_cast<int>(i % 2);
    s[i] = g(rng) + 0.5 * y[i];
  }
  std::vector<double> t = s;
  for (double& v : t) v = std::exp(3.0 * v) + 7.0;
  CHECK(auroc(s, y) == auroc(t, y));
}

TEST_CASE("TPR at FPR examples") {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.2, 0.6, 0.3, 0.2, 0.1};
  const std::vector<int> y{1, 1, 1, 1, 0, 0, 0, 0};
  CHECK(tpr_at_fpr(s, y, 0.01) == 0.75);
  CHECK(tpr_at_fpr(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(tpr_at_fpr(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{1, 1, 0, 0}) == 0.0);
  CHECK_THROWS_AS(tpr_at_fpr(std::vector<double>{0.1}, std::vector<int>{0}), SingleClass);
}

TEST_CASE("TPR matches brute force and is monotone in the cap") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + trial;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % 2);
      s[i] = std::round((g(rng) + y[i]) * 4.0) / 4.0;
    }
    double last = 0.0;
    for (double cap : {0.0, 0.01, 0.05, 0.1, 0.3, 1.0}) {
      const double t = tpr_at_fpr(s, y, cap);
      CHECK(t == brute_tpr(s, y, cap));
      CHECK(t >= last);
      last = t;
    }
    CHECK(last == 1.0);
  }
}

TEST_CASE("split sizes, determinism and partition") {
  const auto data = labelled(500, 500);
  const auto a = split_dataset(data, 1);
  CHECK(a.train.size() == 100);
  CHECK(a.val.size() == 450);
  CHECK(a.test.size() == 450);
  const auto b = split_dataset(data, 1);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  std::set<std::size_t> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->begin(), part->end());
  CHECK(all.size() == data.size());
  CHECK(split_dataset(data, 2).train != a.train);

  const auto odd = split_dataset(labelled(7, 6), 3);
  CHECK(odd.train.size() == 1);
  CHECK(odd.val.size() == 6);
  CHECK(odd.test.size() == 6);
  CHECK_THROWS_AS(split_dataset(labelled(5, 4), 1), InvalidArgument);
}

TEST_CASE("split is stratified") {
  const auto data = labelled(10, 10);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = split_dataset(data, seed);
    REQUIRE(s.train.size() == 2);
    CHECK(data[s.train[0]].label != data[s.train[1]].label);
  }
  const auto big = labelled(300, 700);
  const auto s = split_dataset(big, 4);
  std::size_t machine = 0;
  for (auto i : s.train) machine += big[i].label == Label::kMachine ? 1 : 0;
  CHECK(machine == 30);
}

TEST_CASE("synthetic data is valid, labelled and deterministic") {
  auto p = default_profile();
  p.n_texts = 60;
  const auto a = synth_generate(p, 9);
  const auto b = synth_generate(p, 9);
  REQUIRE(a.size() == 60);
  std::size_t machine = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(validate_sequence(a[i]).empty());
    CHECK(a[i].label.has_value());
    CHECK(a[i].n_tokens >= p.min_tokens);
    CHECK(a[i].n_tokens <= p.max_tokens);
    CHECK(*a[i].scores.logprob == *b[i].scores.logprob);
    machine += a[i].label == Label::kMachine ? 1 : 0;
  }
  CHECK(machine == 30);
  CHECK(*synth_generate(p, 10)[0].scores.logprob != *a[0].scores.logprob);

  auto multi = *named_profile("multi");
  multi.n_texts = 10;
  for (const auto& s : synth_generate(multi, 1)) {
    CHECK(validate_sequence(s).empty());
    CHECK(s.aux.size() == 15);
  }
  CHECK_FALSE(named_profile("nope"));
}

TEST_CASE("synthetic hop distances follow the correlation") {
  auto p = default_profile();
  p.rho = 0.0;
  const auto iid = synth_generate(p, 11);
  const double d1 = hop_distance(iid, ScoreChannel::kLogProb, 1).distance;
  const double d5 = hop_distance(iid, ScoreChannel::kLogProb, 5).distance;
  CHECK(std::abs(d1 - d5) / d5 < 0.03);

  const auto corr = synth_generate(default_profile(), 11);
  CHECK(hop_distance(corr, ScoreChannel::kLogProb, 1).distance <
        hop_distance(corr, ScoreChannel::kLogProb, 5).distance);
}

TEST_CASE("without inflation the positional curve is flat") {
  const auto flat = synth_generate(*named_profile("stationary"), 12);
  const auto bins = positional_instability(flat, ScoreChannel::kLogProb, 20);
  double rest = 0.0;
  for (std::size_t b = 2; b < 20; ++b) rest += bins.mean[b] / 18.0;
  CHECK(std::abs(bins.mean[0] / rest - 1.0) < 0.15);

  const auto inflated = synth_generate(default_profile(), 12);
  const auto ib = positional_instability(inflated, ScoreChannel::kLogProb, 20);
  double irest = 0.0;
  for (std::size_t b = 2; b < 20; ++b) irest += ib.mean[b] / 18.0;
  CHECK(ib.mean[0] > irest);
}

TEST_CASE("evaluate is deterministic and reports per-source AUROC") {
  ScoredSet s;
  s.scores = {0.9, 0.4, 0.6, 0.1, 0.8};
  s.labels = {1, 1, 0, 0, 1};
  s.sources = {"gen-a", "gen-a", "human", "human", "gen-b"};
  const auto r1 = evaluate(s, "likelihood", "baseline", 3, {{"k", "v"}});
  const auto r2 = evaluate(s, "likelihood", "baseline", 3, {{"k", "v"}});
  CHECK(to_json_line(r1) == to_json_line(r2));
  CHECK(r1.n == 5);
  CHECK(r1.n_machine == 3);
  CHECK(r1.n_human == 2);
  CHECK(r1.per_source_auroc.at("gen-a") == 0.75);
  CHECK(r1.per_source_auroc.at("gen-b") == 1.0);
  CHECK(to_json_line(r1).find("\"auroc\"") != std::string::npos);
  const std::vector<EvalReport> reports{r1};
  CHECK(to_table(reports).find("likelihood") != std::string::npos);
}

TEST_CASE("W = 0 calibration ranks texts like the baseline") {
  auto p = default_profile();
  p.n_texts = 120;
  const auto data = synth_generate(p, 13);
  const auto spec = DetectorSpec::for_kind(DetectorKind::kLikelihood);
  const auto fitted = fit_normalization(data, spec, 0.0);
  CalibrationParams params;
  params.w_mrf = {{{0.0, 0.0}, {0.0, 0.0}}};
  params.use_positional = false;
  // A range wider than every token keeps the map affine (no clamping).
  params.normalization = NormalizationRange{fitted->lo - 1.0, fitted->hi + 1.0};
  const auto base = score_baseline(data, spec);
  const auto cal = score_calibrated(data, spec, params);
  CHECK(auroc(base.scores, base.labels) == auroc(cal.scores, cal.labels));
}
