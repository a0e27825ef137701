#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mgtcalib/mrf.hpp"
#include "mgtcalib/types.hpp"

namespace testing {

using namespace mgtcalib;

/// Random row-stochastic unary matrix with entries bounded away from 0.
inline UnaryMatrix random_unary(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  UnaryMatrix h(n);
  for (auto& row : h) {
    const double p = u(rng);
    row = {1.0 - p, p};
  }
  return h;
}

inline Matrix2 random_w(std::mt19937_64& rng, double hi = 2.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  return {{{u(rng), u(rng)}, {u(rng), u(rng)}}};
}

/// Dense reference of one update: Q' = softmax(log Q - A Q (W .* S)), with A
/// stored as a full matrix.
inline BeliefMatrix dense_step(const BeliefMatrix& q, const std::vector<std::vector<double>>& a,
                               const Matrix2& w) {
  const double s[2][2] = {{-1.0, 1.0}, {1.0, -1.0}};
  const std::size_t n = q.size();
  BeliefMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double aq[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      aq[0] += a[i][j] * q[j][0];
      aq[1] += a[i][j] * q[j][1];
    }
    double z[2];
    for (int c = 0; c < 2; ++c) {
      double pair = 0.0;
      for (int k = 0; k < 2; ++k) pair += aq[k] * w[k][c] * s[k][c];
      z[c] = std::log(q[i][c]) - pair;
    }
    const double e0 = std::exp(z[0]);
    const double e1 = std::exp(z[1]);
    out[i] = {e0 / (e0 + e1), e1 / (e0 + e1)};
  }
  return out;
}

/// Dense A^corr: the edge into position j (1-based) has weight beta(j).
inline std::vector<std::vector<double>> dense_adjacency(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    a[i][i + 1] = weights[i + 1];
    a[i + 1][i] = weights[i];
  }
  return a;
}

/// Text with the given log-probs (the first entry is the unconditioned token)
/// and matching rank/entropy channels.
inline TokenScoreSequence full_sequence(const std::string& id, std::optional<Label> label,
                                        const std::vector<double>& logprob) {
  TokenScoreSequence s = make_sequence(id, label, logprob);
  std::vector<std::int64_t> rank;
  std::vector<double> entropy;
  for (double lp : logprob) {
    rank.push_back(1 + static_cast<std::int64_t>(std::floor(-lp * 3.0)));
    entropy.push_back(0.5 - 0.4 * lp);
  }
  s.scores.rank = rank;
  s.scores.entropy = entropy;
  return s;
}

inline std::vector<double> random_logprob(std::mt19937_64& rng, std::size_t n, double mean) {
  std::normal_distribution<double> g(mean, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = std::min(-1e-3, g(rng));
  return out;
}

/// Labelled text carrying `n_aux` aux samples of every kind.
inline TokenScoreSequence random_text(std::mt19937_64& rng, const std::string& id, Label label,
                                      std::size_t n, std::size_t n_aux) {
  const double mean = label == Label::kMachine ? -1.5 : -2.5;
  auto seq = full_sequence(id, label, random_logprob(rng, n, mean));
  std::uniform_int_distribution<std::size_t> len(3, n + 3);
  for (AuxKind kind : {AuxKind::kPerturbed, AuxKind::kRegenerated, AuxKind::kContinuation}) {
    for (std::size_t i = 0; i < n_aux; ++i) {
      const auto aux = full_sequence("aux", std::nullopt, random_logprob(rng, len(rng), mean - 0.5));
      seq.aux.push_back(AuxSequence{kind, aux.scores});
    }
  }
  return seq;
}

}  // namespace testing
