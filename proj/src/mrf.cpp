#include "mgtcalib/mrf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgtcalib {

double beta(double t, double t0) { return 1.0 / (1.0 + std::exp(-(t - t0))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> positional_weights(std::size_t n, double t0, bool positional) {
  std::vector<double> out(n, 1.0);
  if (positional) {
    for (std::size_t i = 0; i < n; ++i) out[i] = beta(static_cast<double>(i + 1), t0);
  }
  return out;
}

UnaryMatrix build_unary(const TokenScoreVector& vec, const DetectorSpec& spec, double eps,
                        const std::optional<NormalizationRange>& range) {
  if (vec.values.empty()) throw EmptyVector("cannot build unary potentials from no tokens");
  if (!(eps > 0.0 && eps < 0.5)) throw InvalidArgument("epsilon_clip must lie in (0, 0.5)");

  const std::size_t n = vec.values.size();
  std::vector<double> p(n);
  if (vec.channel == ScoreChannel::kProbability) {
    p = vec.values;
  } else {
    const double sign = spec.orientation < 0 ? -1.0 : 1.0;
    std::vector<double> oriented(n);
    std::transform(vec.values.begin(), vec.values.end(), oriented.begin(),
                   [sign](double v) { return sign * v; });
    double lo = 0.0;
    double hi = 0.0;
    if (range) {
      lo = range->lo;
      hi = range->hi;
    } else {
      const auto [mn, mx] = std::minmax_element(oriented.begin(), oriented.end());
      lo = *mn;
      hi = *mx;
    }
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = hi > lo ? (oriented[i] - lo) / (hi - lo) : 0.5;
    }
  }

  UnaryMatrix h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = std::clamp(p[i], eps, 1.0 - eps);
    h[i] = {1.0 - pi, pi};
  }
  return h;
}

AdjacencyWeights build_adjacency(const std::vector<double>& weights) {
  AdjacencyWeights adj;
  adj.n = weights.size();
  if (adj.n < 2) return adj;
  adj.upper.resize(adj.n - 1);
  adj.lower.resize(adj.n - 1);
  for (std::size_t r = 0; r + 1 < adj.n; ++r) {
    adj.upper[r] = weights[r + 1];
    adj.lower[r] = weights[r];
  }
  return adj;
}

AdjacencyWeights build_adjacency(std::size_t n, double t0) {
  return build_adjacency(positional_weights(n, t0, true));
}

Matrix2 signed_coupling(const Matrix2& w) {
  return {{{-w[0][0], w[0][1]}, {w[1][0], -w[1][1]}}};
}

BeliefMatrix mean_field_step_log(const BeliefMatrix& log_q, const AdjacencyWeights& adj,
                                 const Matrix2& w) {
  const std::size_t n = log_q.size();
  if (adj.n != n) throw ShapeMismatch("adjacency and belief matrix disagree on N");

  const Matrix2 ws = signed_coupling(w);
  BeliefMatrix q(n);
  for (std::size_t r = 0; r < n; ++r) q[r] = {std::exp(log_q[r][0]), std::exp(log_q[r][1])};

  BeliefMatrix out(n);
  for (std::size_t r = 0; r < n; ++r) {
    // Row r of A Q: weighted beliefs of the left and right neighbours.
    std::array<double, 2> m{0.0, 0.0};
    if (r + 1 < n) {
      m[0] += adj.upper[r] * q[r + 1][0];
      m[1] += adj.upper[r] * q[r + 1][1];
    }
    if (r > 0) {
      m[0] += adj.lower[r - 1] * q[r - 1][0];
      m[1] += adj.lower[r - 1] * q[r - 1][1];
    }
    const double z0 = log_q[r][0] - (m[0] * ws[0][0] + m[1] * ws[1][0]);
    const double z1 = log_q[r][1] - (m[0] * ws[0][1] + m[1] * ws[1][1]);
    const double mx = std::max(z0, z1);
    const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
    out[r] = {z0 - lse, z1 - lse};
  }
  return out;
}

BeliefMatrix mean_field_step(const BeliefMatrix& q, const UnaryMatrix& h,
                             const AdjacencyWeights& adj, const Matrix2& w) {
  if (q.size() != h.size()) throw ShapeMismatch("Q and H disagree on N");
  for (const auto& row : w) {
    for (double v : row) {
      if (v < 0.0) throw InvalidArgument("W_mrf entries must be non-negative");
    }
  }
  BeliefMatrix log_q(q.size());
  for (std::size_t r = 0; r < q.size(); ++r) log_q[r] = {std::log(q[r][0]), std::log(q[r][1])};
  BeliefMatrix out = mean_field_step_log(log_q, adj, w);
  for (auto& row : out) row = {std::exp(row[0]), std::exp(row[1])};
  return out;
}

CalibrationTrace calibrate_traced(const UnaryMatrix& h, const CalibrationParams& params) {
  require_valid(params);
  CalibrationTrace trace;
  trace.weights = positional_weights(h.size(), params.t0, params.use_positional);
  trace.adjacency = build_adjacency(trace.weights);

  BeliefMatrix log_q(h.size());
  for (std::size_t r = 0; r < h.size(); ++r) log_q[r] = {std::log(h[r][0]), std::log(h[r][1])};
  trace.log_states.reserve(static_cast<std::size_t>(params.iterations) + 1);
  trace.log_states.push_back(std::move(log_q));
  if (params.use_mrf) {
    for (int it = 0; it < params.iterations; ++it) {
      trace.log_states.push_back(
          mean_field_step_log(trace.log_states.back(), trace.adjacency, params.w_mrf));
    }
  }
  return trace;
}

BeliefMatrix final_beliefs(const CalibrationTrace& trace) {
  const auto& last = trace.log_states.back();
  BeliefMatrix out(last.size());
  for (std::size_t r = 0; r < last.size(); ++r) {
    const double b = trace.weights[r];
    out[r] = {b * std::exp(last[r][0]), b * std::exp(last[r][1])};
  }
  return out;
}

BeliefMatrix calibrate(const UnaryMatrix& h, const CalibrationParams& params) {
  return final_beliefs(calibrate_traced(h, params));
}

double enhanced_score(const BeliefMatrix& q_final, const CalibrationParams& params) {
  const auto weights = positional_weights(q_final.size(), params.t0, params.use_positional);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double mass = 0.0;
  for (const auto& row : q_final) mass += row[1];
  return total > 0.0 ? mass / total : 0.0;
}

double enhanced_score(const CalibrationTrace& trace) {
  const auto& last = trace.log_states.back();
  double mass = 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < last.size(); ++r) {
    mass += trace.weights[r] * std::exp(last[r][1]);
    total += trace.weights[r];
  }
  return total > 0.0 ? mass / total : 0.0;
}

UnaryMatrix unary_for(const ScoreChannels& channels, const DetectorSpec& spec,
                      const CalibrationParams& params) {
  const auto vec = token_scores(channels, spec);
  std::optional<NormalizationRange> range;
  if (vec.channel != ScoreChannel::kProbability) range = params.normalization;
  return build_unary(vec, spec, params.epsilon_clip, range);
}

CalibratedScore calibrated_detector_score(const TokenScoreSequence& seq, const DetectorSpec& spec,
                                          const CalibrationParams& params) {
  if (seq.n_tokens < 2) throw SequenceTooShort("sequence '" + seq.id + "' has fewer than 2 tokens");
  CalibratedScore out;
  out.candidate_mean = enhanced_score(calibrate_traced(unary_for(seq.scores, spec, params), params));
  if (!is_multi_sample(spec.kind)) {
    out.raw = out.candidate_mean;
    return out;
  }

  for (const auto* a : matching_aux(seq, spec.kind)) {
    if (params.calibrate_aux) {
      out.aux_means.push_back(
          enhanced_score(calibrate_traced(unary_for(a->scores, spec, params), params)));
    } else {
      out.aux_means.push_back(aggregate_single(token_scores(a->scores, spec)));
    }
  }
  if (spec.kind == DetectorKind::kDnaGpt) {
    if (out.aux_means.empty()) throw NoContinuations("DNA-GPT needs at least one continuation");
    const double avg = std::accumulate(out.aux_means.begin(), out.aux_means.end(), 0.0) /
                       static_cast<double>(out.aux_means.size());
    out.raw = out.candidate_mean - avg;
  } else {
    out.raw = aggregate_zscore(out.candidate_mean, out.aux_means);
  }
  return out;
}

}  // namespace mgtcalib
