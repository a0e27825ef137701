#include "mgtcalib/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mgtcalib/parallel.hpp"

namespace mgtcalib {

double bce_loss(double pred, int label) {
  const double p = std::clamp(pred, kBceClip, 1.0 - kBceClip);
  return label == 1 ? -std::log(p) : -std::log1p(-p);
}

double training_prediction(const CalibratedScore& score, DetectorKind kind) {
  return is_multi_sample(kind) ? sigmoid(score.raw) : score.raw;
}

Matrix2 backprop_enhanced_score(const CalibrationTrace& trace, const Matrix2& w, double upstream) {
  Matrix2 grad{};
  const std::size_t steps = trace.log_states.size() - 1;
  if (steps == 0 || upstream == 0.0) return grad;

  const auto& weights = trace.weights;
  const auto& adj = trace.adjacency;
  const std::size_t n = weights.size();
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);

  // Gradient with respect to log Q^T.
  BeliefMatrix g(n, {0.0, 0.0});
  for (std::size_t r = 0; r < n; ++r) {
    g[r][1] = upstream * weights[r] * std::exp(trace.log_states[steps][r][1]) / total;
  }

  const Matrix2 ws = signed_coupling(w);
  Matrix2 g_ws{};
  BeliefMatrix q(n);
  BeliefMatrix g_q(n);
  for (std::size_t k = steps; k >= 1; --k) {
    const auto& in = trace.log_states[k - 1];
    const auto& out = trace.log_states[k];
    for (std::size_t r = 0; r < n; ++r) {
      q[r] = {std::exp(in[r][0]), std::exp(in[r][1])};
      g_q[r] = {0.0, 0.0};
    }

    BeliefMatrix g_in(n);
    for (std::size_t r = 0; r < n; ++r) {
      // log-softmax backward
      const double s = g[r][0] + g[r][1];
      const std::array<double, 2> g_z{g[r][0] - std::exp(out[r][0]) * s,
                                      g[r][1] - std::exp(out[r][1]) * s};
      g_in[r] = g_z;

      std::array<double, 2> m{0.0, 0.0};
      if (r + 1 < n) {
        m[0] += adj.upper[r] * q[r + 1][0];
        m[1] += adj.upper[r] * q[r + 1][1];
      }
      if (r > 0) {
        m[0] += adj.lower[r - 1] * q[r - 1][0];
        m[1] += adj.lower[r - 1] * q[r - 1][1];
      }
      // Z = log Q - m * Ws, so dL/d(m * Ws) = -g_z.
      for (int a = 0; a < 2; ++a) {
        for (int c = 0; c < 2; ++c) g_ws[a][c] -= m[a] * g_z[c];
      }
      const std::array<double, 2> g_m{-(ws[0][0] * g_z[0] + ws[0][1] * g_z[1]),
                                      -(ws[1][0] * g_z[0] + ws[1][1] * g_z[1])};
      if (r + 1 < n) {
        g_q[r + 1][0] += adj.upper[r] * g_m[0];
        g_q[r + 1][1] += adj.upper[r] * g_m[1];
      }
      if (r > 0) {
        g_q[r - 1][0] += adj.lower[r - 1] * g_m[0];
        g_q[r - 1][1] += adj.lower[r - 1] * g_m[1];
      }
    }
    for (std::size_t r = 0; r < n; ++r) {
      g_in[r][0] += g_q[r][0] * q[r][0];
      g_in[r][1] += g_q[r][1] * q[r][1];
    }
    g = std::move(g_in);
  }

  grad[0][0] = -g_ws[0][0];
  grad[0][1] = g_ws[0][1];
  grad[1][0] = g_ws[1][0];
  grad[1][1] = -g_ws[1][1];
  return grad;
}

namespace {

struct ItemResult {
  double loss = 0.0;
  Matrix2 grad{};
  bool skipped = false;
};

void add_scaled(Matrix2& acc, const Matrix2& m, double scale = 1.0) {
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) acc[a][c] += scale * m[a][c];
  }
}

ItemResult item_loss_grad(const TokenScoreSequence& seq, const DetectorSpec& spec,
                          const CalibrationParams& params, bool want_grad) {
  if (!seq.label) throw InvalidArgument("training item '" + seq.id + "' has no label");
  const int y = static_cast<int>(*seq.label);
  ItemResult out;

  const auto cand = calibrate_traced(unary_for(seq.scores, spec, params), params);
  const double cand_mean = enhanced_score(cand);

  if (!is_multi_sample(spec.kind)) {
    const double p = cand_mean;
    out.loss = bce_loss(p, y);
    if (want_grad && p > kBceClip && p < 1.0 - kBceClip) {
      const double dp = (p - y) / (p * (1.0 - p));
      out.grad = backprop_enhanced_score(cand, params.w_mrf, dp);
    }
    return out;
  }

  std::vector<CalibrationTrace> aux_traces;
  std::vector<double> aux_means;
  for (const auto* a : matching_aux(seq, spec.kind)) {
    if (params.calibrate_aux) {
      aux_traces.push_back(calibrate_traced(unary_for(a->scores, spec, params), params));
      aux_means.push_back(enhanced_score(aux_traces.back()));
    } else {
      aux_means.push_back(aggregate_single(token_scores(a->scores, spec)));
    }
  }
  const double n = static_cast<double>(aux_means.size());

  double raw = 0.0;
  double d_cand = 0.0;
  std::vector<double> d_aux(aux_means.size(), 0.0);
  if (spec.kind == DetectorKind::kDnaGpt) {
    if (aux_means.empty()) throw NoContinuations("DNA-GPT needs at least one continuation");
    const double avg = std::accumulate(aux_means.begin(), aux_means.end(), 0.0) / n;
    raw = cand_mean - avg;
    d_cand = 1.0;
    std::fill(d_aux.begin(), d_aux.end(), -1.0 / n);
  } else {
    if (aux_means.size() < 2) throw InvalidArgument("z-score needs at least 2 aux samples");
    const auto [mu, sigma] = mean_std(aux_means);
    if (sigma < 1e-12) {
      out.skipped = true;
      return out;
    }
    raw = (cand_mean - mu) / sigma;
    d_cand = 1.0 / sigma;
    for (std::size_t i = 0; i < aux_means.size(); ++i) {
      d_aux[i] = -1.0 / (n * sigma) - (cand_mean - mu) * (aux_means[i] - mu) / (n * sigma * sigma * sigma);
    }
  }

  const double p = sigmoid(raw);
  out.loss = bce_loss(p, y);
  if (want_grad && p > kBceClip && p < 1.0 - kBceClip) {
    const double d_raw = p - y;
    out.grad = backprop_enhanced_score(cand, params.w_mrf, d_raw * d_cand);
    for (std::size_t i = 0; i < aux_traces.size(); ++i) {
      add_scaled(out.grad, backprop_enhanced_score(aux_traces[i], params.w_mrf, d_raw * d_aux[i]));
    }
  }
  return out;
}

LossGrad reduce(std::span<const TokenScoreSequence> batch, const DetectorSpec& spec,
                const CalibrationParams& params, unsigned threads, bool want_grad) {
  require_valid(params);
  std::vector<ItemResult> items(batch.size());
  parallel_for(batch.size(), threads,
               [&](std::size_t i) { items[i] = item_loss_grad(batch[i], spec, params, want_grad); });

  LossGrad out;
  std::size_t used = 0;
  for (const auto& it : items) {
    if (it.skipped) continue;
    ++used;
    out.loss += it.loss;
    add_scaled(out.grad, it.grad);
  }
  if (used == 0) throw InvalidArgument("no usable training items");
  out.loss /= static_cast<double>(used);
  for (auto& row : out.grad) {
    for (auto& v : row) v /= static_cast<double>(used);
  }
  return out;
}

}  // namespace

LossGrad loss_and_grad(std::span<const TokenScoreSequence> batch, const DetectorSpec& spec,
                       const CalibrationParams& params, unsigned threads) {
  return reduce(batch, spec, params, threads, true);
}

double mean_loss(std::span<const TokenScoreSequence> batch, const DetectorSpec& spec,
                 const CalibrationParams& params, unsigned threads) {
  return reduce(batch, spec, params, threads, false).loss;
}

TrainResult train(std::span<const TokenScoreSequence> dataset, const TrainConfig& config,
                  const DetectorSpec& spec, const CalibrationParams& params0) {
  if (dataset.empty()) throw InvalidArgument("training dataset is empty");
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (config.epochs < 1) throw InvalidArgument("epochs must be at least 1");

  TrainResult result;
  result.params = params0;
  result.params.w_mrf = config.w_init;
  require_valid(result.params);

  std::vector<TokenScoreSequence> order(dataset.begin(), dataset.end());
  const std::size_t batch_size =
      config.batch ? std::max<std::size_t>(1, *config.batch) : order.size();
  std::mt19937_64 rng(config.seed);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (batch_size < order.size()) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const std::span<const TokenScoreSequence> batch(order.data() + start, len);
      const auto lg = loss_and_grad(batch, spec, result.params, config.threads);
      epoch_loss += lg.loss * static_cast<double>(len);
      for (int a = 0; a < 2; ++a) {
        for (int c = 0; c < 2; ++c) {
          const double next = result.params.w_mrf[a][c] - config.learning_rate * lg.grad[a][c];
          result.params.w_mrf[a][c] = std::max(0.0, next);
        }
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

}  // namespace mgtcalib
