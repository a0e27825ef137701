#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mgtcalib/experiment.hpp"
#include "mgtcalib/training.hpp"

using namespace mgtcalib;
using doctest::Approx;

namespace {

Dataset random_batch(std::mt19937_64& rng, std::size_t n_texts, std::size_t max_len, std::size_t n_aux) {
  Dataset out;
  std::uniform_int_distribution<std::size_t> len(3, max_len);
  for (std::size_t i = 0; i < n_texts; ++i) {
    const Label y = i % 2 == 0 ? Label::kMachine : Label::kHuman;
    out.push_back(testing::random_text(rng, "t" + std::to_string(i), y, len(rng), n_aux));
  }
  return out;
}

Matrix2 finite_difference(const Dataset& batch, const DetectorSpec& spec, const CalibrationParams& p,
                          double h) {
  Matrix2 out{};
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) {
      CalibrationParams plus = p;
      CalibrationParams minus = p;
      plus.w_mrf[a][c] += h;
      minus.w_mrf[a][c] -= h;
      out[a][c] = (mean_loss(batch, spec, plus) - mean_loss(batch, spec, minus)) / (2.0 * h);
    }
  }
  return out;
}

double relative_error(const Matrix2& g, const Matrix2& fd) {
  double diff = 0.0;
  double norm = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) {
      diff += (g[a][c] - fd[a][c]) * (g[a][c] - fd[a][c]);
      norm += fd[a][c] * fd[a][c];
    }
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-7);
}

}  // namespace

TEST_CASE("binary cross-entropy") {
  CHECK(bce_loss(0.5, 1) == Approx(0.693147).epsilon(1e-6));
  CHECK(bce_loss(1.0, 1) == Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(bce_loss(0.9, 0) == Approx(2.302585).epsilon(1e-6));
  CHECK(std::isfinite(bce_loss(0.0, 1)));
  CHECK(bce_loss(0.0, 1) == Approx(-std::log(kBceClip)));
}

TEST_CASE("training prediction squashes multi-sample scores only") {
  CalibratedScore s;
  s.raw = 0.7;
  CHECK(training_prediction(s, DetectorKind::kLikelihood) == 0.7);
  CHECK(training_prediction(s, DetectorKind::kDetectGpt) == Approx(1.0 / (1.0 + std::exp(-0.7))));
}

TEST_CASE("analytic gradient matches central finite differences for every detector") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.2, 1.5);
  std::uniform_int_distribution<int> steps(1, 5);
  for (int trial = 0; trial < 18; ++trial) {
    const auto kind = static_cast<DetectorKind>(trial % 6);
    const auto spec = DetectorSpec::for_kind(kind);
    const auto batch = random_batch(rng, 4, 16, 3);
    CalibrationParams p;
    p.w_mrf = {{{u(rng), u(rng)}, {u(rng), u(rng)}}};
    p.iterations = steps(rng);
    p.use_positional = trial % 3 != 0;
    p.t0 = u(rng) * 4.0;
    if (trial % 2 == 0) p.normalization = fit_normalization(batch, spec, 0.1);
    const auto g = loss_and_grad(batch, spec, p).grad;
    const auto fd = finite_difference(batch, spec, p, 1e-5);
    INFO("kind " << to_string(kind) << " trial " << trial);
    CHECK(relative_error(g, fd) < 1e-4);
  }
}

TEST_CASE("gradient with uncalibrated aux samples") {
  std::mt19937_64 rng(18);
  for (auto kind : {DetectorKind::kDetectGpt, DetectorKind::kDnaGpt}) {
    const auto spec = DetectorSpec::for_kind(kind);
    const auto batch = random_batch(rng, 3, 12, 3);
    CalibrationParams p;
    p.calibrate_aux = false;
    p.iterations = 3;
    p.t0 = 2.0;
    const auto g = loss_and_grad(batch, spec, p).grad;
    CHECK(relative_error(g, finite_difference(batch, spec, p, 1e-5)) < 1e-4);
  }
}

TEST_CASE("gradient vanishes where the loss is flat in W") {
  auto seq = make_sequence("u", Label::kMachine, {-1.0, -2.0, -2.0, -2.0, -2.0});
  const auto spec = DetectorSpec::for_kind(DetectorKind::kLikelihood);
  CalibrationParams p;
  const Dataset batch{seq};
  const auto g = loss_and_grad(batch, spec, p).grad;
  for (const auto& row : g) {
    for (double v : row) CHECK(std::abs(v) < 1e-8);
  }
}

TEST_CASE("unlabelled items are rejected") {
  const Dataset batch{make_sequence("u", std::nullopt, {-1.0, -2.0, -3.0})};
  CHECK_THROWS_AS(loss_and_grad(batch, DetectorSpec::for_kind(DetectorKind::kLikelihood), CalibrationParams{}),
                  InvalidArgument);
}

TEST_CASE("projected step keeps W non-negative and pins entries pushed below zero") {
  std::mt19937_64 rng(19);
  const auto batch = random_batch(rng, 12, 30, 0);
  const auto spec = DetectorSpec::for_kind(DetectorKind::kLikelihood);
  CalibrationParams p0;
  p0.t0 = 3.0;
  p0.normalization = fit_normalization(batch, spec, 0.1);
  TrainConfig cfg;
  cfg.w_init = {{{0.0, 0.0}, {0.0, 0.0}}};
  cfg.epochs = 1;
  CalibrationParams at_zero = p0;
  at_zero.w_mrf = cfg.w_init;
  const auto g = loss_and_grad(batch, spec, at_zero).grad;
  const auto trained = train(batch, cfg, spec, p0).params.w_mrf;
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) {
      CHECK(trained[a][c] >= 0.0);
      if (g[a][c] > 0.0) {
        CHECK(trained[a][c] == 0.0);
      } else {
        CHECK(trained[a][c] == Approx(-cfg.learning_rate * g[a][c]));
      }
    }
  }
  cfg.epochs = 10;
  cfg.w_init = {{{0.5, 0.5}, {0.5, 0.5}}};
  cfg.learning_rate = 5.0;
  for (const auto& row : train(batch, cfg, spec, p0).params.w_mrf) {
    for (double v : row) CHECK(v >= 0.0);
  }
}

TEST_CASE("training is deterministic, also across thread counts and mini-batches") {
  std::mt19937_64 rng(20);
  const auto batch = random_batch(rng, 20, 25, 2);
  for (auto kind : {DetectorKind::kLikelihood, DetectorKind::kFastDetectGpt}) {
    const auto spec = DetectorSpec::for_kind(kind);
    CalibrationParams p0;
    p0.t0 = 4.0;
    TrainConfig cfg;
    cfg.batch = 6;
    const auto a = train(batch, cfg, spec, p0);
    const auto b = train(batch, cfg, spec, p0);
    cfg.threads = 4;
    const auto c = train(batch, cfg, spec, p0);
    CHECK(a.params.w_mrf == b.params.w_mrf);
    CHECK(a.params.w_mrf == c.params.w_mrf);
    CHECK(a.loss_history == c.loss_history);
    CHECK(a.loss_history.size() == 10);
  }
}

TEST_CASE("loss decreases on a dataset the unary already separates") {
  std::mt19937_64 rng(21);
  Dataset data;
  for (int i = 0; i < 20; ++i) {
    const bool machine = i % 2 == 0;
    data.push_back(make_sequence("s" + std::to_string(i), machine ? Label::kMachine : Label::kHuman,
                                 testing::random_logprob(rng, 40, machine ? -0.8 : -4.0)));
  }
  const auto spec = DetectorSpec::for_kind(DetectorKind::kLikelihood);
  CalibrationParams p0;
  p0.t0 = 3.0;
  p0.normalization = fit_normalization(data, spec, 0.0);
  const auto result = train(data, TrainConfig{}, spec, p0);
  double best = result.loss_history.front();
  for (double l : result.loss_history) {
    CHECK(l <= best + 1e-12);
    best = std::min(best, l);
  }
  CHECK(result.loss_history.back() < result.loss_history.front());
}

TEST_CASE("train rejects empty data and bad settings") {
  const auto spec = DetectorSpec::for_kind(DetectorKind::kLikelihood);
  CHECK_THROWS_AS(train(Dataset{}, TrainConfig{}, spec, CalibrationParams{}), InvalidArgument);
  const Dataset one{make_sequence("a", Label::kHuman, {-1.0, -2.0})};
  TrainConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(one, bad, spec, CalibrationParams{}), InvalidArgument);
  bad = TrainConfig{};
  bad.epochs = 0;
  CHECK_THROWS_AS(train(one, bad, spec, CalibrationParams{}), InvalidArgument);
}
