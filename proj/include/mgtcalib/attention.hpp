#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mgtcalib/types.hpp"

namespace mgtcalib {

class ZeroVector : public Error {
 public:
  using Error::Error;
};

/// Single-layer, single-head transformer with a residual two-layer MLP
/// F(x) = x + W2 relu(W1 x). Embeddings are row vectors.
struct ToyTransformer {
  Eigen::MatrixXd w_q, w_k, w_v, w_o;
  Eigen::MatrixXd w_1;  // hidden x d
  Eigen::MatrixXd w_2;  // d x hidden

  std::size_t dim() const { return static_cast<std::size_t>(w_q.rows()); }
  /// W_V W_O W_Q W_K^T.
  Eigen::MatrixXd coupling() const;
};

/// Largest singular value.
double spectral_norm(const Eigen::MatrixXd& m);

struct StepResult {
  Eigen::VectorXd alpha;   // weights over x_1 .. x_{t-1}
  Eigen::RowVectorXd a;    // attention output a_t
  Eigen::RowVectorXd next; // x_{t+1} = F(a_t) / |F(a_t)|
};

/// One generation step with query x_t = last row of `x` (t = rows >= 2):
/// alpha = softmax(x_t W_Q W_K^T X_{t-1}^T / t), a_t = alpha X_{t-1} W_V W_O.
/// Throws ZeroVector when F(a_t) vanishes.
StepResult simulate_step(const Eigen::MatrixXd& x, const ToyTransformer& model);

/// Index convention for C_j and eta. kProof divides both by (t + 1);
/// kStatement divides C_j by t and eta by (t + 1).
enum class BoundConvention { kProof, kStatement };

struct BoundPair {
  double lower = 0.0;
  double upper = 0.0;
};

/// Softmax-form bounds on alpha_{t+1, ell}: the ell logit C_ell alpha_ell is
/// shifted by +eta (upper) or -eta (lower), every other logit the opposite way.
BoundPair theorem_bounds(const Eigen::VectorXd& alpha_t, const Eigen::VectorXd& c,
                         double eta, std::size_t ell);

/// One simulated transition t -> t + 1 and the quantities the bounds need.
struct Transition {
  std::size_t t = 0;
  Eigen::MatrixXd x;           // rows x_1 .. x_t
  StepResult step;             // attention at step t
  Eigen::VectorXd alpha_next;  // attention at step t + 1, over x_1 .. x_t
  Eigen::VectorXd self_coupling;  // x_j W x_j^T
};

Transition simulate_transition(const Eigen::MatrixXd& x, const ToyTransformer& model);

/// Positions ell (0-based) meeting the hypotheses: unit-norm embeddings,
/// a_t x_{t+1}^T >= (1 - delta) |a_t| with delta <= (c eps / prod lambda)^2,
/// x_ell W x_ell^T >= c, and x_ell W x_ell^T >= |x_j W x_ell^T| / eps for
/// every other j.
std::vector<std::size_t> check_preconditions(const Transition& tr, const ToyTransformer& model,
                                             double c, double eps);

/// C_j and eta for position ell under `convention`.
struct BoundCoefficients {
  Eigen::VectorXd c;
  double eta = 0.0;
};
BoundCoefficients bound_coefficients(const Transition& tr, std::size_t ell, double eps,
                                     BoundConvention convention);

struct SamplerConfig {
  std::size_t dim = 32;
  std::size_t min_t = 3;
  std::size_t max_t = 12;
  /// Scale of W_Q W_K^T, which is close to kappa * I.
  double kappa = 4.0;
  /// Entry-wise noise added to every attention matrix.
  double weight_noise = 0.02;
  /// Noise added to the orthonormal prompt rows before re-normalizing.
  double embedding_noise = 0.02;
  std::size_t mlp_hidden = 16;
  double mlp_scale = 0.01;
  double c = 1.0;
  double eps = 0.1;
};

struct MarginRecord {
  std::size_t trial = 0;
  std::size_t t = 0;
  std::size_t ell = 0;
  BoundConvention convention = BoundConvention::kProof;
  double lower = 0.0;
  double simulated = 0.0;
  double upper = 0.0;
};

struct ConventionSummary {
  std::size_t violations = 0;
  double min_margin = 0.0;   // min(simulated - lower, upper - simulated)
  double mean_width = 0.0;   // mean(upper - lower)
};

struct VerifyReport {
  std::size_t trials = 0;
  std::size_t rejected_trials = 0;
  std::size_t eligible = 0;
  double tolerance = 1e-8;
  ConventionSummary proof;
  ConventionSummary statement;
  std::vector<MarginRecord> margins;
};

/// Samples models and prompts, simulates one transition per trial, and checks
/// the bounds on every eligible position. Deterministic per seed.
VerifyReport verify_bounds(std::size_t n_trials, std::uint64_t seed,
                           const SamplerConfig& config = {}, unsigned threads = 1);

std::string to_text(const VerifyReport& report);
std::string margins_csv(const VerifyReport& report);

}  // namespace mgtcalib
