#include "mgtcalib/attention.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "mgtcalib/parallel.hpp"

namespace mgtcalib {

Eigen::MatrixXd ToyTransformer::coupling() const { return w_v * w_o * w_q * w_k.transpose(); }

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

namespace {

/// softmax(query W_Q W_K^T keys^T / scale).
Eigen::VectorXd attention(const Eigen::RowVectorXd& query, const Eigen::MatrixXd& keys,
                          const ToyTransformer& model, double scale) {
  const Eigen::VectorXd logits =
      (query * model.w_q * model.w_k.transpose() * keys.transpose()).transpose() / scale;
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

}  // namespace

StepResult simulate_step(const Eigen::MatrixXd& x, const ToyTransformer& model) {
  const auto t = static_cast<std::size_t>(x.rows());
  if (t < 2) throw InvalidArgument("simulate_step needs at least 2 embeddings");
  if (static_cast<std::size_t>(x.cols()) != model.dim()) {
    throw ShapeMismatch("embedding width does not match the model");
  }
  const Eigen::MatrixXd keys = x.topRows(static_cast<Eigen::Index>(t - 1));
  StepResult out;
  out.alpha = attention(x.row(static_cast<Eigen::Index>(t - 1)), keys, model, static_cast<double>(t));
  out.a = out.alpha.transpose() * keys * model.w_v * model.w_o;
  const Eigen::VectorXd hidden = (model.w_1 * out.a.transpose()).cwiseMax(0.0);
  const Eigen::RowVectorXd f = out.a + (model.w_2 * hidden).transpose();
  const double norm = f.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ZeroVector("MLP output has zero norm");
  out.next = f / norm;
  return out;
}

BoundPair theorem_bounds(const Eigen::VectorXd& alpha_t, const Eigen::VectorXd& c, double eta,
                         std::size_t ell) {
  if (alpha_t.size() != c.size()) throw ShapeMismatch("alpha and C differ in length");
  if (ell >= static_cast<std::size_t>(alpha_t.size())) throw InvalidArgument("ell out of range");
  const Eigen::VectorXd z = c.cwiseProduct(alpha_t);
  const auto l = static_cast<Eigen::Index>(ell);
  const auto bound = [&](double sign) {
    Eigen::VectorXd shifted = z.array() - sign * eta;
    shifted(l) = z(l) + sign * eta;
    return std::exp(shifted(l) - log_sum_exp(shifted));
  };
  return BoundPair{bound(-1.0), bound(1.0)};
}

Transition simulate_transition(const Eigen::MatrixXd& x, const ToyTransformer& model) {
  Transition tr;
  tr.t = static_cast<std::size_t>(x.rows());
  tr.x = x;
  tr.step = simulate_step(x, model);
  tr.alpha_next = attention(tr.step.next, x, model, static_cast<double>(tr.t + 1));
  const Eigen::MatrixXd w = model.coupling();
  tr.self_coupling = (x * w).cwiseProduct(x).rowwise().sum();
  return tr;
}

std::vector<std::size_t> check_preconditions(const Transition& tr, const ToyTransformer& model,
                                             double c, double eps) {
  constexpr double kUnitTol = 1e-9;
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < tr.x.rows(); ++j) {
    if (std::abs(tr.x.row(j).norm() - 1.0) > kUnitTol) return out;
  }
  if (std::abs(tr.step.next.norm() - 1.0) > kUnitTol) return out;

  const double a_norm = tr.step.a.norm();
  if (!(a_norm > 0.0)) return out;
  const double delta = 1.0 - tr.step.a.dot(tr.step.next) / a_norm;
  const double lambdas = spectral_norm(model.w_q) * spectral_norm(model.w_k) *
                         spectral_norm(model.w_v) * spectral_norm(model.w_o);
  const double delta_max = std::pow(c * eps / lambdas, 2);
  if (delta > delta_max) return out;

  const Eigen::MatrixXd cross = tr.x * model.coupling() * tr.x.transpose();  // (j, ell)
  for (std::size_t ell = 0; ell < tr.t; ++ell) {
    const auto l = static_cast<Eigen::Index>(ell);
    const double self = cross(l, l);
    if (self < c) continue;
    bool dominant = true;
    for (Eigen::Index j = 0; j < cross.rows() && dominant; ++j) {
      if (j != l && !(self > std::abs(cross(j, l)) / eps)) dominant = false;
    }
    if (dominant) out.push_back(ell);
  }
  return out;
}

BoundCoefficients bound_coefficients(const Transition& tr, std::size_t ell, double eps,
                                     BoundConvention convention) {
  const double t = static_cast<double>(tr.t);
  const double a_norm = tr.step.a.norm();
  const double c_den = convention == BoundConvention::kProof ? t + 1.0 : t;
  BoundCoefficients out;
  out.c = tr.self_coupling / (c_den * a_norm);
  out.eta = (1.0 + std::sqrt(2.0)) * eps * tr.self_coupling(static_cast<Eigen::Index>(ell)) /
            ((t + 1.0) * a_norm);
  return out;
}

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = n(rng);
  }
  return m;
}

ToyTransformer sample_model(std::mt19937_64& rng, const SamplerConfig& cfg) {
  const std::size_t d = cfg.dim;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  const auto near_identity = [&](double scale) {
    return Eigen::MatrixXd(scale * (id + cfg.weight_noise * gaussian(rng, d, d)));
  };
  ToyTransformer m;
  m.w_q = near_identity(std::sqrt(cfg.kappa));
  m.w_k = near_identity(std::sqrt(cfg.kappa));
  m.w_v = near_identity(1.0);
  m.w_o = near_identity(1.0);
  m.w_1 = cfg.mlp_scale * gaussian(rng, cfg.mlp_hidden, d);
  m.w_2 = cfg.mlp_scale * gaussian(rng, d, cfg.mlp_hidden);
  return m;
}

Eigen::MatrixXd sample_prompt(std::mt19937_64& rng, std::size_t t, const SamplerConfig& cfg) {
  const Eigen::MatrixXd g = gaussian(rng, cfg.dim, t);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cfg.dim, t);
  Eigen::MatrixXd x = q.transpose() + cfg.embedding_noise * gaussian(rng, t, cfg.dim);
  x.rowwise().normalize();
  return x;
}

struct TrialResult {
  bool rejected = false;
  std::vector<MarginRecord> records;
};

TrialResult run_trial(std::size_t trial, std::uint64_t seed, const SamplerConfig& cfg) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  const std::size_t t = std::uniform_int_distribution<std::size_t>(cfg.min_t, cfg.max_t)(rng);
  const ToyTransformer model = sample_model(rng, cfg);
  const Eigen::MatrixXd x = sample_prompt(rng, t, cfg);

  TrialResult out;
  Transition tr;
  try {
    tr = simulate_transition(x, model);
  } catch (const ZeroVector&) {
    out.rejected = true;
    return out;
  }
  Eigen::VectorXd alpha_t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t));
  alpha_t.head(static_cast<Eigen::Index>(t - 1)) = tr.step.alpha;

  for (std::size_t ell : check_preconditions(tr, model, cfg.c, cfg.eps)) {
    for (auto conv : {BoundConvention::kProof, BoundConvention::kStatement}) {
      const auto coef = bound_coefficients(tr, ell, cfg.eps, conv);
      const auto b = theorem_bounds(alpha_t, coef.c, coef.eta, ell);
      out.records.push_back(MarginRecord{trial, t, ell, conv, b.lower,
                                         tr.alpha_next(static_cast<Eigen::Index>(ell)), b.upper});
    }
  }
  return out;
}

void summarize(ConventionSummary& s, const MarginRecord& r, double tol, std::size_t& n) {
  const double margin = std::min(r.simulated - r.lower, r.upper - r.simulated);
  if (margin < -tol) ++s.violations;
  s.min_margin = n == 0 ? margin : std::min(s.min_margin, margin);
  s.mean_width += r.upper - r.lower;
  ++n;
}

}  // namespace

VerifyReport verify_bounds(std::size_t n_trials, std::uint64_t seed, const SamplerConfig& config,
                           unsigned threads) {
  if (n_trials < 1) throw InvalidArgument("need at least one trial");
  if (config.min_t < 2 || config.max_t < config.min_t || config.max_t > config.dim) {
    throw InvalidArgument("sampler needs 2 <= min_t <= max_t <= dim");
  }
  if (!(config.c > 0.0) || !(config.eps > 0.0)) throw InvalidArgument("c and eps must be positive");

  std::vector<TrialResult> results(n_trials);
  parallel_for(n_trials, threads, [&](std::size_t i) { results[i] = run_trial(i, seed, config); });

  VerifyReport report;
  report.trials = n_trials;
  std::size_t n_proof = 0;
  std::size_t n_statement = 0;
  for (auto& r : results) {
    if (r.rejected) ++report.rejected_trials;
    for (const auto& m : r.records) {
      if (m.convention == BoundConvention::kProof) {
        ++report.eligible;
        summarize(report.proof, m, report.tolerance, n_proof);
      } else {
        summarize(report.statement, m, report.tolerance, n_statement);
      }
      report.margins.push_back(m);
    }
  }
  if (n_proof > 0) report.proof.mean_width /= static_cast<double>(n_proof);
  if (n_statement > 0) report.statement.mean_width /= static_cast<double>(n_statement);
  return report;
}

std::string to_text(const VerifyReport& report) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "trials            " << report.trials << "\n";
  os << "rejected trials   " << report.rejected_trials << "\n";
  os << "eligible pairs    " << report.eligible << "\n";
  os << "tolerance         " << report.tolerance << "\n";
  const auto line = [&](const char* name, const ConventionSummary& s) {
    os << name << " violations " << s.violations << ", min margin " << s.min_margin
       << ", mean width " << s.mean_width << "\n";
  };
  line("proof (t+1)     ", report.proof);
  line("statement (t)   ", report.statement);
  return os.str();
}

std::string margins_csv(const VerifyReport& report) {
  std::ostringstream os;
  os << "trial,t,ell,convention,lower,simulated,upper\n";
  for (const auto& m : report.margins) {
    os << m.trial << "," << m.t << "," << m.ell + 1 << ","
       << (m.convention == BoundConvention::kProof ? "proof" : "statement") << "," << format_double(m.lower)
       << "," << format_double(m.simulated) << "," << format_double(m.upper) << "\n";
  }
  return os.str();
}

}  // namespace mgtcalib
