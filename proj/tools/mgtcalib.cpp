#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mgtcalib/analysis.hpp"
#include "mgtcalib/attention.hpp"
#include "mgtcalib/detectors.hpp"
#include "mgtcalib/evaluation.hpp"
#include "mgtcalib/experiment.hpp"
#include "mgtcalib/io.hpp"
#include "mgtcalib/mrf.hpp"
#include "mgtcalib/parallel.hpp"

using namespace mgtcalib;

namespace {

constexpr int kDataError = 1;
constexpr int kUsageError = 2;

/// Invalid flag combinations found after CLI11 parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

unsigned thread_count(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("MGTCALIB_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw UsageError("MGTCALIB_THREADS must be a positive integer");
  }
  return resolve_threads(0);
}

DetectorKind detector_from(const std::string& name) {
  const auto kind = parse_detector_kind(name);
  if (!kind) throw UsageError("unknown detector '" + name + "'");
  return *kind;
}

Dataset read_dataset(const std::string& path, bool lenient) {
  auto parsed = parse_scores(std::filesystem::path(path), ParseOptions{!lenient});
  for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
  return std::move(parsed.dataset);
}

/// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

struct Common {
  std::string scores;
  std::string detector;
  std::string config;
  bool lenient = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool detector_required) {
  cmd->add_option("--scores", c.scores, "JSONL score file")->required();
  auto* det = cmd->add_option("--detector", c.detector, "Detector kind");
  if (detector_required) det->required();
  cmd->add_option("--config", c.config, "Run configuration (JSON)");
  cmd->add_flag("--lenient", c.lenient, "Skip bad lines with a warning instead of failing");
  cmd->add_option("--threads", c.threads, "Worker threads (default: MGTCALIB_THREADS or all cores)");
}

RunConfig config_for(const Common& c) {
  return c.config.empty() ? RunConfig{} : load_config(c.config);
}

/// Detector kind from the flag and the config; both present must agree.
DetectorKind resolve_kind(const std::string& flag, const RunConfig& cfg) {
  if (!flag.empty()) {
    const DetectorKind k = detector_from(flag);
    if (cfg.kind && *cfg.kind != k) throw UsageError("--detector disagrees with the config file");
    return k;
  }
  if (cfg.kind) return *cfg.kind;
  throw UsageError("--detector is required");
}

std::string number(double v) { return format_double(v); }

// ---------------------------------------------------------------------------

int run_validate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  const auto scan = scan_scores(in);
  for (const auto& issue : scan.issues) {
    const char* kind = issue.kind == IssueKind::kMalformed   ? "malformed"
                       : issue.kind == IssueKind::kInvariant ? "invariant"
                                                             : "duplicate-id";
    std::cout << "line " << issue.line << ": " << kind << ": " << issue.detail << "\n";
  }
  std::cout << scan.dataset.size() << " valid records, " << scan.issues.size() << " problems\n";
  return scan.issues.empty() ? 0 : kDataError;
}

struct DetectArgs {
  Common common;
  std::string model;
  bool baseline = false;
  std::optional<double> epsilon;
  std::string out;
};

int run_detect(const DetectArgs& a) {
  const unsigned threads = thread_count(a.common.threads);
  if (a.model.empty() == !a.baseline) throw UsageError("give exactly one of --model or --baseline");
  std::optional<ModelFile> model;
  DetectorSpec spec;
  if (!a.model.empty()) {
    model = load_model(a.model);
    spec = model->spec;
    if (!a.common.detector.empty() && detector_from(a.common.detector) != spec.kind) {
      throw UsageError("--detector disagrees with the model file");
    }
  } else {
    const RunConfig cfg = config_for(a.common);
    spec = make_spec(resolve_kind(a.common.detector, cfg), cfg);
  }
  const std::optional<double> eps = a.epsilon ? a.epsilon : spec.threshold;
  const Dataset data = read_dataset(a.common.scores, a.common.lenient);

  std::vector<std::optional<double>> scores(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    try {
      scores[i] = model ? calibrated_detector_score(data[i], spec, model->params).raw
                        : oriented_baseline_score(data[i], spec);
    } catch (const DegenerateSpread&) {
      scores[i].reset();
    }
  });

  std::ostringstream os;
  os << "id,score,label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data[i].id << ",";
    if (!scores[i]) {
      os << "NA,skipped\n";
      continue;
    }
    os << number(*scores[i]) << ",";
    if (eps) os << (detect(*scores[i], *eps) == Label::kMachine ? "machine" : "human");
    os << "\n";
  }
  emit(a.out, os.str());
  return 0;
}

struct TrainArgs {
  Common common;
  std::string out;
  std::uint64_t seed = 1;
};

int run_train(const TrainArgs& a) {
  RunConfig cfg = config_for(a.common);
  cfg.train.threads = thread_count(a.common.threads);
  const DetectorSpec spec = make_spec(resolve_kind(a.common.detector, cfg), cfg);
  const Dataset data = read_dataset(a.common.scores, a.common.lenient);

  const auto split = split_dataset(data, a.seed);
  const Dataset train_set = select(data, split.train);
  const Dataset val_set = select(data, split.val);
  CalibrationParams params = cfg.params;
  params.normalization = fit_normalization(train_set, spec, cfg.train.normalization_trim);
  TrainConfig tc = cfg.train;
  tc.seed = a.seed;
  CalibrationParams initial = params;
  initial.w_mrf = tc.w_init;
  TrainResult result;
  if (params.use_mrf) {
    result = train(train_set, tc, spec, params);
  } else {
    result.params = initial;
  }
  const auto val0 = score_calibrated(val_set, spec, initial, tc.threads);
  const auto val1 = score_calibrated(val_set, spec, result.params, tc.threads);
  const double auc0 = auroc(val0.scores, val0.labels);
  const double auc1 = auroc(val1.scores, val1.labels);

  std::cout << std::setprecision(6);
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    std::cout << "epoch " << e + 1 << " loss " << result.loss_history[e] << "\n";
  }
  const auto& w = result.params.w_mrf;
  std::cout << "w_mrf " << w[0][0] << " " << w[0][1] << " " << w[1][0] << " " << w[1][1] << "\n";
  std::cout << "val AUROC initial " << auc0 << " trained " << auc1 << "\n";

  ModelFile model;
  model.spec = spec;
  model.params = result.params;
  model.provenance = {{"scores", a.common.scores},
                      {"seed", std::to_string(a.seed)},
                      {"n_train", std::to_string(train_set.size())},
                      {"n_val", std::to_string(val_set.size())},
                      {"learning_rate", number(tc.learning_rate)},
                      {"epochs", std::to_string(tc.epochs)},
                      {"final_loss", result.loss_history.empty() ? "" : number(result.loss_history.back())},
                      {"val_auroc_initial", number(auc0)},
                      {"val_auroc_trained", number(auc1)}};
  save_model(model, a.out);
  return 0;
}

struct EvaluateArgs {
  Common common;
  std::string model;
  std::uint64_t seed = 1;
  bool table = false;
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  const unsigned threads = thread_count(a.common.threads);
  std::optional<ModelFile> model;
  DetectorSpec spec;
  if (!a.model.empty()) {
    model = load_model(a.model);
    spec = model->spec;
    if (!a.common.detector.empty() && detector_from(a.common.detector) != spec.kind) {
      throw UsageError("--detector disagrees with the model file");
    }
  } else {
    const RunConfig cfg = config_for(a.common);
    spec = make_spec(resolve_kind(a.common.detector, cfg), cfg);
  }
  const Dataset data = read_dataset(a.common.scores, a.common.lenient);
  const auto split = split_dataset(data, a.seed);
  const Dataset test_set = select(data, split.test);
  const std::string name(to_string(spec.kind));

  std::vector<EvalReport> reports;
  reports.push_back(evaluate(score_baseline(test_set, spec, threads), name, "baseline", a.seed,
                             {{"detector", name}, {"split", "test"}}));
  if (model) {
    std::map<std::string, std::string> echo = {{"detector", name}, {"split", "test"}, {"model", a.model}};
    reports.push_back(evaluate(score_calibrated(test_set, spec, model->params, threads), name,
                               "calibrated", a.seed, echo));
  }
  std::string text;
  if (a.table) {
    text = to_table(reports);
  } else {
    for (const auto& r : reports) text += to_json_line(r) + "\n";
  }
  emit(a.out, text);
  return 0;
}

struct AnalyzeArgs {
  std::string scores;
  std::string channel = "logprob";
  std::size_t max_hop = 5;
  std::size_t bins = 20;
  std::string label;
  std::string out_prefix;
  bool lenient = false;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto channel = parse_score_channel(a.channel);
  if (!channel) throw UsageError("unknown channel '" + a.channel + "'");
  std::optional<Label> label;
  if (a.label == "human") {
    label = Label::kHuman;
  } else if (a.label == "machine") {
    label = Label::kMachine;
  } else if (!a.label.empty() && a.label != "all") {
    throw UsageError("--label must be human, machine or all");
  }
  if (a.max_hop < 1) throw UsageError("--max-hop must be at least 1");
  const Dataset data = read_dataset(a.scores, a.lenient);

  std::vector<HopDistance> hops;
  for (std::size_t k = 1; k <= a.max_hop; ++k) {
    const auto h = hop_distance(data, *channel, k, label);
    if (h.texts_skipped > 0) {
      std::cerr << "warning: hop " << k << " skipped " << h.texts_skipped << " short texts\n";
    }
    hops.push_back(h);
  }
  const auto bins = positional_instability(data, *channel, a.bins, label);
  if (a.out_prefix.empty()) {
    std::cout << hop_csv(hops) << "\n" << positional_csv(bins);
  } else {
    emit(a.out_prefix + "_hops.csv", hop_csv(hops));
    emit(a.out_prefix + "_positional.csv", positional_csv(bins));
  }
  return 0;
}

struct SynthArgs {
  std::string profile = "default";
  std::uint64_t seed = 1;
  std::string out;
  std::optional<std::size_t> n_texts;
};

int run_synth(const SynthArgs& a) {
  auto profile = named_profile(a.profile);
  if (!profile) throw UsageError("unknown profile '" + a.profile + "'");
  if (a.n_texts) profile->n_texts = *a.n_texts;
  std::ostringstream os;
  write_scores(synth_generate(*profile, a.seed), os);
  emit(a.out, os.str());
  return 0;
}

struct AttentionArgs {
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  std::string csv;
  SamplerConfig sampler;
  int threads = 0;
};

int run_attention(const AttentionArgs& a) {
  const auto report = verify_bounds(a.trials, a.seed, a.sampler, thread_count(a.threads));
  std::cout << to_text(report);
  if (!a.csv.empty()) emit(a.csv, margins_csv(report));
  return report.proof.violations == 0 ? 0 : kDataError;
}

struct AblateArgs {
  Common common;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

int run_ablate(const AblateArgs& a) {
  RunConfig cfg = config_for(a.common);
  cfg.train.threads = thread_count(a.common.threads);
  const DetectorSpec spec = make_spec(resolve_kind(a.common.detector, cfg), cfg);
  const Dataset data = read_dataset(a.common.scores, a.common.lenient);
  const auto rows = run_ablation(data, spec, cfg.params, cfg.train, a.seeds);
  std::cout << ablation_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Machine-generated text detection with Markov-informed score calibration"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a JSONL score file");
  validate->add_option("scores", validate_path, "JSONL score file")->required();

  DetectArgs detect_args;
  auto* detect_cmd = app.add_subcommand("detect", "Score every text");
  add_common(detect_cmd, detect_args.common, false);
  detect_cmd->add_option("--model", detect_args.model, "Trained model file");
  detect_cmd->add_flag("--baseline", detect_args.baseline, "Use the uncalibrated detector");
  detect_cmd->add_option("--epsilon", detect_args.epsilon, "Decision threshold (score > epsilon)");
  detect_cmd->add_option("--out", detect_args.out, "Output CSV (default stdout)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train W_mrf on the training split");
  add_common(train_cmd, train_args.common, false);
  train_cmd->add_option("--out", train_args.out, "Model file to write")->required();
  train_cmd->add_option("--seed", train_args.seed, "Split and shuffling seed");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Report metrics on the test split");
  add_common(eval_cmd, eval_args.common, false);
  eval_cmd->add_option("--model", eval_args.model, "Trained model file");
  eval_cmd->add_option("--seed", eval_args.seed, "Split seed");
  eval_cmd->add_flag("--table", eval_args.table, "Human-readable table instead of JSON lines");
  eval_cmd->add_option("--out", eval_args.out, "Output file (default stdout)");

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "Hop distances and positional instability");
  analyze_cmd->add_option("--scores", analyze_args.scores, "JSONL score file")->required();
  analyze_cmd->add_option("--channel", analyze_args.channel, "logprob, rank, logrank, entropy or prob");
  analyze_cmd->add_option("--max-hop", analyze_args.max_hop, "Largest hop distance");
  analyze_cmd->add_option("--bins", analyze_args.bins, "Positional bins");
  analyze_cmd->add_option("--label", analyze_args.label, "human, machine or all");
  analyze_cmd->add_option("--out-prefix", analyze_args.out_prefix,
                          "Write <prefix>_hops.csv and <prefix>_positional.csv");
  analyze_cmd->add_flag("--lenient", analyze_args.lenient, "Skip bad lines with a warning");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labelled score file");
  synth_cmd->add_option("--profile", synth_args.profile, "default, stationary, iid or multi");
  synth_cmd->add_option("--seed", synth_args.seed, "Generator seed");
  synth_cmd->add_option("--out", synth_args.out, "Output JSONL (default stdout)");
  synth_cmd->add_option("--n-texts", synth_args.n_texts, "Override the number of texts");

  AttentionArgs att_args;
  auto* att_cmd = app.add_subcommand("attention-verify", "Check the attention bounds numerically");
  att_cmd->add_option("--trials", att_args.trials, "Number of sampled trials");
  att_cmd->add_option("--seed", att_args.seed, "Sampler seed");
  att_cmd->add_option("--csv", att_args.csv, "Write per-pair margins");
  att_cmd->add_option("--c", att_args.sampler.c, "Self-coupling threshold c");
  att_cmd->add_option("--eps", att_args.sampler.eps, "Dominance constant epsilon");
  att_cmd->add_option("--kappa", att_args.sampler.kappa, "Scale of W_Q W_K^T");
  att_cmd->add_option("--threads", att_args.threads, "Worker threads");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare full, w/o Pos, w/o MRF and baseline");
  add_common(ablate_cmd, ablate_args.common, false);
  ablate_cmd->add_option("--seed", ablate_args.seeds, "Seeds (repeatable, default 1-5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*validate) return run_validate(validate_path);
    if (*detect_cmd) return run_detect(detect_args);
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_evaluate(eval_args);
    if (*analyze_cmd) return run_analyze(analyze_args);
    if (*synth_cmd) return run_synth(synth_args);
    if (*att_cmd) return run_attention(att_args);
    if (*ablate_cmd) return run_ablate(ablate_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}
