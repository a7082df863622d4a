#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skilleval/action_unit.hpp"
#include "skilleval/config.hpp"
#include "skilleval/dataset.hpp"
#include "skilleval/encoding.hpp"
#include "skilleval/errors.hpp"
#include "skilleval/evaluation.hpp"
#include "skilleval/lstm.hpp"
#include "skilleval/pipeline.hpp"
#include "skilleval/rng.hpp"
#include "skilleval/siamese.hpp"
#include "skilleval/tensor_io.hpp"

namespace {

using namespace skilleval;

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::string seed;
  std::string data_dir;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts* opts, bool with_dirs = true) {
  cmd->add_option("--config", opts->config_file, "Config file (key = value lines)");
  cmd->add_option("--set", opts->overrides, "Override one config key, e.g. --set au_epochs=10")
      ->take_all();
  cmd->add_option("--seed", opts->seed, "Master seed (overrides config)");
  if (with_dirs) {
    cmd->add_option("--data-dir", opts->data_dir, "Dataset directory");
    cmd->add_option("--out-dir", opts->out_dir, "Run directory for checkpoints and reports");
  }
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_file.empty()) cfg = load_config(opts.config_file, cfg);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.seed.empty()) apply_override(cfg, "seed", opts.seed);
  if (!opts.data_dir.empty()) cfg.data_dir = opts.data_dir;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

std::filesystem::path require_dir(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ConfigError(flag + " is required");
  return value;
}

void echo_config(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_config(cfg, dir / "config.effective");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

int cmd_gen(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  validate_config(cfg);
  const std::filesystem::path dir = require_dir(cfg.data_dir.empty() ? cfg.out_dir : cfg.data_dir,
                                                "--out-dir (or data_dir)");
  const Dataset dataset = generate_dataset(gen_config(cfg));
  write_dataset(dataset, dir);
  echo_config(cfg, dir);
  std::cout << "videos=" << group_videos(dataset).size() << " segments=" << dataset.segments.size()
            << "\n";
  std::cout << "dataset_hash=" << hex64(dataset_dir_hash(dir)) << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& stage, int fold) {
  RunConfig cfg = resolve_config(opts);
  validate_config(cfg);
  const std::filesystem::path data = require_dir(cfg.data_dir, "--data-dir");
  const std::filesystem::path out = require_dir(cfg.out_dir, "--out-dir");
  const Dataset dataset = read_dataset(data);
  echo_config(cfg, out);

  std::vector<int> folds;
  if (fold >= 0) {
    folds.push_back(fold);
  } else {
    for (int f = 0; f < kFoldCount; ++f) folds.push_back(f);
  }
  for (int f : folds) {
    if (stage == "encoder") {
      run_encoder_stage(dataset, cfg, f, out);
    } else if (stage == "au") {
      run_au_stage(dataset, cfg, f, out);
    } else if (stage == "siamese") {
      run_siamese_stage(dataset, cfg, f, out);
    } else {
      throw ConfigError("unknown stage '" + stage + "'; valid stages: encoder, au, siamese");
    }
    std::cout << "stage=" << stage << " fold=" << f << " ok\n";
  }
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& method) {
  RunConfig cfg = resolve_config(opts);
  validate_config(cfg);
  const std::filesystem::path data = require_dir(cfg.data_dir, "--data-dir");
  const std::filesystem::path out = require_dir(cfg.out_dir, "--out-dir");
  const Dataset dataset = read_dataset(data);
  echo_config(cfg, out);

  const EvalReport report = evaluate_all(dataset, cfg, out, method);
  std::cout << "mean_auc=" << format_double(report.mean_auc) << "\n";
  std::cout << "mean_accuracy=" << format_double(report.mean_accuracy) << "\n";
  std::cout << "pooled_auc=" << format_double(report.pooled_auc) << "\n";
  return 0;
}

int cmd_dump_hidden(const CommonOpts& opts, int fold, int segment, std::vector<int> cells,
                    std::string out_file) {
  RunConfig cfg = resolve_config(opts);
  validate_config(cfg);
  const std::filesystem::path data = require_dir(cfg.data_dir, "--data-dir");
  const std::filesystem::path out = require_dir(cfg.out_dir, "--out-dir");
  const Dataset dataset = read_dataset(data);

  if (segment < 0 || segment >= static_cast<int>(dataset.segments.size())) {
    throw ConfigError("segment index " + std::to_string(segment) + " out of range [0, " +
                      std::to_string(dataset.segments.size()) + ")");
  }
  const StagePaths paths = stage_paths(out, fold);
  if (!std::filesystem::exists(paths.encoder)) {
    throw ConfigError("encoder checkpoint missing for fold " + std::to_string(fold) + ": " +
                      paths.encoder.string());
  }
  if (!std::filesystem::exists(paths.au_checkpoint)) {
    throw ConfigError("classifier checkpoint missing for fold " + std::to_string(fold) + ": " +
                      paths.au_checkpoint.string());
  }
  const FvEncoder enc = load_encoder(paths.encoder);
  const AuNetwork net = load_au_network(paths.au_checkpoint);
  const Eigen::MatrixXd encoded = encode_sequence(
      enc.pca, enc.gmm, strided_frames(dataset.segments[segment].frames, cfg.frame_stride));
  const std::string csv = dump_hidden_states(net, encoded, cells);

  if (out_file.empty()) {
    out_file = (out / ("hidden_fold" + std::to_string(fold) + "_seg" + std::to_string(segment) +
                       ".csv"))
                   .string();
  }
  std::ofstream file(out_file, std::ios::trunc);
  if (!file) throw FormatError("cannot write " + out_file);
  file << csv;
  std::cout << "wrote " << out_file << "\n";
  return 0;
}

// ---- selftest ----------------------------------------------------------

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

bool check_line(const std::string& name, bool ok, const std::string& detail) {
  std::cout << "check " << name << ": " << (ok ? "ok" : "FAIL") << " (" << detail << ")\n";
  return ok;
}

bool selftest_lstm_grad() {
  LstmStack net = make_lstm(6, 5, 2, 42);
  Rng rng(derive_seed(42, "selftest-lstm"));
  const Eigen::MatrixXd seq = random_matrix(7, 6, rng);
  const Eigen::MatrixXd weights = random_matrix(7, 5, rng);

  LstmCache cache = lstm_forward(net, seq);
  LstmGradients grads = lstm_backward(net, cache, weights);
  auto loss = [&]() {
    return (lstm_forward(net, seq).hidden().array() * weights.array()).sum();
  };
  const GradCheckReport report =
      grad_check(loss, param_views(net), param_views(grads), 1e-5);
  return check_line("lstm_gradients", report.pass(1e-4),
                    "max rel err " + format_double(report.max_rel_err) + " over " +
                        std::to_string(report.entries_checked) + " entries");
}

bool selftest_classifier_grad(bool corrupt) {
  AuNetwork net = make_au_network(6, 5, 2, 3, 7);
  Rng rng(derive_seed(7, "selftest-au"));
  const Eigen::MatrixXd a = random_matrix(7, 6, rng);
  const Eigen::MatrixXd b = random_matrix(4, 6, rng);
  const std::vector<AuSample> batch = {{&a, 0}, {&b, 2}};

  AuGradients grads;
  au_loss(net, batch, &grads);
  if (corrupt) grads.head_b(0) += 0.01;

  auto loss = [&]() { return au_loss(net, batch); };
  const GradCheckReport report = grad_check(loss, param_views(net), grad_views(grads), 1e-5);
  return check_line("classification_loss_gradients", report.pass(1e-4),
                    "max rel err " + format_double(report.max_rel_err) + " over " +
                        std::to_string(report.entries_checked) + " entries");
}

bool selftest_pair_grad() {
  LstmStack net = make_lstm(6, 5, 2, 9);
  Rng rng(derive_seed(9, "selftest-pair"));
  const Eigen::MatrixXd inst_pos = random_matrix(4, 6, rng);
  const Eigen::MatrixXd user_pos = random_matrix(3, 6, rng);
  const Eigen::MatrixXd inst_neg = random_matrix(5, 6, rng);
  const Eigen::MatrixXd user_neg = random_matrix(2, 6, rng);
  const double margin = 2.0;  // far above toy-net distances, hinge active but not at its corner

  LstmGradients grads = zero_gradients(net);
  LstmGradients g;
  siamese_pair_loss(net, inst_pos, user_pos, 1, margin, PositiveTermForm::paper_linear, &g);
  add_gradients(grads, g);
  siamese_pair_loss(net, inst_neg, user_neg, 0, margin, PositiveTermForm::paper_linear, &g);
  add_gradients(grads, g);

  auto loss = [&]() {
    return siamese_pair_loss(net, inst_pos, user_pos, 1, margin, PositiveTermForm::paper_linear)
               .loss +
           siamese_pair_loss(net, inst_neg, user_neg, 0, margin, PositiveTermForm::paper_linear)
               .loss;
  };
  const GradCheckReport report = grad_check(loss, param_views(net), param_views(grads), 1e-5);
  return check_line("pair_loss_gradients", report.pass(1e-4),
                    "max rel err " + format_double(report.max_rel_err) + " over " +
                        std::to_string(report.entries_checked) + " entries");
}

bool selftest_fv_hand_case() {
  GmmModel gmm;
  gmm.weights = Eigen::Vector2d(0.3, 0.7);
  gmm.means = Eigen::MatrixXd(2, 1);
  gmm.means << 0.0, 2.0;
  gmm.variances = Eigen::MatrixXd(2, 1);
  gmm.variances << 1.0, 4.0;
  Eigen::VectorXd x(1);
  x << 1.0;

  // Scalar recomputation of the two-component, one-dimensional case.
  const double l1 = std::log(0.3) - 0.5 * (std::log(2.0 * M_PI) + std::log(1.0) + 1.0);
  const double l2 = std::log(0.7) - 0.5 * (std::log(2.0 * M_PI) + std::log(4.0) + 0.25);
  const double m = std::max(l1, l2);
  const double z = std::exp(l1 - m) + std::exp(l2 - m);
  const double g1 = std::exp(l1 - m) / z;
  const double g2 = std::exp(l2 - m) / z;
  const double u1 = 1.0;
  const double u2 = -0.5;
  Eigen::Vector4d expected(g1 * u1 / std::sqrt(0.3), g2 * u2 / std::sqrt(0.7),
                           g1 * (u1 * u1 - 1.0) / std::sqrt(0.6),
                           g2 * (u2 * u2 - 1.0) / std::sqrt(1.4));
  for (int i = 0; i < 4; ++i) {
    expected(i) = (expected(i) < 0 ? -1.0 : 1.0) * std::sqrt(std::abs(expected(i)));
  }
  expected /= expected.norm();

  const Eigen::VectorXd fv = encode_fv(gmm, x);
  const double err = (fv - expected).cwiseAbs().maxCoeff();
  const double norm_err = std::abs(fv.norm() - 1.0);
  return check_line("fv_hand_case", err <= 1e-9 && norm_err <= 1e-9,
                    "max abs err " + format_double(err));
}

bool selftest_auc_oracle() {
  Rng rng(derive_seed(1234, "selftest-auc"));
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(199));
    std::vector<ScoredPair> scored;
    scored.reserve(n);
    for (int i = 0; i < n; ++i) {
      ScoredPair s;
      s.inst_id = i;
      s.user_id = i + 1;
      s.label = static_cast<int>(rng.uniform_int(2));
      // Quantized scores so ties actually occur.
      s.score = static_cast<double>(rng.uniform_int(21)) / 10.0 - 1.0;
      scored.push_back(s);
    }
    // Force both classes.
    scored[0].label = 1;
    scored[n - 1].label = 0;

    long long num2 = 0;
    long long pos = 0;
    long long neg = 0;
    for (const ScoredPair& p : scored) (p.label == 1 ? pos : neg) += 1;
    for (const ScoredPair& p : scored) {
      if (p.label != 1) continue;
      for (const ScoredPair& q : scored) {
        if (q.label != 0) continue;
        if (p.score > q.score) num2 += 2;
        if (p.score == q.score) num2 += 1;
      }
    }
    const RocCurve curve = roc_auc(scored);
    if (curve.concordant_x2 != num2 || curve.positives != pos || curve.negatives != neg) {
      return check_line("auc_oracle", false, "mismatch at trial " + std::to_string(trial));
    }
  }
  return check_line("auc_oracle", true, "50 randomized score sets, exact match");
}

int cmd_selftest(bool corrupt) {
  bool ok = true;
  ok &= selftest_lstm_grad();
  ok &= selftest_classifier_grad(corrupt);
  ok &= selftest_pair_grad();
  ok &= selftest_fv_hand_case();
  ok &= selftest_auc_oracle();
  std::cout << (ok ? "selftest: all checks passed" : "selftest: FAILURES") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    CLI::App app{"Two-stage skill evaluation: frame encoding, segment classification, "
                 "pair metric learning"};
    app.require_subcommand(1);
    int rc = 0;

    CommonOpts gen_opts;
    CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    add_common(gen, &gen_opts);
    gen->callback([&]() { rc = cmd_gen(gen_opts); });

    CommonOpts train_opts;
    std::string stage;
    int train_fold = -1;
    CLI::App* train = app.add_subcommand("train", "Train one pipeline stage");
    add_common(train, &train_opts);
    train->add_option("--stage", stage, "encoder, au, or siamese")->required();
    train->add_option("--fold", train_fold, "Single fold (default: all folds)");
    train->callback([&]() { rc = cmd_train(train_opts, stage, train_fold); });

    CommonOpts eval_opts;
    std::string method;
    CLI::App* eval = app.add_subcommand("eval", "Score held-out pairs and write the report");
    add_common(eval, &eval_opts);
    eval->add_option("--method", method, "siamese or cosine_baseline")->required();
    eval->callback([&]() { rc = cmd_eval(eval_opts, method); });

    CommonOpts dump_opts;
    int dump_fold = 0;
    int dump_segment = 0;
    std::vector<int> cells = {0};
    std::string dump_out;
    CLI::App* dump = app.add_subcommand("dump-hidden", "CSV trace of hidden units over time");
    add_common(dump, &dump_opts);
    dump->add_option("--fold", dump_fold, "Fold whose checkpoints to use");
    dump->add_option("--segment", dump_segment, "Segment index in the dataset")->required();
    dump->add_option("--cells", cells, "Hidden unit indices")->delimiter(',');
    dump->add_option("--out", dump_out, "Output CSV path");
    dump->callback(
        [&]() { rc = cmd_dump_hidden(dump_opts, dump_fold, dump_segment, cells, dump_out); });

    bool corrupt = false;
    CLI::App* selftest = app.add_subcommand("selftest", "Gradient and oracle checks");
    selftest->add_flag("--corrupt-gradient", corrupt,
                       "Deliberately corrupt one analytic gradient (must fail)");
    selftest->callback([&]() { rc = cmd_selftest(corrupt); });

    CLI11_PARSE(app, argc, argv);
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
