#include "skilleval/action_unit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "skilleval/errors.hpp"
#include "skilleval/rng.hpp"

namespace skilleval {
namespace {

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const Eigen::ArrayXd shifted = z.array() - z.maxCoeff();
  const Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

}  // namespace

AuNetwork make_au_network(Eigen::Index input_dim, Eigen::Index hidden_dim, int depth,
                          Eigen::Index n_classes, std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("classifier needs at least 2 classes");
  AuNetwork net;
  net.backbone = make_lstm(input_dim, hidden_dim, depth, derive_seed(seed, "au-backbone"));
  net.head_w.resize(n_classes, hidden_dim);
  Rng rng(derive_seed(seed, "au-head"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (Eigen::Index i = 0; i < net.head_w.size(); ++i) {
    net.head_w.data()[i] = rng.uniform(-scale, scale);
  }
  net.head_b = Eigen::VectorXd::Zero(n_classes);
  return net;
}

std::vector<TensorView> param_views(AuNetwork& net) {
  std::vector<TensorView> views = param_views(net.backbone);
  views.push_back(view_of("head.w", net.head_w));
  views.push_back(view_of("head.b", net.head_b));
  return views;
}

AuGradients zero_gradients(const AuNetwork& net) {
  AuGradients g;
  g.backbone = zero_gradients(net.backbone);
  g.head_w = Eigen::MatrixXd::Zero(net.head_w.rows(), net.head_w.cols());
  g.head_b = Eigen::VectorXd::Zero(net.head_b.size());
  return g;
}

std::vector<TensorView> grad_views(AuGradients& g) {
  std::vector<TensorView> views = param_views(g.backbone);
  views.push_back(view_of("head.w", g.head_w));
  views.push_back(view_of("head.b", g.head_b));
  return views;
}

AuForward au_forward(const AuNetwork& net, const Eigen::MatrixXd& encoded) {
  LstmCache cache = lstm_forward(net.backbone, encoded);
  AuForward out;
  out.hidden = cache.hidden();
  out.feature = out.hidden.row(out.hidden.rows() - 1).transpose();
  out.probs = softmax(net.head_w * out.feature + net.head_b);
  return out;
}

double au_loss(const AuNetwork& net, const std::vector<AuSample>& batch, AuGradients* grads) {
  if (grads != nullptr) *grads = zero_gradients(net);
  double loss = 0.0;
  for (const AuSample& s : batch) {
    if (s.encoded == nullptr) throw ConfigError("null sample in batch");
    if (s.label < 0 || s.label >= net.n_classes()) {
      throw ConfigError("class label " + std::to_string(s.label) + " out of range [0, " +
                        std::to_string(net.n_classes()) + ")");
    }
    LstmCache cache = lstm_forward(net.backbone, *s.encoded);
    const Eigen::Index t_len = cache.steps();
    const Eigen::VectorXd feature = cache.hidden().row(t_len - 1).transpose();
    const Eigen::VectorXd logits = net.head_w * feature + net.head_b;
    loss += log_sum_exp(logits) - logits(s.label);

    if (grads != nullptr) {
      Eigen::VectorXd dz = softmax(logits);
      dz(s.label) -= 1.0;
      grads->head_w.noalias() += dz * feature.transpose();
      grads->head_b += dz;

      Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(t_len, net.backbone.hidden_dim());
      dh.row(t_len - 1) = (net.head_w.transpose() * dz).transpose();
      add_gradients(grads->backbone, lstm_backward(net.backbone, cache, dh));
    }
  }
  return loss;
}

AuTrainResult train_au(const std::vector<AuSample>& train, const std::vector<AuSample>& heldout,
                       Eigen::Index input_dim, const AuTrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(cfg.lr_decay > 0.0) || cfg.lr_decay > 1.0) {
    throw ConfigError("lr_decay must be in (0, 1]");
  }
  if (train.empty()) throw ConfigError("empty training set");

  AuTrainResult result;
  result.net = make_au_network(input_dim, cfg.hidden_dim, cfg.depth, cfg.n_classes, cfg.seed);
  AuNetwork& net = result.net;

  auto params = param_views(net);
  AdamState adam = make_adam_state(params);
  AdamOptions opts;
  opts.lr = cfg.lr;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "au-epoch", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    opts.lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));

    double epoch_loss = 0.0;
    AuGradients grads;
    for (std::size_t idx : order) {
      const double l = au_loss(net, {train[idx]}, &grads);
      if (!std::isfinite(l)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += l;
      clip_gradients(grad_views(grads), cfg.clip_norm);
      adam_step(params, grad_views(grads), adam, opts);
    }

    AuEpochLog entry;
    entry.epoch = epoch + 1;
    entry.train_loss = epoch_loss / static_cast<double>(train.size());
    entry.heldout_accuracy = heldout.empty() ? 0.0 : classify_accuracy(net, heldout);
    result.log.push_back(entry);
  }
  return result;
}

double classify_accuracy(const AuNetwork& net, const std::vector<AuSample>& samples) {
  if (samples.empty()) throw ConfigError("accuracy over an empty segment list");
  long correct = 0;
  for (const AuSample& s : samples) {
    const Eigen::VectorXd probs = au_forward(net, *s.encoded).probs;
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < probs.size(); ++j) {
      if (probs(j) > probs(best)) best = j;  // strict: ties keep the lowest id
    }
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

Eigen::MatrixXd extract_video_features(const AuNetwork& net, std::vector<SegmentInput> segments) {
  if (segments.empty()) throw ConfigError("video without segments");
  std::sort(segments.begin(), segments.end(),
            [](const SegmentInput& a, const SegmentInput& b) { return a.position < b.position; });
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (segments[k].position != static_cast<int>(k)) {
      throw ConfigError("segment positions must be contiguous from 0; missing position " +
                        std::to_string(k));
    }
  }
  Eigen::MatrixXd features(static_cast<Eigen::Index>(segments.size()), net.feature_dim());
  for (std::size_t k = 0; k < segments.size(); ++k) {
    features.row(static_cast<Eigen::Index>(k)) =
        au_forward(net, *segments[k].encoded).feature.transpose();
  }
  return features;
}

std::string dump_hidden_states(const AuNetwork& net, const Eigen::MatrixXd& encoded,
                               const std::vector<int>& cell_indices) {
  if (cell_indices.empty()) throw ConfigError("no cell indices selected");
  for (int idx : cell_indices) {
    if (idx < 0 || idx >= net.backbone.hidden_dim()) {
      throw ConfigError("cell index " + std::to_string(idx) + " out of range [0, " +
                        std::to_string(net.backbone.hidden_dim()) + ")");
    }
  }
  const Eigen::MatrixXd hidden = au_forward(net, encoded).hidden;
  std::ostringstream out;
  out << "t";
  for (int idx : cell_indices) out << ",cell_" << idx;
  out << "\n";
  for (Eigen::Index t = 0; t < hidden.rows(); ++t) {
    out << t;
    for (int idx : cell_indices) out << "," << format_double(hidden(t, idx));
    out << "\n";
  }
  return out.str();
}

void save_au_network(const AuNetwork& net, const std::filesystem::path& path) {
  std::vector<TensorView> views = param_views(const_cast<AuNetwork&>(net));
  write_tensor_file(path, "SKILLEVAL-LSTM v1", "action_unit", views);
}

AuNetwork load_au_network(const std::filesystem::path& path) {
  TensorFile file = read_tensor_file(path, "SKILLEVAL-LSTM v1", "action_unit");
  AuNetwork net;
  net.backbone = stack_from_tensors(file, path.string());
  net.head_w = file.require("head.w");
  net.head_b = file.require("head.b").col(0);
  if (net.head_w.cols() != net.backbone.hidden_dim() || net.head_b.size() != net.head_w.rows()) {
    throw FormatError(path.string() + ": classifier head does not match backbone");
  }
  return net;
}

}  // namespace skilleval
