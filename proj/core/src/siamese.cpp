#include "skilleval/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "skilleval/errors.hpp"
#include "skilleval/evaluation.hpp"
#include "skilleval/rng.hpp"

namespace skilleval {
namespace {

// Scores every pair in the set; used for the per-epoch held-out AUC.
double heldout_auc(const LstmStack& net, const std::vector<VideoFeatures>& videos) {
  if (videos.size() < 2) return 0.0;
  PairSet set = make_pairs(videos);
  if (set.positives == 0 || set.negatives == 0) return 0.0;

  std::vector<Eigen::VectorXd> embeddings;
  embeddings.reserve(videos.size());
  for (const VideoFeatures& v : videos) embeddings.push_back(embed(net, v.features));

  std::vector<ScoredPair> scored;
  scored.reserve(set.pairs.size());
  for (const VideoPair& p : set.pairs) {
    ScoredPair s;
    s.inst_id = videos[p.inst_index].video_id;
    s.user_id = videos[p.user_index].video_id;
    s.label = p.label;
    s.score = -(embeddings[p.inst_index] - embeddings[p.user_index]).norm();
    scored.push_back(s);
  }
  return roc_auc(scored).auc;
}

}  // namespace

PairSet make_pairs(const std::vector<VideoFeatures>& videos) {
  if (videos.size() < 2) {
    throw ConfigError("pairing needs at least 2 videos, got " + std::to_string(videos.size()));
  }
  PairSet set;
  const int n = static_cast<int>(videos.size());
  set.pairs.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i) {
    for (int u = 0; u < n; ++u) {
      if (i == u) continue;
      VideoPair p;
      p.inst_index = i;
      p.user_index = u;
      p.label = (videos[i].activity_id == videos[u].activity_id) ? 1 : 0;
      (p.label == 1 ? set.positives : set.negatives) += 1;
      set.pairs.push_back(p);
    }
  }
  return set;
}

Eigen::VectorXd embed(const LstmStack& net, const Eigen::MatrixXd& features) {
  if (features.rows() < 1) throw ConfigError("cannot embed an empty feature list");
  LstmCache cache = lstm_forward(net, features);
  return cache.hidden().row(cache.steps() - 1).transpose();
}

double pair_distance(const LstmStack& net, const Eigen::MatrixXd& inst,
                     const Eigen::MatrixXd& user) {
  return (embed(net, inst) - embed(net, user)).norm();
}

ContrastiveResult contrastive_loss(double distance, int label, double margin,
                                   PositiveTermForm form) {
  if (label != 0 && label != 1) throw ConfigError("pair label must be 0 or 1");
  if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
  if (distance < 0.0) throw ConfigError("distance must be nonnegative");

  ContrastiveResult r;
  if (label == 1) {
    if (form == PositiveTermForm::paper_linear) {
      r.loss = distance;
      r.d_loss_d_distance = 1.0;
    } else {
      r.loss = distance * distance;
      r.d_loss_d_distance = 2.0 * distance;
    }
  } else {
    const double gap = margin - distance;
    if (gap > 0.0) {
      r.loss = gap * gap;
      r.d_loss_d_distance = -2.0 * gap;
    }
  }
  return r;
}

SiamesePairResult siamese_pair_loss(const LstmStack& net, const Eigen::MatrixXd& inst,
                                    const Eigen::MatrixXd& user, int label, double margin,
                                    PositiveTermForm form, LstmGradients* grads) {
  LstmCache cache_i = lstm_forward(net, inst);
  LstmCache cache_u = lstm_forward(net, user);
  const Eigen::VectorXd e_i = cache_i.hidden().row(cache_i.steps() - 1).transpose();
  const Eigen::VectorXd e_u = cache_u.hidden().row(cache_u.steps() - 1).transpose();
  const Eigen::VectorXd diff = e_i - e_u;

  SiamesePairResult out;
  out.distance = diff.norm();
  const ContrastiveResult c = contrastive_loss(out.distance, label, margin, form);
  out.loss = c.loss;

  if (grads != nullptr) {
    *grads = zero_gradients(net);
    // dD/de_i = diff/D; at D=0 the distance is at its minimum, gradient 0.
    if (out.distance > 0.0 && c.d_loss_d_distance != 0.0) {
      const Eigen::VectorXd de = (c.d_loss_d_distance / out.distance) * diff;
      Eigen::MatrixXd dh_i = Eigen::MatrixXd::Zero(cache_i.steps(), net.hidden_dim());
      dh_i.row(cache_i.steps() - 1) = de.transpose();
      Eigen::MatrixXd dh_u = Eigen::MatrixXd::Zero(cache_u.steps(), net.hidden_dim());
      dh_u.row(cache_u.steps() - 1) = -de.transpose();
      add_gradients(*grads, lstm_backward(net, cache_i, dh_i));
      add_gradients(*grads, lstm_backward(net, cache_u, dh_u));
    }
  }
  return out;
}

LstmStack make_siamese_network(Eigen::Index input_dim, const SiameseConfig& cfg) {
  return make_lstm(input_dim, cfg.hidden_dim, cfg.depth, derive_seed(cfg.seed, "siamese-init"));
}

SiameseTrainResult train_siamese(LstmStack net, const std::vector<VideoFeatures>& train_videos,
                                 const std::vector<VideoFeatures>& heldout_videos,
                                 const SiameseConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(cfg.lr_decay > 0.0) || cfg.lr_decay > 1.0) {
    throw ConfigError("lr_decay must be in (0, 1]");
  }
  if (cfg.pairs_per_epoch < 0) throw ConfigError("pairs_per_epoch must be >= 0");

  SiameseTrainResult result;
  result.net = std::move(net);
  if (cfg.epochs == 0) return result;

  PairSet set = make_pairs(train_videos);
  if (set.positives == 0 || set.negatives == 0) {
    throw ConfigError("training pairs must contain both labels");
  }

  auto params = param_views(result.net);
  AdamState adam = make_adam_state(params);
  AdamOptions opts;
  opts.lr = cfg.lr;

  std::vector<std::size_t> order(set.pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t per_epoch =
      (cfg.pairs_per_epoch == 0)
          ? order.size()
          : std::min(order.size(), static_cast<std::size_t>(cfg.pairs_per_epoch));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "siamese-epoch", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    opts.lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));

    double epoch_loss = 0.0;
    LstmGradients grads;
    for (std::size_t k = 0; k < per_epoch; ++k) {
      const VideoPair& p = set.pairs[order[k]];
      const SiamesePairResult r =
          siamese_pair_loss(result.net, train_videos[p.inst_index].features,
                            train_videos[p.user_index].features, p.label, cfg.margin,
                            cfg.positive_term, &grads);
      if (!std::isfinite(r.loss)) {
        throw NumericError("non-finite pair loss at epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += r.loss;
      clip_gradients(param_views(grads), cfg.clip_norm);
      adam_step(params, param_views(grads), adam, opts);
    }

    SiameseEpochLog entry;
    entry.epoch = epoch + 1;
    entry.train_loss = epoch_loss;
    entry.heldout_auc = heldout_auc(result.net, heldout_videos);
    result.log.push_back(entry);
  }
  return result;
}

void save_siamese_network(const LstmStack& net, const std::filesystem::path& path) {
  std::vector<TensorView> views = param_views(const_cast<LstmStack&>(net));
  write_tensor_file(path, "SKILLEVAL-LSTM v1", "siamese", views);
}

LstmStack load_siamese_network(const std::filesystem::path& path) {
  TensorFile file = read_tensor_file(path, "SKILLEVAL-LSTM v1", "siamese");
  return stack_from_tensors(file, path.string());
}

}  // namespace skilleval
