#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "skilleval/lstm.hpp"

namespace skilleval {

// Segment classifier: stacked LSTM over per-frame encodings plus a linear
// softmax head on the last top-layer hidden state. That hidden state doubles
// as the segment's feature vector for the metric-learning stage.
struct AuNetwork {
  LstmStack backbone;
  Eigen::MatrixXd head_w;  // n_classes x hidden
  Eigen::VectorXd head_b;

  Eigen::Index n_classes() const { return head_w.rows(); }
  Eigen::Index feature_dim() const { return backbone.hidden_dim(); }
};

AuNetwork make_au_network(Eigen::Index input_dim, Eigen::Index hidden_dim, int depth,
                          Eigen::Index n_classes, std::uint64_t seed);

// Ordered parameter views: backbone layers first, then head.
std::vector<TensorView> param_views(AuNetwork& net);

struct AuGradients {
  LstmGradients backbone;
  Eigen::MatrixXd head_w;
  Eigen::VectorXd head_b;
};

AuGradients zero_gradients(const AuNetwork& net);
std::vector<TensorView> grad_views(AuGradients& g);

struct AuForward {
  Eigen::VectorXd probs;    // softmax over classes, sums to 1
  Eigen::VectorXd feature;  // last-step top-layer hidden state
  Eigen::MatrixXd hidden;   // all top-layer hidden states, T x hidden
};

AuForward au_forward(const AuNetwork& net, const Eigen::MatrixXd& encoded);

struct AuSample {
  const Eigen::MatrixXd* encoded = nullptr;  // T x input_dim
  int label = 0;
};

// Summed cross-entropy over the batch, computed from logits via
// log-sum-exp. When grads is non-null it receives freshly accumulated
// parameter gradients (sum over samples in batch order).
double au_loss(const AuNetwork& net, const std::vector<AuSample>& batch,
               AuGradients* grads = nullptr);

struct AuTrainConfig {
  Eigen::Index hidden_dim = 128;
  int depth = 2;
  Eigen::Index n_classes = 48;
  int epochs = 30;
  double lr = 1e-3;
  double lr_decay = 1.0;  // per-epoch multiplier on lr
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
};

struct AuEpochLog {
  int epoch = 0;
  double train_loss = 0.0;        // mean per-sample cross-entropy
  double heldout_accuracy = 0.0;  // fraction correct on the held-out set
};

struct AuTrainResult {
  AuNetwork net;
  std::vector<AuEpochLog> log;
};

// Per-sequence Adam updates with a seeded shuffle each epoch. heldout may
// be empty (accuracy logged as 0).
AuTrainResult train_au(const std::vector<AuSample>& train, const std::vector<AuSample>& heldout,
                       Eigen::Index input_dim, const AuTrainConfig& cfg);

// Argmax accuracy; ties resolve to the lowest class id.
double classify_accuracy(const AuNetwork& net, const std::vector<AuSample>& samples);

// Features of one video's segments, ordered by position. positions must be
// exactly 0..n-1 after sorting; returns an n x hidden matrix (row k is the
// feature of the segment at position k).
struct SegmentInput {
  int position = 0;
  const Eigen::MatrixXd* encoded = nullptr;
};
Eigen::MatrixXd extract_video_features(const AuNetwork& net, std::vector<SegmentInput> segments);

// CSV trace ("t,cell_<i>,...") of selected top-layer hidden units over time.
std::string dump_hidden_states(const AuNetwork& net, const Eigen::MatrixXd& encoded,
                               const std::vector<int>& cell_indices);

void save_au_network(const AuNetwork& net, const std::filesystem::path& path);
AuNetwork load_au_network(const std::filesystem::path& path);

}  // namespace skilleval
