#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "skilleval/lstm.hpp"

namespace skilleval {

// Metric-learning stage. One LstmStack serves both branches of the pair,
// so weight sharing holds by construction rather than by synchronization.

// Per-video input: the ordered segment features from the classifier stage.
struct VideoFeatures {
  int video_id = 0;
  int activity_id = 0;
  Eigen::MatrixXd features;  // N x feature_dim, row k = segment at position k
};

struct VideoPair {
  int inst_index = 0;  // indices into the owning video list
  int user_index = 0;
  int label = 0;  // 1 when both videos show the same activity
};

struct PairSet {
  std::vector<VideoPair> pairs;
  long positives = 0;
  long negatives = 0;
};

// All ordered pairs (i, u), i != u; label 1 iff activity ids match.
PairSet make_pairs(const std::vector<VideoFeatures>& videos);

// Final top-layer hidden state of the shared stack over the feature list.
Eigen::VectorXd embed(const LstmStack& net, const Eigen::MatrixXd& features);

// Euclidean distance between the two embeddings of a pair.
double pair_distance(const LstmStack& net, const Eigen::MatrixXd& inst,
                     const Eigen::MatrixXd& user);

enum class PositiveTermForm {
  paper_linear,  // y*D, the printed form of the loss
  squared,       // y*D^2, the classical contrastive positive term
};

struct ContrastiveResult {
  double loss = 0.0;
  double d_loss_d_distance = 0.0;
};

// Margin loss on a pair distance: positive pairs are pulled together,
// negative pairs pushed beyond the margin with a squared hinge.
ContrastiveResult contrastive_loss(double distance, int label, double margin,
                                   PositiveTermForm form);

struct SiamesePairResult {
  double loss = 0.0;
  double distance = 0.0;
};

// Loss of one pair plus, when grads is non-null, freshly accumulated
// gradients through both branches of the shared stack.
SiamesePairResult siamese_pair_loss(const LstmStack& net, const Eigen::MatrixXd& inst,
                                    const Eigen::MatrixXd& user, int label, double margin,
                                    PositiveTermForm form, LstmGradients* grads = nullptr);

struct SiameseConfig {
  Eigen::Index hidden_dim = 128;
  int depth = 2;
  double margin = 1.0;
  PositiveTermForm positive_term = PositiveTermForm::paper_linear;
  int epochs = 20;
  double lr = 1e-3;
  double lr_decay = 1.0;  // per-epoch multiplier on lr
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  // 0 trains on every pair each epoch; otherwise a seeded subsample of
  // this many pairs per epoch keeps desk-scale runs fast.
  int pairs_per_epoch = 0;
};

struct SiameseEpochLog {
  int epoch = 0;
  double train_loss = 0.0;   // summed pair loss over the pairs visited
  double heldout_auc = 0.0;  // 0 when no scorable held-out pairs exist
};

struct SiameseTrainResult {
  LstmStack net;
  std::vector<SiameseEpochLog> log;
};

LstmStack make_siamese_network(Eigen::Index input_dim, const SiameseConfig& cfg);

// Per-pair Adam updates on the shared weights with a seeded shuffle per
// epoch. epochs=0 returns net unchanged.
SiameseTrainResult train_siamese(LstmStack net, const std::vector<VideoFeatures>& train_videos,
                                 const std::vector<VideoFeatures>& heldout_videos,
                                 const SiameseConfig& cfg);

void save_siamese_network(const LstmStack& net, const std::filesystem::path& path);
LstmStack load_siamese_network(const std::filesystem::path& path);

}  // namespace skilleval
