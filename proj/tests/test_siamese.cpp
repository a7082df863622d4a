#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "skilleval/errors.hpp"
#include "skilleval/siamese.hpp"
#include "testutil.hpp"

using namespace skilleval;

namespace {

// Videos whose feature rows sit near a per-activity anchor; activity
// identity is linearly separable so a few epochs suffice.
std::vector<VideoFeatures> toy_videos(Rng& rng, int per_activity, int n_activities, int dim) {
  std::vector<VideoFeatures> out;
  int id = 0;
  for (int a = 0; a < n_activities; ++a) {
    for (int i = 0; i < per_activity; ++i) {
      VideoFeatures v;
      v.video_id = id++;
      v.activity_id = a;
      const int n_seg = 3 + static_cast<int>(rng.uniform_int(std::uint64_t{4}));
      v.features.resize(n_seg, dim);
      for (int r = 0; r < n_seg; ++r) {
        for (int d = 0; d < dim; ++d) {
          const double anchor = (d % n_activities == a) ? 1.0 : -0.3;
          v.features(r, d) = anchor + 0.05 * rng.uniform(-1.0, 1.0);
        }
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("margin loss closed forms") {
  // Dissimilar pair already beyond the margin: nothing to push.
  auto r = contrastive_loss(1.2, 0, 1.0, PositiveTermForm::paper_linear);
  CHECK(r.loss == 0.0);
  CHECK(r.d_loss_d_distance == 0.0);
  r = contrastive_loss(1.0, 0, 1.0, PositiveTermForm::paper_linear);
  CHECK(r.loss == 0.0);

  // Dissimilar pair inside the margin: squared hinge (1 - 0.4)^2 = 0.36,
  // derivative -2*(1 - 0.4) = -1.2.
  r = contrastive_loss(0.4, 0, 1.0, PositiveTermForm::paper_linear);
  CHECK(r.loss == doctest::Approx(0.36).epsilon(1e-12));
  CHECK(r.d_loss_d_distance == doctest::Approx(-1.2).epsilon(1e-12));

  // Similar pair, linear pull: loss equals the distance, unit derivative.
  r = contrastive_loss(0.7, 1, 1.0, PositiveTermForm::paper_linear);
  CHECK(r.loss == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(r.d_loss_d_distance == doctest::Approx(1.0).epsilon(1e-12));

  // Similar pair, squared pull: D^2 with derivative 2D.
  r = contrastive_loss(0.7, 1, 1.0, PositiveTermForm::squared);
  CHECK(r.loss == doctest::Approx(0.49).epsilon(1e-12));
  CHECK(r.d_loss_d_distance == doctest::Approx(1.4).epsilon(1e-12));

  // The margin only affects dissimilar pairs.
  CHECK(contrastive_loss(0.7, 1, 2.5, PositiveTermForm::paper_linear).loss ==
        doctest::Approx(0.7).epsilon(1e-12));
  CHECK(contrastive_loss(0.7, 0, 2.5, PositiveTermForm::paper_linear).loss ==
        doctest::Approx(3.24).epsilon(1e-12));

  CHECK_THROWS_AS(contrastive_loss(0.5, 2, 1.0, PositiveTermForm::paper_linear), ConfigError);
  CHECK_THROWS_AS(contrastive_loss(0.5, 0, 0.0, PositiveTermForm::paper_linear), ConfigError);
  CHECK_THROWS_AS(contrastive_loss(-0.1, 0, 1.0, PositiveTermForm::paper_linear), ConfigError);
}

TEST_CASE("every ordered pair of distinct videos is enumerated") {
  Rng rng(51);
  auto videos = toy_videos(rng, 2, 3, 4);  // 6 videos, 3 activities
  PairSet ps = make_pairs(videos);
  CHECK(ps.pairs.size() == 6 * 5);
  CHECK(ps.positives == 6);  // each video has one same-activity partner
  CHECK(ps.negatives == 24);

  std::set<std::pair<int, int>> seen;
  for (const auto& p : ps.pairs) {
    CHECK(p.inst_index != p.user_index);
    CHECK(seen.insert({p.inst_index, p.user_index}).second);
    const int expected =
        videos[p.inst_index].activity_id == videos[p.user_index].activity_id ? 1 : 0;
    CHECK(p.label == expected);
  }
  CHECK_THROWS_AS(make_pairs({videos[0]}), ConfigError);
}

TEST_CASE("embedding is the final hidden state of the shared stack") {
  Rng rng(52);
  LstmStack net = make_lstm(4, 6, 2, 31);
  Eigen::MatrixXd feats = testutil::random_matrix(rng, 5, 4);
  Eigen::VectorXd e = embed(net, feats);
  REQUIRE(e.size() == 6);
  LstmCache cache = lstm_forward(net, feats);
  CHECK(e == cache.hidden().row(4).transpose());
  CHECK_THROWS_AS(embed(net, Eigen::MatrixXd(0, 4)), ConfigError);
}

TEST_CASE("pair distance is symmetric and zero on identical inputs") {
  Rng rng(53);
  LstmStack net = make_lstm(3, 5, 2, 32);
  for (int i = 0; i < 100; ++i) {
    const int ta = 1 + static_cast<int>(rng.uniform_int(std::uint64_t{12}));
    const int tb = 1 + static_cast<int>(rng.uniform_int(std::uint64_t{12}));
    Eigen::MatrixXd a = testutil::random_matrix(rng, ta, 3);
    Eigen::MatrixXd b = testutil::random_matrix(rng, tb, 3);
    CHECK(pair_distance(net, a, b) == pair_distance(net, b, a));  // exact
    CHECK(pair_distance(net, a, a) <= 1e-12);
    CHECK(pair_distance(net, a, a) == 0.0);
  }
}

TEST_CASE("pair loss gradients match central differences") {
  Rng rng(54);
  LstmStack net = make_lstm(4, 5, 2, 33);
  Eigen::MatrixXd inst = testutil::random_matrix(rng, 4, 4);
  Eigen::MatrixXd user = testutil::random_matrix(rng, 7, 4);

  for (int label : {0, 1}) {
    for (auto form : {PositiveTermForm::paper_linear, PositiveTermForm::squared}) {
      // Margin 2.0 keeps the hinge active for the dissimilar case, so the
      // gradient path through both branches is exercised.
      LstmGradients grads = zero_gradients(net);
      siamese_pair_loss(net, inst, user, label, 2.0, form, &grads);
      auto report = grad_check(
          [&] { return siamese_pair_loss(net, inst, user, label, 2.0, form).loss; },
          param_views(net), param_views(grads));
      INFO("label ", label, " form ", static_cast<int>(form), " err ", report.max_rel_err);
      CHECK(report.pass(1e-4));
    }
  }
}

TEST_CASE("inactive hinge produces exactly zero gradients") {
  Rng rng(55);
  LstmStack net = make_lstm(3, 4, 1, 34);
  Eigen::MatrixXd inst = testutil::random_matrix(rng, 3, 3);
  Eigen::MatrixXd user = testutil::random_matrix(rng, 5, 3);
  const double d = pair_distance(net, inst, user);
  REQUIRE(d > 0.0);

  // Choose a margin below the distance: dissimilar pair, no pull, no push.
  LstmGradients grads = zero_gradients(net);
  auto res = siamese_pair_loss(net, inst, user, 0, d * 0.5, PositiveTermForm::paper_linear, &grads);
  CHECK(res.loss == 0.0);
  CHECK(grads.layers[0].w.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.layers[0].b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical inputs are a safe degenerate pair") {
  Rng rng(56);
  LstmStack net = make_lstm(3, 4, 1, 35);
  Eigen::MatrixXd a = testutil::random_matrix(rng, 4, 3);

  // Similar pair at zero distance: loss 0, gradients finite (zero).
  LstmGradients grads = zero_gradients(net);
  auto res = siamese_pair_loss(net, a, a, 1, 1.0, PositiveTermForm::paper_linear, &grads);
  CHECK(res.distance == 0.0);
  CHECK(res.loss == 0.0);
  CHECK(grads.layers[0].w.allFinite());
  CHECK(grads.layers[0].w.cwiseAbs().maxCoeff() == 0.0);

  // Dissimilar pair at zero distance: the hinge is maximally violated; the
  // loss is m^2 and the distance gradient is left at zero rather than NaN.
  grads = zero_gradients(net);
  res = siamese_pair_loss(net, a, a, 0, 1.5, PositiveTermForm::paper_linear, &grads);
  CHECK(res.loss == doctest::Approx(2.25).epsilon(1e-12));
  CHECK(grads.layers[0].w.allFinite());
}

TEST_CASE("embedding does not depend on what else was embedded") {
  Rng rng(57);
  LstmStack net = make_lstm(4, 5, 2, 36);
  Eigen::MatrixXd a = testutil::random_matrix(rng, 4, 4);   // short list
  Eigen::MatrixXd b = testutil::random_matrix(rng, 12, 4);  // long list

  Eigen::VectorXd alone = embed(net, a);

  // Embed a mixed bag of other shapes in between, including pair losses
  // against differently sized partners.
  embed(net, b);
  siamese_pair_loss(net, a, b, 0, 1.0, PositiveTermForm::paper_linear);
  siamese_pair_loss(net, b, a, 1, 1.0, PositiveTermForm::paper_linear);
  Eigen::VectorXd after = embed(net, a);
  CHECK(alone == after);

  // Mixed-length pairs evaluate cleanly in both orders.
  const double d_ab = pair_distance(net, a, b);
  CHECK(std::isfinite(d_ab));
  CHECK(d_ab == pair_distance(net, b, a));
}

TEST_CASE("training is deterministic, learns, and respects zero epochs") {
  Rng rng(58);
  auto train = toy_videos(rng, 3, 3, 6);
  auto held = toy_videos(rng, 2, 3, 6);

  SiameseConfig cfg;
  cfg.hidden_dim = 8;
  cfg.depth = 1;
  cfg.epochs = 10;
  cfg.lr = 0.01;
  cfg.seed = 5;

  LstmStack init = make_siamese_network(6, cfg);
  LstmStack init2 = make_siamese_network(6, cfg);
  CHECK(testutil::same_parameters(param_views(init), param_views(init2)));

  SiameseConfig zero = cfg;
  zero.epochs = 0;
  SiameseTrainResult untouched = train_siamese(init, train, held, zero);
  CHECK(untouched.log.empty());
  CHECK(testutil::same_parameters(param_views(untouched.net), param_views(init2)));

  SiameseTrainResult a = train_siamese(init, train, held, cfg);
  SiameseTrainResult b = train_siamese(init2, train, held, cfg);
  REQUIRE(a.log.size() == 10);
  CHECK(testutil::same_parameters(param_views(a.net), param_views(b.net)));
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(a.log[i].heldout_auc == b.log[i].heldout_auc);
  }

  CHECK(a.log.back().heldout_auc == 1.0);
  CHECK(a.log.back().train_loss < a.log.front().train_loss);

  // Trained distances separate the held-out pairs.
  PairSet ps = make_pairs(held);
  double worst_pos = 0.0, best_neg = 1e300;
  for (const auto& p : ps.pairs) {
    const double d = pair_distance(a.net, held[p.inst_index].features, held[p.user_index].features);
    if (p.label)
      worst_pos = std::max(worst_pos, d);
    else
      best_neg = std::min(best_neg, d);
  }
  CHECK(worst_pos < best_neg);
}

TEST_CASE("per-epoch pair subsampling still trains deterministically") {
  Rng rng(59);
  auto train = toy_videos(rng, 3, 2, 5);  // 6 videos -> 30 pairs
  SiameseConfig cfg;
  cfg.hidden_dim = 6;
  cfg.depth = 1;
  cfg.epochs = 4;
  cfg.pairs_per_epoch = 7;
  cfg.seed = 8;
  LstmStack init = make_siamese_network(5, cfg);
  SiameseTrainResult a = train_siamese(init, train, {}, cfg);
  SiameseTrainResult b = train_siamese(init, train, {}, cfg);
  CHECK(testutil::same_parameters(param_views(a.net), param_views(b.net)));
  REQUIRE(a.log.size() == 4);
  // A 7-pair epoch cannot sum more loss than the margin bound of 7 pairs.
  for (const auto& e : a.log) CHECK(e.train_loss >= 0.0);

  // Heldout column is 0 when there is nothing to score.
  CHECK(a.log.back().heldout_auc == 0.0);
}

TEST_CASE("distance-model checkpoints round-trip exactly") {
  SiameseConfig cfg;
  cfg.hidden_dim = 5;
  cfg.depth = 2;
  cfg.seed = 12;
  LstmStack net = make_siamese_network(7, cfg);
  testutil::TempDir tmp;
  const auto path = tmp / "siamese.ckpt";
  save_siamese_network(net, path);
  LstmStack rt = load_siamese_network(path);
  CHECK(testutil::same_parameters(param_views(net), param_views(rt)));

  Rng rng(60);
  Eigen::MatrixXd feats = testutil::random_matrix(rng, 6, 7);
  CHECK(embed(net, feats) == embed(rt, feats));

  // A classifier checkpoint is not accepted as a distance model.
  auto text = testutil::slurp(path);
  auto pos = text.find("role=siamese");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 12, "role=action_unit");
  testutil::spit(path, text);
  CHECK_THROWS_AS(load_siamese_network(path), FormatError);
}

TEST_CASE("training rejects degenerate pair sets") {
  Rng rng(61);
  auto one_activity = toy_videos(rng, 3, 1, 4);  // all pairs share the label
  SiameseConfig cfg;
  cfg.hidden_dim = 4;
  cfg.depth = 1;
  cfg.epochs = 1;
  LstmStack init = make_siamese_network(4, cfg);
  CHECK_THROWS_WITH_AS(train_siamese(init, one_activity, {}, cfg),
                       doctest::Contains("both labels"), ConfigError);
}
