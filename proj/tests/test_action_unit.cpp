#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "skilleval/action_unit.hpp"
#include "skilleval/errors.hpp"
#include "skilleval/rng.hpp"
#include "testutil.hpp"

using namespace skilleval;

namespace {

// Tiny two-class problem: class 0 sequences hover near +1, class 1 near -1.
std::vector<Eigen::MatrixXd> toy_sequences(Rng& rng, int per_class, int t_len, int dim,
                                           std::vector<int>& labels) {
  std::vector<Eigen::MatrixXd> out;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Eigen::MatrixXd seq(t_len, dim);
      for (int t = 0; t < t_len; ++t) {
        for (int d = 0; d < dim; ++d) {
          seq(t, d) = (c == 0 ? 1.0 : -1.0) + 0.1 * rng.uniform(-1.0, 1.0);
        }
      }
      out.push_back(seq);
      labels.push_back(c);
    }
  }
  return out;
}

std::vector<AuSample> as_samples(const std::vector<Eigen::MatrixXd>& seqs,
                                 const std::vector<int>& labels) {
  std::vector<AuSample> out;
  for (std::size_t i = 0; i < seqs.size(); ++i) out.push_back({&seqs[i], labels[i]});
  return out;
}

}  // namespace

TEST_CASE("forward pass produces a probability vector and the segment feature") {
  Rng rng(31);
  AuNetwork net = make_au_network(4, 6, 2, 5, 17);
  CHECK(net.n_classes() == 5);
  CHECK(net.feature_dim() == 6);

  Eigen::MatrixXd seq = testutil::random_matrix(rng, 9, 4);
  AuForward fwd = au_forward(net, seq);
  REQUIRE(fwd.probs.size() == 5);
  CHECK(fwd.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fwd.probs.minCoeff() > 0.0);
  REQUIRE(fwd.hidden.rows() == 9);
  REQUIRE(fwd.hidden.cols() == 6);
  // The segment feature is the last top-layer hidden state.
  CHECK(fwd.feature == fwd.hidden.row(8).transpose());
}

TEST_CASE("a blank head yields the uniform-distribution loss") {
  Rng rng(32);
  AuNetwork net = make_au_network(3, 4, 1, 48, 5);
  net.head_w.setZero();
  net.head_b.setZero();

  Eigen::MatrixXd a = testutil::random_matrix(rng, 6, 3);
  Eigen::MatrixXd b = testutil::random_matrix(rng, 4, 3);
  std::vector<AuSample> batch{{&a, 0}, {&b, 17}, {&a, 47}};

  // Zero logits make every class equally likely, so each sample contributes
  // exactly ln(48) and the batch loss is the plain sum.
  const double ln48 = 3.8712010109078911;
  CHECK(au_loss(net, batch) == doctest::Approx(3.0 * ln48).epsilon(1e-12));
}

TEST_CASE("batch loss is a sum: duplicating a sample doubles everything") {
  Rng rng(33);
  AuNetwork net = make_au_network(3, 5, 2, 4, 21);
  Eigen::MatrixXd seq = testutil::random_matrix(rng, 7, 3);

  std::vector<AuSample> single{{&seq, 2}};
  std::vector<AuSample> doubled{{&seq, 2}, {&seq, 2}};

  AuGradients g1 = zero_gradients(net);
  AuGradients g2 = zero_gradients(net);
  const double l1 = au_loss(net, single, &g1);
  const double l2 = au_loss(net, doubled, &g2);

  CHECK(l2 == l1 + l1);  // exact: x + x has no rounding
  CHECK(g2.head_w == (g1.head_w + g1.head_w).eval());
  CHECK(g2.head_b == (g1.head_b + g1.head_b).eval());
  for (int l = 0; l < 2; ++l) {
    CHECK(g2.backbone.layers[l].w == (g1.backbone.layers[l].w + g1.backbone.layers[l].w).eval());
    CHECK(g2.backbone.layers[l].b == (g1.backbone.layers[l].b + g1.backbone.layers[l].b).eval());
  }
}

TEST_CASE("classification gradients match central differences on toy dimensions") {
  Rng rng(34);
  AuNetwork net = make_au_network(4, 5, 2, 3, 11);
  Eigen::MatrixXd a = testutil::random_matrix(rng, 7, 4);
  Eigen::MatrixXd b = testutil::random_matrix(rng, 7, 4);
  std::vector<AuSample> batch{{&a, 0}, {&b, 2}};

  AuGradients grads = zero_gradients(net);
  au_loss(net, batch, &grads);

  auto report = grad_check([&] { return au_loss(net, batch); }, param_views(net),
                           grad_views(grads));
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.pass(1e-4));
}

TEST_CASE("invalid batches are rejected") {
  Rng rng(35);
  AuNetwork net = make_au_network(3, 4, 1, 4, 2);
  Eigen::MatrixXd seq = testutil::random_matrix(rng, 5, 3);
  CHECK_THROWS_AS(au_loss(net, {{&seq, 4}}), ConfigError);
  CHECK_THROWS_AS(au_loss(net, {{&seq, -1}}), ConfigError);
  CHECK_THROWS_AS(au_loss(net, {{nullptr, 0}}), ConfigError);
  CHECK_THROWS_AS(make_au_network(3, 4, 1, 1, 2), ConfigError);
}

TEST_CASE("training is deterministic and a no-op at zero epochs") {
  Rng rng(36);
  std::vector<int> labels;
  auto seqs = toy_sequences(rng, 4, 5, 3, labels);
  auto samples = as_samples(seqs, labels);

  AuTrainConfig cfg;
  cfg.hidden_dim = 6;
  cfg.depth = 1;
  cfg.n_classes = 2;
  cfg.epochs = 0;
  cfg.seed = 77;
  // Zero epochs returns the seeded initialization untouched, and the same
  // seed yields it bit for bit.
  AuTrainResult zero = train_au(samples, {}, 3, cfg);
  CHECK(zero.log.empty());
  AuTrainResult zero2 = train_au(samples, {}, 3, cfg);
  CHECK(testutil::same_parameters(param_views(zero.net), param_views(zero2.net)));

  cfg.epochs = 3;
  AuTrainResult a = train_au(samples, samples, 3, cfg);
  AuTrainResult b = train_au(samples, samples, 3, cfg);
  REQUIRE(a.log.size() == 3);
  CHECK(testutil::same_parameters(param_views(a.net), param_views(b.net)));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.log[i].epoch == static_cast<int>(i) + 1);
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(a.log[i].heldout_accuracy == b.log[i].heldout_accuracy);
  }

  cfg.seed = 78;
  AuTrainResult c = train_au(samples, samples, 3, cfg);
  CHECK(!testutil::same_parameters(param_views(a.net), param_views(c.net)));
}

TEST_CASE("training separates an easy two-class problem") {
  Rng rng(37);
  std::vector<int> train_labels, held_labels;
  auto train_seqs = toy_sequences(rng, 10, 6, 3, train_labels);
  auto held_seqs = toy_sequences(rng, 5, 6, 3, held_labels);

  AuTrainConfig cfg;
  cfg.hidden_dim = 8;
  cfg.depth = 1;
  cfg.n_classes = 2;
  cfg.epochs = 15;
  cfg.lr = 0.02;
  cfg.seed = 3;
  AuTrainResult res =
      train_au(as_samples(train_seqs, train_labels), as_samples(held_seqs, held_labels), 3, cfg);
  CHECK(res.log.back().heldout_accuracy == 1.0);
  CHECK(res.log.back().train_loss < res.log.front().train_loss);
  CHECK(classify_accuracy(res.net, as_samples(held_seqs, held_labels)) == 1.0);
}

TEST_CASE("tied logits resolve to the lowest class id") {
  Rng rng(38);
  AuNetwork net = make_au_network(3, 4, 1, 5, 9);
  net.head_w.setZero();
  net.head_b.setZero();  // every class ties
  Eigen::MatrixXd a = testutil::random_matrix(rng, 4, 3);
  Eigen::MatrixXd b = testutil::random_matrix(rng, 6, 3);
  std::vector<AuSample> samples{{&a, 0}, {&b, 3}};
  // Prediction is class 0 for both, so exactly the label-0 sample scores.
  CHECK(classify_accuracy(net, samples) == 0.5);
}

TEST_CASE("video features stack segment features in position order") {
  Rng rng(39);
  AuNetwork net = make_au_network(3, 5, 1, 4, 13);
  Eigen::MatrixXd s0 = testutil::random_matrix(rng, 4, 3);
  Eigen::MatrixXd s1 = testutil::random_matrix(rng, 7, 3);
  Eigen::MatrixXd s2 = testutil::random_matrix(rng, 5, 3);

  // Deliberately out of order: extraction must sort by position.
  Eigen::MatrixXd feats = extract_video_features(net, {{2, &s2}, {0, &s0}, {1, &s1}});
  REQUIRE(feats.rows() == 3);
  REQUIRE(feats.cols() == 5);
  CHECK(feats.row(0).transpose() == au_forward(net, s0).feature);
  CHECK(feats.row(1).transpose() == au_forward(net, s1).feature);
  CHECK(feats.row(2).transpose() == au_forward(net, s2).feature);

  CHECK_THROWS_WITH_AS(extract_video_features(net, {{0, &s0}, {2, &s2}}),
                       doctest::Contains("missing position 1"), ConfigError);
  CHECK_THROWS_AS(extract_video_features(net, {}), ConfigError);
}

TEST_CASE("hidden-state traces are well-formed CSV in the unit range") {
  Rng rng(40);
  AuNetwork net = make_au_network(3, 6, 2, 4, 15);
  Eigen::MatrixXd seq = testutil::random_matrix(rng, 8, 3);

  std::string csv = dump_hidden_states(net, seq, {0, 4});
  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "t,cell_0,cell_4");

  AuForward fwd = au_forward(net, seq);
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string tok;
    std::getline(cells, tok, ',');
    CHECK(tok == std::to_string(rows));
    std::getline(cells, tok, ',');
    CHECK(std::stod(tok) == doctest::Approx(fwd.hidden(rows, 0)).epsilon(1e-15));
    std::getline(cells, tok, ',');
    CHECK(std::stod(tok) == doctest::Approx(fwd.hidden(rows, 4)).epsilon(1e-15));
    CHECK(std::abs(std::stod(tok)) < 1.0);
    ++rows;
  }
  CHECK(rows == 8);

  CHECK_THROWS_WITH_AS(dump_hidden_states(net, seq, {6}), doctest::Contains("out of range"),
                       ConfigError);
  CHECK_THROWS_AS(dump_hidden_states(net, seq, {}), ConfigError);
}

TEST_CASE("classifier checkpoints round-trip exactly") {
  Rng rng(41);
  AuNetwork net = make_au_network(4, 5, 2, 6, 23);
  // Perturb away from init so the round trip is not trivially symmetric.
  net.head_w(2, 3) = -0.75;
  net.head_b(1) = 0.5;

  testutil::TempDir tmp;
  const auto path = tmp / "au.ckpt";
  save_au_network(net, path);
  AuNetwork rt = load_au_network(path);
  CHECK(testutil::same_parameters(param_views(net), param_views(rt)));
  CHECK(rt.n_classes() == 6);

  Eigen::MatrixXd seq = testutil::random_matrix(rng, 5, 4);
  CHECK(au_forward(net, seq).probs == au_forward(rt, seq).probs);

  SUBCASE("a head that does not match the backbone width is rejected") {
    // Write a structurally valid checkpoint whose head expects a different
    // hidden size than the backbone provides.
    AuNetwork bad = make_au_network(4, 7, 1, 6, 24);
    std::vector<TensorView> views = param_views(bad.backbone);
    Eigen::MatrixXd wrong_w = Eigen::MatrixXd::Zero(6, 5);
    Eigen::VectorXd wrong_b = Eigen::VectorXd::Zero(6);
    views.push_back(view_of("head.w", wrong_w));
    views.push_back(view_of("head.b", wrong_b));
    write_tensor_file(path, "SKILLEVAL-LSTM v1", "action_unit", views);
    CHECK_THROWS_WITH_AS(load_au_network(path), doctest::Contains("does not match backbone"),
                         FormatError);
  }
  SUBCASE("a distance-model checkpoint is not accepted as a classifier") {
    auto text = testutil::slurp(path);
    auto pos = text.find("role=action_unit");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 16, "role=siamese");
    testutil::spit(path, text);
    CHECK_THROWS_AS(load_au_network(path), FormatError);
  }
}

TEST_CASE("non-finite loss aborts training with a clear error") {
  Rng rng(42);
  std::vector<int> labels;
  auto seqs = toy_sequences(rng, 2, 4, 3, labels);
  // Saturating activations keep even absurd parameter values finite, so the
  // guard is exercised the only way it can fire: poisoned input data.
  seqs[0](1, 0) = std::numeric_limits<double>::quiet_NaN();
  auto samples = as_samples(seqs, labels);
  AuTrainConfig cfg;
  cfg.hidden_dim = 4;
  cfg.depth = 1;
  cfg.n_classes = 2;
  cfg.epochs = 2;
  CHECK_THROWS_WITH_AS(train_au(samples, {}, 3, cfg),
                       doctest::Contains("non-finite training loss"), NumericError);
}
