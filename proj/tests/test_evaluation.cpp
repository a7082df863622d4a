#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skilleval/errors.hpp"
#include "skilleval/evaluation.hpp"
#include "skilleval/rng.hpp"
#include "testutil.hpp"

using namespace skilleval;

namespace {

std::vector<ScoredPair> make_scored(std::initializer_list<std::pair<int, double>> rows) {
  std::vector<ScoredPair> out;
  int id = 0;
  for (auto [label, score] : rows) {
    out.push_back({id, id + 1000, label, score});
    ++id;
  }
  return out;
}

double trapezoid_area(const std::vector<RocPoint>& pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
  }
  return area;
}

}  // namespace

TEST_CASE("ranking quality on hand-scored sets") {
  // Perfect separation.
  auto perfect = make_scored({{1, 0.9}, {1, 0.8}, {0, 0.7}});
  CHECK(roc_auc(perfect).auc == 1.0);

  // Perfectly wrong ranking.
  auto inverted = make_scored({{0, 0.9}, {1, 0.1}});
  CHECK(roc_auc(inverted).auc == 0.0);

  // A single tied score across labels is half credit.
  auto tied = make_scored({{1, 0.5}, {0, 0.5}});
  CHECK(roc_auc(tied).auc == 0.5);

  // Two positives, two negatives, one tie: (1 + 1 + 0.5 + 1) / 4.
  auto mixed = make_scored({{1, 0.9}, {1, 0.5}, {0, 0.5}, {0, 0.1}});
  RocCurve curve = roc_auc(mixed);
  CHECK(curve.auc == 0.875);
  CHECK(curve.concordant_x2 == 7);
  CHECK(curve.positives == 2);
  CHECK(curve.negatives == 2);
}

TEST_CASE("threshold sweep equals the pairwise definition on random sets") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    auto scored = testutil::random_scored_set(rng, 200);
    RocCurve curve = roc_auc(scored);
    testutil::PairwiseAuc oracle = testutil::pairwise_auc(scored);
    // Integer numerators must agree exactly, hence so do the quotients.
    CHECK(curve.concordant_x2 == oracle.numerator_x2);
    CHECK(curve.positives == oracle.positives);
    CHECK(curve.negatives == oracle.negatives);
    CHECK(curve.auc == oracle.value());
  }
}

TEST_CASE("curve geometry is a monotone staircase from (0,0) to (1,1)") {
  Rng rng(72);
  auto scored = testutil::random_scored_set(rng, 120);
  RocCurve curve = roc_auc(scored);

  REQUIRE(!curve.points.empty());
  CHECK(std::isinf(curve.points.front().threshold));
  CHECK(curve.points.front().fpr == 0.0);
  CHECK(curve.points.front().tpr == 0.0);
  CHECK(curve.points.back().fpr == 1.0);
  CHECK(curve.points.back().tpr == 1.0);

  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
    CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
    CHECK(curve.points[i].threshold < curve.points[i - 1].threshold);
  }

  // The area under the staircase is the reported statistic.
  CHECK(trapezoid_area(curve.points) == doctest::Approx(curve.auc).epsilon(1e-12));
}

TEST_CASE("negating scores mirrors the ranking exactly") {
  Rng rng(73);
  for (int trial = 0; trial < 25; ++trial) {
    auto scored = testutil::random_scored_set(rng, 80);
    RocCurve fwd = roc_auc(scored);
    auto flipped = scored;
    for (auto& s : flipped) s.score = -s.score;
    RocCurve rev = roc_auc(flipped);
    // Wins become losses, ties stay ties: the integer numerator reflects.
    CHECK(rev.concordant_x2 == 2 * fwd.positives * fwd.negatives - fwd.concordant_x2);
  }
}

TEST_CASE("single-label sets are rejected") {
  CHECK_THROWS_WITH_AS(roc_auc(make_scored({{1, 0.5}, {1, 0.2}})),
                       doctest::Contains("no negative"), ConfigError);
  CHECK_THROWS_WITH_AS(roc_auc(make_scored({{0, 0.5}})), doctest::Contains("no positive"),
                       ConfigError);
  CHECK_THROWS_AS(roc_auc({}), ConfigError);
  auto bad = make_scored({{1, 0.5}, {0, 0.2}});
  bad[0].score = std::nan("");
  CHECK_THROWS_AS(roc_auc(bad), ConfigError);
}

TEST_CASE("pooled similarity baseline: plain cosine at alpha one") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 0, 0.6, 0.8;  // pools to (0.8, 0.4)
  Eigen::MatrixXd b(3, 2);
  b << 0, 1, 1, 1, -0.5, 0.5;  // pools to (1/6, 5/6)

  CHECK(baseline_cosine(a, b, 1.0) == doctest::Approx(0.61394061351492046).epsilon(1e-12));

  // Independent scalar recomputation.
  Eigen::Vector2d pa(0.8, 0.4), pb(1.0 / 6.0, 5.0 / 6.0);
  const double plain = pa.normalized().dot(pb.normalized());
  CHECK(baseline_cosine(a, b, 1.0) == doctest::Approx(plain).epsilon(1e-12));

  // A video is maximally similar to itself.
  CHECK(baseline_cosine(a, a, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(baseline_cosine(b, b, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pooled similarity baseline: fractional power case") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 0, 0.6, 0.8;
  Eigen::MatrixXd b(3, 2);
  b << 0, 1, 1, 1, -0.5, 0.5;
  CHECK(baseline_cosine(a, b, 0.5) == doctest::Approx(0.86037961002806318).epsilon(1e-12));

  // The power map preserves signs.
  Eigen::MatrixXd neg(1, 2);
  neg << -3, 0.1;
  Eigen::MatrixXd pos(1, 2);
  pos << 3, 0.1;
  const double anti = baseline_cosine(neg, pos, 0.5);
  CHECK(anti < 0.0);
}

TEST_CASE("pooled similarity baseline rejects bad inputs") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 0, 0, 1;
  Eigen::MatrixXd b(1, 3);
  b << 1, 2, 3;
  CHECK_THROWS_WITH_AS(baseline_cosine(a, b, 0.5), doctest::Contains("dimension mismatch"),
                       ConfigError);
  CHECK_THROWS_AS(baseline_cosine(a, a, 0.0), ConfigError);
  CHECK_THROWS_AS(baseline_cosine(a, a, 1.5), ConfigError);
  CHECK_THROWS_AS(baseline_cosine(Eigen::MatrixXd(0, 2), a, 0.5), ConfigError);

  Eigen::MatrixXd zero(2, 2);
  zero << 1, -1, -1, 1;  // pools to the zero vector
  CHECK_THROWS_AS(baseline_cosine(zero, a, 0.5), NumericError);
}

TEST_CASE("fold summaries aggregate into a finished report") {
  EvalReport rep;
  rep.method = "siamese";
  rep.seed = 42;
  rep.folds = {{0, 0.9, 0.8, 380, 20, 360}, {1, 0.7, 0.6, 380, 20, 360}};
  finalize_report(rep);
  CHECK(rep.mean_auc == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(rep.mean_accuracy == doctest::Approx(0.7).epsilon(1e-12));

  EvalReport empty;
  empty.method = "siamese";
  CHECK_THROWS_AS(finalize_report(empty), ConfigError);
}

TEST_CASE("report JSON round trip preserves every field") {
  EvalReport rep;
  rep.method = "cosine_baseline";
  rep.seed = 99;
  rep.folds = {{0, 0.875, 0.5, 12, 3, 9}, {1, 1.0, 0.25, 20, 5, 15}};
  rep.pooled_auc = 0.9375;
  finalize_report(rep);

  const std::string text = report_to_json(rep);
  EvalReport rt = report_from_json(text);
  CHECK(rt.method == rep.method);
  CHECK(rt.seed == rep.seed);
  CHECK(rt.mean_auc == rep.mean_auc);
  CHECK(rt.mean_accuracy == rep.mean_accuracy);
  CHECK(rt.pooled_auc == rep.pooled_auc);
  REQUIRE(rt.folds.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(rt.folds[i].fold == rep.folds[i].fold);
    CHECK(rt.folds[i].auc == rep.folds[i].auc);
    CHECK(rt.folds[i].accuracy == rep.folds[i].accuracy);
    CHECK(rt.folds[i].pairs == rep.folds[i].pairs);
    CHECK(rt.folds[i].positives == rep.folds[i].positives);
    CHECK(rt.folds[i].negatives == rep.folds[i].negatives);
  }

  // Serialization is deterministic.
  CHECK(report_to_json(rt) == text);

  CHECK_THROWS_AS(report_from_json("not json"), FormatError);
  CHECK_THROWS_AS(report_from_json("{\"method\": \"x\"}"), FormatError);
}

TEST_CASE("score tables survive a CSV round trip byte for byte") {
  Rng rng(74);
  auto scored = testutil::random_scored_set(rng, 60);
  scored[0].score = 1.0 / 3.0;  // needs full round-trip precision
  scored[1].score = -0.0;

  testutil::TempDir tmp;
  const auto path = tmp / "scores.csv";
  write_scores_csv(path, scored);

  const std::string first = testutil::slurp(path);
  CHECK(first.rfind("inst_id,user_id,label,score\n", 0) == 0);

  auto rt = read_scores_csv(path);
  REQUIRE(rt.size() == scored.size());
  for (std::size_t i = 0; i < rt.size(); ++i) {
    CHECK(rt[i].inst_id == scored[i].inst_id);
    CHECK(rt[i].user_id == scored[i].user_id);
    CHECK(rt[i].label == scored[i].label);
    CHECK(rt[i].score == scored[i].score);  // exact
  }

  write_scores_csv(path, rt);
  CHECK(testutil::slurp(path) == first);
}

TEST_CASE("score tables tolerate CRLF and reject malformed rows") {
  testutil::TempDir tmp;
  const auto path = tmp / "scores.csv";

  testutil::spit(path, "inst_id,user_id,label,score\r\n3,4,1,0.25\r\n5,6,0,-1.5\r\n");
  auto rt = read_scores_csv(path);
  REQUIRE(rt.size() == 2);
  CHECK(rt[0].score == 0.25);
  CHECK(rt[1].label == 0);

  testutil::spit(path, "inst_id,user_id,label,score\n1,2,1\n");
  CHECK_THROWS_WITH_AS(read_scores_csv(path), doctest::Contains(":2"), FormatError);

  testutil::spit(path, "wrong,header\n");
  CHECK_THROWS_AS(read_scores_csv(path), FormatError);

  testutil::spit(path, "inst_id,user_id,label,score\n1,2,7,0.5\n");
  CHECK_THROWS_AS(read_scores_csv(path), FormatError);
}

TEST_CASE("curve CSV lists thresholds with the sentinel first row") {
  auto scored = make_scored({{1, 0.9}, {1, 0.5}, {0, 0.5}, {0, 0.1}});
  RocCurve curve = roc_auc(scored);
  testutil::TempDir tmp;
  const auto path = tmp / "roc.csv";
  write_roc_csv(path, curve);

  const std::string text = testutil::slurp(path);
  std::istringstream in(text);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "threshold,fpr,tpr");
  REQUIRE(std::getline(in, line));
  CHECK(line == "inf,0,0");
  std::size_t rows = 1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == curve.points.size());
}
