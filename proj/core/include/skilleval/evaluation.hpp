#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace skilleval {

// Higher score = more likely a success pair (for distance-based methods
// the caller passes the negated distance).
struct ScoredPair {
  int inst_id = 0;
  int user_id = 0;
  int label = 0;
  double score = 0.0;
};

// threshold is the smallest score still classified positive at this point;
// +infinity marks the initial (0,0) point.
struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  // Exact Mann-Whitney numerator: 2*concordant + tied, over positives*negatives
  // pairs. auc == concordant_x2 / (2*positives*negatives).
  long long concordant_x2 = 0;
  long long positives = 0;
  long long negatives = 0;
};

// Threshold sweep with half-credit ties. The integer numerator makes the
// result exactly equal to the brute-force pairwise definition.
RocCurve roc_auc(const std::vector<ScoredPair>& scored);

// Average-pool each feature list, L2-normalize, apply the signed fractional
// power sign(v)*|v|^alpha elementwise, renormalize, and return the dot
// product. alpha = 1 is plain cosine similarity of pooled features.
double baseline_cosine(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double alpha);

struct FoldResult {
  int fold = 0;
  double auc = 0.0;
  double accuracy = 0.0;
  long long pairs = 0;
  long long positives = 0;
  long long negatives = 0;
};

struct EvalReport {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;
  double mean_auc = 0.0;
  double mean_accuracy = 0.0;
  double pooled_auc = 0.0;  // AUC over all folds' pairs pooled together
};

// Means recomputed from the fold entries; throws when folds is empty.
void finalize_report(EvalReport& report);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// CSV round trip: "inst_id,user_id,label,score".
void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredPair>& scored);
std::vector<ScoredPair> read_scores_csv(const std::filesystem::path& path);

// "threshold,fpr,tpr"; the initial point's threshold is written as "inf".
void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);

}  // namespace skilleval
