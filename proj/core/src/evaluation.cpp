#include "skilleval/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "skilleval/errors.hpp"
#include "skilleval/tensor_io.hpp"

namespace skilleval {
namespace {

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

void write_or_throw(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << content;
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace

RocCurve roc_auc(const std::vector<ScoredPair>& scored) {
  long long positives = 0;
  long long negatives = 0;
  for (const ScoredPair& s : scored) {
    if (!std::isfinite(s.score)) throw ConfigError("non-finite score in scored pair set");
    if (s.label != 0 && s.label != 1) throw ConfigError("pair label must be 0 or 1");
    (s.label == 1 ? positives : negatives) += 1;
  }
  if (positives == 0) throw ConfigError("scored set has no positive pairs");
  if (negatives == 0) throw ConfigError("scored set has no negative pairs");

  std::vector<const ScoredPair*> order;
  order.reserve(scored.size());
  for (const ScoredPair& s : scored) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const ScoredPair* a, const ScoredPair* b) { return a->score < b->score; });

  // Group equal scores ascending. Every negative strictly below a positive
  // contributes 2, every tie contributes 1, so the numerator stays integer
  // and the result matches the pairwise definition exactly.
  struct Group {
    double score;
    long long pos = 0;
    long long neg = 0;
  };
  std::vector<Group> groups;
  for (const ScoredPair* s : order) {
    if (groups.empty() || groups.back().score != s->score) {
      groups.push_back({s->score, 0, 0});
    }
    (s->label == 1 ? groups.back().pos : groups.back().neg) += 1;
  }

  RocCurve curve;
  curve.positives = positives;
  curve.negatives = negatives;
  long long neg_below = 0;
  for (const Group& g : groups) {
    curve.concordant_x2 += g.pos * (2 * neg_below + g.neg);
    neg_below += g.neg;
  }
  curve.auc = static_cast<double>(curve.concordant_x2) /
              (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));

  curve.points.reserve(groups.size() + 1);
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long long tp = 0;
  long long fp = 0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    tp += it->pos;
    fp += it->neg;
    curve.points.push_back({it->score, static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives)});
  }
  return curve;
}

double baseline_cosine(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double alpha) {
  if (a.rows() < 1 || b.rows() < 1) throw ConfigError("cannot pool an empty feature list");
  if (a.cols() != b.cols()) throw ConfigError("feature dimension mismatch between videos");
  if (!(alpha > 0.0) || alpha > 1.0) throw ConfigError("power exponent must be in (0, 1]");

  auto pooled_direction = [alpha](const Eigen::MatrixXd& m) {
    Eigen::VectorXd v = m.colwise().mean();
    const double norm = v.norm();
    if (norm == 0.0) throw NumericError("zero pooled feature vector");
    v /= norm;
    if (alpha != 1.0) {
      v = (v.array().abs().pow(alpha) * v.array().sign()).matrix();
      v /= v.norm();
    }
    return v;
  };
  return pooled_direction(a).dot(pooled_direction(b));
}

void finalize_report(EvalReport& report) {
  if (report.folds.empty()) throw ConfigError("report without fold results");
  double auc_sum = 0.0;
  double acc_sum = 0.0;
  for (const FoldResult& f : report.folds) {
    auc_sum += f.auc;
    acc_sum += f.accuracy;
  }
  report.mean_auc = auc_sum / static_cast<double>(report.folds.size());
  report.mean_accuracy = acc_sum / static_cast<double>(report.folds.size());
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldResult& f : report.folds) {
    folds.push_back({{"fold", f.fold},
                     {"auc", f.auc},
                     {"accuracy", f.accuracy},
                     {"pairs", f.pairs},
                     {"positives", f.positives},
                     {"negatives", f.negatives}});
  }
  const nlohmann::json j = {{"method", report.method},
                            {"seed", report.seed},
                            {"folds", folds},
                            {"mean_auc", report.mean_auc},
                            {"mean_accuracy", report.mean_accuracy},
                            {"pooled_auc", report.pooled_auc}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report JSON: ") + e.what());
  }
  try {
    EvalReport report;
    report.method = j.at("method").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.mean_auc = j.at("mean_auc").get<double>();
    report.mean_accuracy = j.at("mean_accuracy").get<double>();
    report.pooled_auc = j.at("pooled_auc").get<double>();
    for (const nlohmann::json& jf : j.at("folds")) {
      FoldResult f;
      f.fold = jf.at("fold").get<int>();
      f.auc = jf.at("auc").get<double>();
      f.accuracy = jf.at("accuracy").get<double>();
      f.pairs = jf.at("pairs").get<long long>();
      f.positives = jf.at("positives").get<long long>();
      f.negatives = jf.at("negatives").get<long long>();
      report.folds.push_back(f);
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report JSON missing fields: ") + e.what());
  }
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredPair>& scored) {
  std::ostringstream out;
  out << "inst_id,user_id,label,score\n";
  for (const ScoredPair& s : scored) {
    out << s.inst_id << ',' << s.user_id << ',' << s.label << ',' << format_double(s.score)
        << "\n";
  }
  write_or_throw(path, out.str());
}

std::vector<ScoredPair> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "inst_id,user_id,label,score") {
    throw FormatError(path.string() + ": missing scores header");
  }
  std::vector<ScoredPair> scored;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    ScoredPair s;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      if (!std::getline(row, field, ',')) throw FormatError("");
      s.inst_id = std::stoi(field);
      if (!std::getline(row, field, ',')) throw FormatError("");
      s.user_id = std::stoi(field);
      if (!std::getline(row, field, ',')) throw FormatError("");
      s.label = std::stoi(field);
      if (!std::getline(row, field, ',')) throw FormatError("");
      s.score = parse_double(field, where);
    } catch (const FormatError&) {
      throw FormatError(where + ": malformed scores row");
    } catch (const std::exception&) {
      throw FormatError(where + ": malformed scores row");
    }
    if (s.label != 0 && s.label != 1) throw FormatError(where + ": label must be 0 or 1");
    scored.push_back(s);
  }
  return scored;
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  std::ostringstream out;
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points) {
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << format_double(p.threshold);
    }
    out << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << "\n";
  }
  write_or_throw(path, out.str());
}

}  // namespace skilleval
