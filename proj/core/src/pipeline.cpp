#include "skilleval/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "skilleval/errors.hpp"
#include "skilleval/rng.hpp"
#include "skilleval/tensor_io.hpp"

namespace skilleval {
namespace {

std::vector<int> other_folds(int fold) {
  std::vector<int> out;
  for (int f = 0; f < kFoldCount; ++f) {
    if (f != fold) out.push_back(f);
  }
  return out;
}

void check_fold(int fold) {
  if (fold < 0 || fold >= kFoldCount) {
    throw ConfigError("fold must be in [0, " + std::to_string(kFoldCount) + "), got " +
                      std::to_string(fold));
  }
}

FvEncoder require_encoder(const StagePaths& paths, int fold) {
  if (!std::filesystem::exists(paths.encoder)) {
    throw ConfigError("encoder checkpoint missing for fold " + std::to_string(fold) + ": " +
                      paths.encoder.string());
  }
  return load_encoder(paths.encoder);
}

AuNetwork require_au(const StagePaths& paths, int fold) {
  if (!std::filesystem::exists(paths.au_checkpoint)) {
    throw ConfigError("classifier checkpoint missing for fold " + std::to_string(fold) + ": " +
                      paths.au_checkpoint.string());
  }
  return load_au_network(paths.au_checkpoint);
}

LstmStack require_siamese(const StagePaths& paths, int fold) {
  if (!std::filesystem::exists(paths.siamese_checkpoint)) {
    throw ConfigError("siamese checkpoint missing for fold " + std::to_string(fold) + ": " +
                      paths.siamese_checkpoint.string());
  }
  return load_siamese_network(paths.siamese_checkpoint);
}

// Encoded sequences for the given segment indices, keyed by segment index.
std::vector<Eigen::MatrixXd> encode_segments(const Dataset& dataset, const FvEncoder& enc,
                                             const std::vector<int>& indices, int stride) {
  std::vector<Eigen::MatrixXd> out(dataset.segments.size());
  for (int idx : indices) {
    out[idx] = encode_sequence(enc.pca, enc.gmm,
                               strided_frames(dataset.segments[idx].frames, stride));
  }
  return out;
}

std::vector<AuSample> make_samples(const Dataset& dataset,
                                   const std::vector<Eigen::MatrixXd>& encoded,
                                   const std::vector<int>& indices) {
  std::vector<AuSample> samples;
  samples.reserve(indices.size());
  for (int idx : indices) {
    samples.push_back({&encoded[idx], dataset.segments[idx].unit_class});
  }
  return samples;
}

bool subject_in_folds(const Dataset& dataset, int subject, const std::vector<int>& fold_ids) {
  for (int f : fold_ids) {
    const auto& members = dataset.folds[f];
    if (std::find(members.begin(), members.end(), subject) != members.end()) return true;
  }
  return false;
}

// Per-video ordered feature lists for all videos whose subject lies in the
// given folds.
std::vector<VideoFeatures> fold_video_features(const Dataset& dataset, const AuNetwork& net,
                                               const std::vector<Eigen::MatrixXd>& encoded,
                                               const std::vector<int>& fold_ids) {
  std::vector<VideoFeatures> out;
  for (const VideoRef& video : group_videos(dataset)) {
    if (!subject_in_folds(dataset, video.subject_id, fold_ids)) continue;
    std::vector<SegmentInput> inputs;
    inputs.reserve(video.segment_indices.size());
    for (int idx : video.segment_indices) {
      inputs.push_back({dataset.segments[idx].position, &encoded[idx]});
    }
    VideoFeatures vf;
    vf.video_id = video.video_id;
    vf.activity_id = video.activity_id;
    vf.features = extract_video_features(net, std::move(inputs));
    out.push_back(std::move(vf));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << content;
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace

StagePaths stage_paths(const std::filesystem::path& out_dir, int fold) {
  check_fold(fold);
  StagePaths p;
  p.fold_dir = out_dir / ("fold" + std::to_string(fold));
  p.encoder = p.fold_dir / "encoder.enc";
  p.au_checkpoint = p.fold_dir / "au.ckpt";
  p.au_log = p.fold_dir / "au_log.csv";
  p.siamese_checkpoint = p.fold_dir / "siamese.ckpt";
  p.siamese_log = p.fold_dir / "siamese_log.csv";
  return p;
}

GenConfig gen_config(const RunConfig& cfg) {
  GenConfig g;
  g.n_subjects = cfg.n_subjects;
  g.frames_min = cfg.frames_min;
  g.frames_max = cfg.frames_max;
  g.d_raw = cfg.d_raw;
  g.noise_level = cfg.noise_level;
  g.seed = cfg.seed;
  return g;
}

Eigen::MatrixXd strided_frames(const Eigen::MatrixXd& frames, int stride) {
  if (stride < 1) throw ConfigError("frame_stride must be >= 1");
  if (stride == 1) return frames;
  const Eigen::Index kept = (frames.rows() + stride - 1) / stride;
  Eigen::MatrixXd out(kept, frames.cols());
  for (Eigen::Index i = 0; i < kept; ++i) out.row(i) = frames.row(i * stride);
  return out;
}

void run_encoder_stage(const Dataset& dataset, const RunConfig& cfg, int fold,
                       const std::filesystem::path& out_dir) {
  check_fold(fold);
  validate_config(cfg);
  const StagePaths paths = stage_paths(out_dir, fold);
  std::filesystem::create_directories(paths.fold_dir);

  const std::vector<int> train_idx = segments_in_folds(dataset, other_folds(fold));
  if (train_idx.empty()) throw ConfigError("no training segments for fold " + std::to_string(fold));

  Eigen::Index total_rows = 0;
  std::vector<Eigen::MatrixXd> strided;
  strided.reserve(train_idx.size());
  for (int idx : train_idx) {
    strided.push_back(strided_frames(dataset.segments[idx].frames, cfg.frame_stride));
    total_rows += strided.back().rows();
  }
  Eigen::MatrixXd frames(total_rows, dataset.d_raw);
  Eigen::Index row = 0;
  for (const Eigen::MatrixXd& m : strided) {
    frames.middleRows(row, m.rows()) = m;
    row += m.rows();
  }

  FvEncoder enc;
  enc.pca = fit_pca(frames, cfg.d_pca);
  GmmFitOptions opts;
  opts.em_iters = cfg.em_iters;
  opts.variance_floor = cfg.variance_floor;
  opts.seed = derive_seed(cfg.seed, "gmm", static_cast<std::uint64_t>(fold));
  enc.gmm = fit_gmm(pca_project_rows(enc.pca, frames), cfg.gmm_k, opts).model;
  save_encoder(enc, paths.encoder);
}

void run_au_stage(const Dataset& dataset, const RunConfig& cfg, int fold,
                  const std::filesystem::path& out_dir) {
  check_fold(fold);
  validate_config(cfg);
  const StagePaths paths = stage_paths(out_dir, fold);
  const FvEncoder enc = require_encoder(paths, fold);

  const std::vector<int> train_idx = segments_in_folds(dataset, other_folds(fold));
  const std::vector<int> heldout_idx = segments_in_folds(dataset, {fold});
  std::vector<int> all_idx = train_idx;
  all_idx.insert(all_idx.end(), heldout_idx.begin(), heldout_idx.end());
  const std::vector<Eigen::MatrixXd> encoded =
      encode_segments(dataset, enc, all_idx, cfg.frame_stride);

  AuTrainConfig tc;
  tc.hidden_dim = cfg.au_hidden;
  tc.depth = cfg.au_layers;
  tc.n_classes = dataset.catalog.class_count();
  tc.epochs = cfg.au_epochs;
  tc.lr = cfg.au_lr;
  tc.lr_decay = cfg.lr_decay;
  tc.clip_norm = cfg.clip_norm;
  tc.seed = derive_seed(cfg.seed, "au", static_cast<std::uint64_t>(fold));

  AuTrainResult result = train_au(make_samples(dataset, encoded, train_idx),
                                  make_samples(dataset, encoded, heldout_idx),
                                  enc.fv_dim(), tc);
  save_au_network(result.net, paths.au_checkpoint);

  std::ostringstream log;
  log << "epoch,train_loss,heldout_accuracy\n";
  for (const AuEpochLog& e : result.log) {
    log << e.epoch << ',' << format_double(e.train_loss) << ','
        << format_double(e.heldout_accuracy) << "\n";
  }
  write_text(paths.au_log, log.str());
}

void run_siamese_stage(const Dataset& dataset, const RunConfig& cfg, int fold,
                       const std::filesystem::path& out_dir) {
  check_fold(fold);
  validate_config(cfg);
  const StagePaths paths = stage_paths(out_dir, fold);
  const FvEncoder enc = require_encoder(paths, fold);
  const AuNetwork au = require_au(paths, fold);

  const std::vector<int> train_idx = segments_in_folds(dataset, other_folds(fold));
  const std::vector<int> heldout_idx = segments_in_folds(dataset, {fold});
  std::vector<int> all_idx = train_idx;
  all_idx.insert(all_idx.end(), heldout_idx.begin(), heldout_idx.end());
  const std::vector<Eigen::MatrixXd> encoded =
      encode_segments(dataset, enc, all_idx, cfg.frame_stride);

  const std::vector<VideoFeatures> train_videos =
      fold_video_features(dataset, au, encoded, other_folds(fold));
  const std::vector<VideoFeatures> heldout_videos =
      fold_video_features(dataset, au, encoded, {fold});

  SiameseConfig sc;
  sc.hidden_dim = cfg.siamese_hidden;
  sc.depth = cfg.siamese_layers;
  sc.margin = cfg.margin;
  sc.positive_term = positive_term_form(cfg);
  sc.epochs = cfg.siamese_epochs;
  sc.lr = cfg.siamese_lr;
  sc.lr_decay = cfg.lr_decay;
  sc.clip_norm = cfg.clip_norm;
  sc.seed = derive_seed(cfg.seed, "siamese", static_cast<std::uint64_t>(fold));
  sc.pairs_per_epoch = cfg.pairs_per_epoch;

  SiameseTrainResult result = train_siamese(make_siamese_network(au.feature_dim(), sc),
                                            train_videos, heldout_videos, sc);
  save_siamese_network(result.net, paths.siamese_checkpoint);

  std::ostringstream log;
  log << "epoch,train_loss,heldout_auc\n";
  for (const SiameseEpochLog& e : result.log) {
    log << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.heldout_auc)
        << "\n";
  }
  write_text(paths.siamese_log, log.str());
}

FoldEvaluation evaluate_fold(const Dataset& dataset, const RunConfig& cfg, int fold,
                             const std::filesystem::path& out_dir, const std::string& method) {
  check_fold(fold);
  validate_config(cfg);
  if (method != kMethodSiamese && method != kMethodCosine) {
    throw ConfigError("unknown method '" + method + "'; valid methods: siamese, cosine_baseline");
  }
  const StagePaths paths = stage_paths(out_dir, fold);
  const FvEncoder enc = require_encoder(paths, fold);
  const AuNetwork au = require_au(paths, fold);

  const std::vector<int> heldout_idx = segments_in_folds(dataset, {fold});
  const std::vector<Eigen::MatrixXd> encoded =
      encode_segments(dataset, enc, heldout_idx, cfg.frame_stride);
  const std::vector<VideoFeatures> videos = fold_video_features(dataset, au, encoded, {fold});
  const PairSet set = make_pairs(videos);

  FoldEvaluation eval;
  eval.scored.reserve(set.pairs.size());
  if (method == kMethodSiamese) {
    const LstmStack siamese = require_siamese(paths, fold);
    std::vector<Eigen::VectorXd> embeddings;
    embeddings.reserve(videos.size());
    for (const VideoFeatures& v : videos) embeddings.push_back(embed(siamese, v.features));
    for (const VideoPair& p : set.pairs) {
      eval.scored.push_back({videos[p.inst_index].video_id, videos[p.user_index].video_id,
                             p.label,
                             -(embeddings[p.inst_index] - embeddings[p.user_index]).norm()});
    }
  } else {
    for (const VideoPair& p : set.pairs) {
      eval.scored.push_back({videos[p.inst_index].video_id, videos[p.user_index].video_id,
                             p.label,
                             baseline_cosine(videos[p.inst_index].features,
                                             videos[p.user_index].features, cfg.alpha)});
    }
  }

  const RocCurve curve = roc_auc(eval.scored);
  write_scores_csv(paths.fold_dir / ("scores_" + method + ".csv"), eval.scored);
  write_roc_csv(paths.fold_dir / ("roc_" + method + ".csv"), curve);

  eval.result.fold = fold;
  eval.result.auc = curve.auc;
  eval.result.accuracy = classify_accuracy(au, make_samples(dataset, encoded, heldout_idx));
  eval.result.pairs = static_cast<long long>(set.pairs.size());
  eval.result.positives = set.positives;
  eval.result.negatives = set.negatives;
  return eval;
}

EvalReport evaluate_all(const Dataset& dataset, const RunConfig& cfg,
                        const std::filesystem::path& out_dir, const std::string& method) {
  EvalReport report;
  report.method = method;
  report.seed = cfg.seed;
  std::vector<ScoredPair> pooled;
  for (int fold = 0; fold < kFoldCount; ++fold) {
    FoldEvaluation eval = evaluate_fold(dataset, cfg, fold, out_dir, method);
    report.folds.push_back(eval.result);
    pooled.insert(pooled.end(), eval.scored.begin(), eval.scored.end());
  }
  finalize_report(report);
  const RocCurve pooled_curve = roc_auc(pooled);
  report.pooled_auc = pooled_curve.auc;
  write_roc_csv(out_dir / ("roc_" + method + "_pooled.csv"), pooled_curve);
  write_text(out_dir / ("report_" + method + ".json"), report_to_json(report));
  return report;
}

EvalReport cross_validate(const Dataset& dataset, const RunConfig& cfg,
                          const std::filesystem::path& out_dir, const std::string& method) {
  validate_config(cfg);
  if (method != kMethodSiamese && method != kMethodCosine) {
    throw ConfigError("unknown method '" + method + "'; valid methods: siamese, cosine_baseline");
  }
  for (int fold = 0; fold < kFoldCount; ++fold) {
    run_encoder_stage(dataset, cfg, fold, out_dir);
    run_au_stage(dataset, cfg, fold, out_dir);
    if (method == kMethodSiamese) run_siamese_stage(dataset, cfg, fold, out_dir);
  }
  return evaluate_all(dataset, cfg, out_dir, method);
}

}  // namespace skilleval
