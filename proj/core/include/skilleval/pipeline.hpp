#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "skilleval/action_unit.hpp"
#include "skilleval/config.hpp"
#include "skilleval/dataset.hpp"
#include "skilleval/encoding.hpp"
#include "skilleval/evaluation.hpp"
#include "skilleval/siamese.hpp"

namespace skilleval {

inline constexpr int kFoldCount = 4;

// Artifact locations for one cross-validation fold under a run directory.
struct StagePaths {
  std::filesystem::path fold_dir;
  std::filesystem::path encoder;
  std::filesystem::path au_checkpoint;
  std::filesystem::path au_log;
  std::filesystem::path siamese_checkpoint;
  std::filesystem::path siamese_log;
};

StagePaths stage_paths(const std::filesystem::path& out_dir, int fold);

GenConfig gen_config(const RunConfig& cfg);

// Frames actually fed to the temporal model: every frame_stride-th row.
Eigen::MatrixXd strided_frames(const Eigen::MatrixXd& frames, int stride);

// Fits PCA+GMM on the training folds' frames and writes the encoder.
void run_encoder_stage(const Dataset& dataset, const RunConfig& cfg, int fold,
                       const std::filesystem::path& out_dir);

// Trains the segment classifier on encoded training segments; needs the
// fold's encoder checkpoint.
void run_au_stage(const Dataset& dataset, const RunConfig& cfg, int fold,
                  const std::filesystem::path& out_dir);

// Trains the pair-distance model on per-video feature lists; needs the
// fold's encoder and classifier checkpoints.
void run_siamese_stage(const Dataset& dataset, const RunConfig& cfg, int fold,
                       const std::filesystem::path& out_dir);

inline constexpr const char* kMethodSiamese = "siamese";
inline constexpr const char* kMethodCosine = "cosine_baseline";

struct FoldEvaluation {
  FoldResult result;
  std::vector<ScoredPair> scored;
};

// Scores every held-out pair of the fold with the given method and writes
// the fold's scores and ROC CSVs.
FoldEvaluation evaluate_fold(const Dataset& dataset, const RunConfig& cfg, int fold,
                             const std::filesystem::path& out_dir, const std::string& method);

// All four folds: per-fold CSVs, pooled ROC, report_<method>.json.
EvalReport evaluate_all(const Dataset& dataset, const RunConfig& cfg,
                        const std::filesystem::path& out_dir, const std::string& method);

// Full protocol: per fold, train encoder -> classifier -> distance model on
// the other three folds, then score the held-out fold; aggregates a report.
// The cosine baseline skips the distance-model stage.
EvalReport cross_validate(const Dataset& dataset, const RunConfig& cfg,
                          const std::filesystem::path& out_dir, const std::string& method);

}  // namespace skilleval
