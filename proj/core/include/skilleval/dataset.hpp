#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace skilleval {

struct ActionUnitClass {
  int id = 0;
  std::string name;
};

struct ActivityGrammar {
  int id = 0;
  std::string name;
  std::vector<int> units;  // ordered action-unit class ids
};

struct Catalog {
  std::vector<ActionUnitClass> classes;
  std::vector<ActivityGrammar> activities;

  int class_count() const { return static_cast<int>(classes.size()); }
  int activity_count() const { return static_cast<int>(activities.size()); }
  int class_id(const std::string& name) const;  // -1 when absent
};

// The built-in catalog: 10 cooking activities over 48 action-unit classes.
// 47 classes appear in the activity grammars; the background class "SIL"
// completes the 48-class vocabulary.
const Catalog& default_catalog();

struct GenConfig {
  int n_subjects = 8;
  int frames_min = 20;
  int frames_max = 60;
  int d_raw = 16;
  double noise_level = 0.0;
  std::uint64_t seed = 1;
};

struct SegmentRecord {
  int subject_id = 0;
  int activity_id = 0;
  int unit_class = 0;
  int position = 0;        // index of this unit within its video
  Eigen::MatrixXd frames;  // T x d_raw, one row per frame
};

struct Dataset {
  Catalog catalog;
  std::uint64_t seed = 0;
  int d_raw = 0;
  std::array<std::vector<int>, 4> folds;  // fold id -> subject ids
  std::vector<SegmentRecord> segments;    // subject-major, then activity, then position
};

// Synthetic per-frame signal model. Each class owns a fixed anchor point in
// an 8-dimensional (or smaller, when d_raw < 8) signal subspace plus a
// smooth class-specific trajectory over normalized segment time, so class
// identity survives PCA and temporal order carries information. Subjects
// add a small constant offset; noise_level scales i.i.d. Gaussian noise.
Eigen::VectorXd class_base(int unit_class, int d_raw);
Eigen::VectorXd class_template(int unit_class, double u, int d_raw);

// One video per (subject, activity): one segment per grammar unit. Subjects
// are assigned round-robin to the four folds. Deterministic per seed; each
// subject draws from its own derived sub-stream.
Dataset generate_dataset(const GenConfig& config);

// Fraction of frames whose nearest class anchor equals their own class.
// 1.0 at noise_level 0; degrades as noise grows (the learnability knob).
double frame_nearest_template_accuracy(const Dataset& dataset);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

// FNV-1a over the manifest and every feature file, in manifest order.
std::uint64_t dataset_dir_hash(const std::filesystem::path& dir);

struct VideoRef {
  int video_id = 0;  // subject_id * activity_count + activity_id
  int subject_id = 0;
  int activity_id = 0;
  std::vector<int> segment_indices;  // ordered by position
};

std::vector<VideoRef> group_videos(const Dataset& dataset);

// Indices of segments whose subject lies in any of the given folds.
std::vector<int> segments_in_folds(const Dataset& dataset, const std::vector<int>& fold_ids);

}  // namespace skilleval
