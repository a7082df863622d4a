#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "skilleval/siamese.hpp"

namespace skilleval {

// Every tunable of the pipeline in one flat struct. Text form is one
// "key = value" per line; unknown keys are rejected so typos fail loudly.
struct RunConfig {
  std::uint64_t seed = 1;

  // data generation
  int n_subjects = 8;
  int frames_min = 20;
  int frames_max = 60;
  int d_raw = 16;
  double noise_level = 0.0;

  // frame encoder
  int d_pca = 8;
  int gmm_k = 8;
  int em_iters = 25;
  double variance_floor = 1e-6;

  // segment classifier
  int au_hidden = 128;
  int au_layers = 2;
  int au_epochs = 12;
  double au_lr = 1e-3;
  int frame_stride = 1;

  // metric learning
  int siamese_hidden = 128;
  int siamese_layers = 2;
  int siamese_epochs = 12;
  double siamese_lr = 1e-3;
  double margin = 1.0;
  std::string positive_term = "paper_linear";  // or "squared"
  int pairs_per_epoch = 600;                   // 0 = every pair each epoch

  // shared
  double clip_norm = 5.0;
  double lr_decay = 0.9;  // per-epoch multiplier, both training stages
  double alpha = 0.5;     // pooled-cosine baseline exponent

  // locations (normally supplied as flags; flags win over file values)
  std::string data_dir;
  std::string out_dir;
};

// Range checks with field-named messages; throws ConfigError.
void validate_config(const RunConfig& cfg);

// Applies "key = value" lines from text on top of base. Full-line comments
// start with '#'. Throws ConfigError on unknown keys or bad values.
RunConfig parse_config_text(const std::string& text, RunConfig base = RunConfig{});

RunConfig load_config(const std::filesystem::path& path, RunConfig base = RunConfig{});

// Single key override (the CLI flag path). Throws on unknown key.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Every key in sorted order; parse_config_text(config_to_text(c)) == c.
std::string config_to_text(const RunConfig& cfg);

void save_config(const RunConfig& cfg, const std::filesystem::path& path);

PositiveTermForm positive_term_form(const RunConfig& cfg);

}  // namespace skilleval
