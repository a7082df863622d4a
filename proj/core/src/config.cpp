#include "skilleval/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "skilleval/errors.hpp"
#include "skilleval/tensor_io.hpp"

namespace skilleval {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long long parse_integer(const std::string& key, const std::string& value) {
  long long out = 0;
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key '" + key + "': invalid integer '" + value + "'");
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field int_field(const char* key, T RunConfig::* member) {
  return {key,
          [member](const RunConfig& c) { return std::to_string(c.*member); },
          [key, member](RunConfig& c, const std::string& v) {
            c.*member = static_cast<T>(parse_integer(key, v));
          }};
}

Field double_field(const char* key, double RunConfig::* member) {
  return {key,
          [member](const RunConfig& c) { return format_double(c.*member); },
          [key, member](RunConfig& c, const std::string& v) {
            try {
              c.*member = parse_double(v, std::string("config key '") + key + "'");
            } catch (const FormatError& e) {
              // A bad value in a config is a configuration error, same as
              // the integer fields, not a file-format error.
              throw ConfigError(e.what());
            }
          }};
}

Field string_field(const char* key, std::string RunConfig::* member) {
  return {key, [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string& v) { c.*member = v; }};
}

// Sorted by key; config_to_text relies on that order.
const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      double_field("alpha", &RunConfig::alpha),
      int_field("au_epochs", &RunConfig::au_epochs),
      int_field("au_hidden", &RunConfig::au_hidden),
      int_field("au_layers", &RunConfig::au_layers),
      double_field("au_lr", &RunConfig::au_lr),
      double_field("clip_norm", &RunConfig::clip_norm),
      int_field("d_pca", &RunConfig::d_pca),
      int_field("d_raw", &RunConfig::d_raw),
      string_field("data_dir", &RunConfig::data_dir),
      int_field("em_iters", &RunConfig::em_iters),
      int_field("frame_stride", &RunConfig::frame_stride),
      int_field("frames_max", &RunConfig::frames_max),
      int_field("frames_min", &RunConfig::frames_min),
      int_field("gmm_k", &RunConfig::gmm_k),
      double_field("lr_decay", &RunConfig::lr_decay),
      double_field("margin", &RunConfig::margin),
      int_field("n_subjects", &RunConfig::n_subjects),
      double_field("noise_level", &RunConfig::noise_level),
      string_field("out_dir", &RunConfig::out_dir),
      int_field("pairs_per_epoch", &RunConfig::pairs_per_epoch),
      string_field("positive_term", &RunConfig::positive_term),
      {"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_integer("seed", v));
       }},
      int_field("siamese_epochs", &RunConfig::siamese_epochs),
      int_field("siamese_hidden", &RunConfig::siamese_hidden),
      int_field("siamese_layers", &RunConfig::siamese_layers),
      double_field("siamese_lr", &RunConfig::siamese_lr),
      double_field("variance_floor", &RunConfig::variance_floor),
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void validate_config(const RunConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(cfg.n_subjects >= 4, "n_subjects must be >= 4 (one per fold)");
  require(cfg.frames_min >= 2, "frames_min must be >= 2");
  require(cfg.frames_max >= cfg.frames_min, "frames_max must be >= frames_min");
  require(cfg.d_raw >= 1, "d_raw must be >= 1");
  require(cfg.noise_level >= 0.0, "noise_level must be >= 0");
  require(cfg.d_pca >= 1, "d_pca must be >= 1");
  require(cfg.d_pca <= cfg.d_raw, "d_pca must be <= d_raw");
  require(cfg.gmm_k >= 1, "gmm_k must be >= 1");
  require(cfg.em_iters >= 0, "em_iters must be >= 0");
  require(cfg.variance_floor > 0.0, "variance_floor must be > 0");
  require(cfg.au_hidden >= 1, "au_hidden must be >= 1");
  require(cfg.au_layers >= 1, "au_layers must be >= 1");
  require(cfg.au_epochs >= 0, "au_epochs must be >= 0");
  require(cfg.au_lr > 0.0, "au_lr must be > 0");
  require(cfg.frame_stride >= 1, "frame_stride must be >= 1");
  require(cfg.siamese_hidden >= 1, "siamese_hidden must be >= 1");
  require(cfg.siamese_layers >= 1, "siamese_layers must be >= 1");
  require(cfg.siamese_epochs >= 0, "siamese_epochs must be >= 0");
  require(cfg.siamese_lr > 0.0, "siamese_lr must be > 0");
  require(cfg.margin > 0.0, "margin must be > 0");
  require(cfg.positive_term == "paper_linear" || cfg.positive_term == "squared",
          "positive_term must be 'paper_linear' or 'squared'");
  require(cfg.pairs_per_epoch >= 0, "pairs_per_epoch must be >= 0");
  require(cfg.clip_norm > 0.0, "clip_norm must be > 0");
  require(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0, "lr_decay must be in (0, 1]");
  require(cfg.alpha > 0.0 && cfg.alpha <= 1.0, "alpha must be in (0, 1]");
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    find_field(key).set(base, value);
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), std::move(base));
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_field(key).set(cfg, trim(value));
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const Field& f : fields()) out << f.key << " = " << f.get(cfg) << "\n";
  return out.str();
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << config_to_text(cfg);
}

PositiveTermForm positive_term_form(const RunConfig& cfg) {
  if (cfg.positive_term == "paper_linear") return PositiveTermForm::paper_linear;
  if (cfg.positive_term == "squared") return PositiveTermForm::squared;
  throw ConfigError("positive_term must be 'paper_linear' or 'squared'");
}

}  // namespace skilleval
