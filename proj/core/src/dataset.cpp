#include "skilleval/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "skilleval/errors.hpp"
#include "skilleval/parallel.hpp"
#include "skilleval/rng.hpp"
#include "skilleval/tensor_io.hpp"

namespace skilleval {
namespace {

using nlohmann::json;

constexpr int kClassCount = 48;
// Fixed tag for the class-template streams; templates are a property of the
// catalog, independent of any dataset seed.
constexpr std::uint64_t kTemplateSeed = 0x534b494c4c45564cull;

struct ActivityRow {
  const char* name;
  std::vector<const char*> units;
};

const std::vector<ActivityRow>& activity_rows() {
  static const std::vector<ActivityRow> rows = {
      {"Coffee", {"take cup", "pour coffee", "pour milk", "pour sugar", "spoon sugar", "stir coffee"}},
      {"Milk", {"take cup", "spoon powder", "pour milk", "stir milk"}},
      {"Juice",
       {"take squeezer", "take glass", "take plate", "take knife", "cut orange", "squeeze orange",
        "pour juice"}},
      {"Tea", {"take cup", "add teabag", "pour water", "spoon sugar", "pour sugar", "stir tea"}},
      {"Cereals", {"take bowl", "pour cereals", "pour milk", "stir cereals"}},
      {"Fried Egg",
       {"pour oil", "butter pan", "take egg", "crack egg", "fry egg", "take plate",
        "add salt and pepper", "put egg onto plate"}},
      {"Pancakes",
       {"take bowl", "crack egg", "spoon flour", "pour flour", "pour milk", "stir dough",
        "pour oil", "butter pan", "pour dough into pan", "fry pancake", "take plate",
        "put pancake onto plate"}},
      {"Salad",
       {"take plate", "take knife", "peel fruit", "cut fruit", "take bowl", "put fruit to bowl",
        "stir fruit"}},
      {"Sandwich",
       {"take plate", "take knife", "cut bun", "take butter", "smear butter", "take topping",
        "add topping", "put bun together"}},
      {"Scrambled Egg",
       {"pour oil", "butter pan", "take bowl", "crack egg", "stir egg", "pour egg into pan",
        "stir fry egg", "add salt and pepper", "take plate", "put egg onto plate"}},
  };
  return rows;
}

Catalog build_catalog() {
  Catalog cat;
  std::unordered_map<std::string, int> ids;
  for (const auto& row : activity_rows()) {
    ActivityGrammar g;
    g.id = static_cast<int>(cat.activities.size());
    g.name = row.name;
    for (const char* unit : row.units) {
      auto it = ids.find(unit);
      int id;
      if (it == ids.end()) {
        id = static_cast<int>(cat.classes.size());
        ids.emplace(unit, id);
        cat.classes.push_back({id, unit});
      } else {
        id = it->second;
      }
      g.units.push_back(id);
    }
    cat.activities.push_back(std::move(g));
  }
  // Background class completing the 48-class vocabulary.
  cat.classes.push_back({static_cast<int>(cat.classes.size()), "SIL"});
  if (cat.class_count() != kClassCount) {
    throw std::logic_error("catalog class count mismatch");
  }
  return cat;
}

int signal_dims(int d_raw) { return std::min(8, d_raw); }

void validate_config(const GenConfig& c) {
  if (c.n_subjects < 4) throw ConfigError("n_subjects must be >= 4, got " + std::to_string(c.n_subjects));
  if (c.frames_min < 2) throw ConfigError("frames_min must be >= 2, got " + std::to_string(c.frames_min));
  if (c.frames_max < c.frames_min) {
    throw ConfigError("frames_max must be >= frames_min, got " + std::to_string(c.frames_max));
  }
  if (c.d_raw < 2) throw ConfigError("d_raw must be >= 2, got " + std::to_string(c.d_raw));
  if (!(c.noise_level >= 0.0)) throw ConfigError("noise_level must be >= 0");
}

std::string segment_filename(const SegmentRecord& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "sub%03d_act%02d_pos%02d.fseq", s.subject_id, s.activity_id,
                s.position);
  return buf;
}

void write_feature_file(const std::filesystem::path& path, const Eigen::MatrixXd& frames) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << "SKILLEVAL-FSEQ v1 T=" << frames.rows() << " D=" << frames.cols() << '\n';
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    for (Eigen::Index d = 0; d < frames.cols(); ++d) {
      double v = frames(t, d);
      if (!std::isfinite(v)) throw FormatError("non-finite frame value writing " + path.string());
      if (d) out << ' ';
      out << format_double(v);
    }
    out << '\n';
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

Eigen::MatrixXd read_feature_file(const std::filesystem::path& path, int expected_t,
                                  int expected_d) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing feature file: " + path.string());
  const std::string where = path.string();
  std::string line;
  if (!std::getline(in, line)) throw FormatError(where + ": empty file");
  int t = -1, d = -1;
  if (std::sscanf(line.c_str(), "SKILLEVAL-FSEQ v1 T=%d D=%d", &t, &d) != 2 || t < 1 || d < 1) {
    throw FormatError(where + ": bad header '" + line + "'");
  }
  if (t != expected_t || d != expected_d) {
    throw FormatError(where + ": header T=" + std::to_string(t) + " D=" + std::to_string(d) +
                      " does not match manifest (T=" + std::to_string(expected_t) +
                      " D=" + std::to_string(expected_d) + ")");
  }
  Eigen::MatrixXd frames(t, d);
  for (int r = 0; r < t; ++r) {
    if (!std::getline(in, line)) throw FormatError(where + ": truncated at row " + std::to_string(r));
    std::istringstream row(line);
    std::string tok;
    for (int c = 0; c < d; ++c) {
      if (!(row >> tok)) throw FormatError(where + ": row " + std::to_string(r) + " too short");
      frames(r, c) = parse_double(tok, where);
    }
    std::string extra;
    if (row >> extra) throw FormatError(where + ": row " + std::to_string(r) + " has trailing data");
  }
  return frames;
}

}  // namespace

int Catalog::class_id(const std::string& name) const {
  for (const auto& c : classes) {
    if (c.name == name) return c.id;
  }
  return -1;
}

const Catalog& default_catalog() {
  static const Catalog cat = build_catalog();
  return cat;
}

Eigen::VectorXd class_base(int unit_class, int d_raw) {
  const int s = signal_dims(d_raw);
  const int planes = std::max(1, s / 2);
  const int per_plane = (kClassCount + planes - 1) / planes;
  const int plane = unit_class % planes;
  const int slot = unit_class / planes;
  const double angle = 2.0 * M_PI * slot / per_plane;
  // Radius keeps the smallest in-plane chord >= 1.4, well clear of the
  // trajectory (0.3) + subject offset (0.25) envelopes.
  const double radius = std::max(4.0, 0.7 / std::sin(M_PI / per_plane));
  Eigen::VectorXd base = Eigen::VectorXd::Zero(d_raw);
  base(2 * plane) = radius * std::cos(angle);
  base(2 * plane + 1) = radius * std::sin(angle);
  return base;
}

Eigen::VectorXd class_template(int unit_class, double u, int d_raw) {
  const int s = signal_dims(d_raw);
  Eigen::VectorXd x = class_base(unit_class, d_raw);
  Rng rng(derive_seed(kTemplateSeed, "traj", static_cast<std::uint64_t>(unit_class)));
  const double amp = 0.3 / std::sqrt(static_cast<double>(s));
  for (int d = 0; d < s; ++d) {
    const double freq = 1.0 + static_cast<double>(rng.uniform_int(std::uint64_t{3}));
    const double phase = rng.uniform();
    x(d) += amp * std::sin(2.0 * M_PI * (freq * u + phase));
  }
  return x;
}

Dataset generate_dataset(const GenConfig& config) {
  validate_config(config);
  Dataset ds;
  ds.catalog = default_catalog();
  ds.seed = config.seed;
  ds.d_raw = config.d_raw;
  for (int s = 0; s < config.n_subjects; ++s) ds.folds[s % 4].push_back(s);

  const std::uint64_t gen_seed = derive_seed(config.seed, "gen");
  for (int subject = 0; subject < config.n_subjects; ++subject) {
    Rng rng(derive_seed(gen_seed, "subject", static_cast<std::uint64_t>(subject)));
    Eigen::VectorXd offset(config.d_raw);
    const double off_amp = 0.25 / std::sqrt(static_cast<double>(config.d_raw));
    for (int d = 0; d < config.d_raw; ++d) offset(d) = rng.uniform(-off_amp, off_amp);

    for (const auto& activity : ds.catalog.activities) {
      for (int pos = 0; pos < static_cast<int>(activity.units.size()); ++pos) {
        const int unit = activity.units[pos];
        const int frames =
            static_cast<int>(rng.uniform_int(config.frames_min, config.frames_max));
        SegmentRecord seg;
        seg.subject_id = subject;
        seg.activity_id = activity.id;
        seg.unit_class = unit;
        seg.position = pos;
        seg.frames.resize(frames, config.d_raw);
        for (int t = 0; t < frames; ++t) {
          const double u = static_cast<double>(t) / static_cast<double>(frames - 1);
          Eigen::VectorXd x = class_template(unit, u, config.d_raw) + offset;
          if (config.noise_level > 0.0) {
            for (int d = 0; d < config.d_raw; ++d) x(d) += config.noise_level * rng.normal();
          }
          seg.frames.row(t) = x.transpose();
        }
        ds.segments.push_back(std::move(seg));
      }
    }
  }
  return ds;
}

double frame_nearest_template_accuracy(const Dataset& dataset) {
  if (dataset.segments.empty()) throw ConfigError("dataset has no segments");
  const int d_raw = dataset.d_raw;
  Eigen::MatrixXd bases(kClassCount, d_raw);
  for (int c = 0; c < kClassCount; ++c) bases.row(c) = class_base(c, d_raw).transpose();

  std::vector<std::array<long, 2>> counts(dataset.segments.size());
  parallel_for(dataset.segments.size(), [&](std::size_t i) {
    const auto& seg = dataset.segments[i];
    long correct = 0;
    for (Eigen::Index t = 0; t < seg.frames.rows(); ++t) {
      Eigen::Index best = 0;
      (bases.rowwise() - seg.frames.row(t)).rowwise().squaredNorm().minCoeff(&best);
      if (static_cast<int>(best) == seg.unit_class) ++correct;
    }
    counts[i] = {correct, seg.frames.rows()};
  });
  long correct = 0, total = 0;
  for (const auto& c : counts) {
    correct += c[0];
    total += c[1];
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["seed"] = dataset.seed;
  manifest["d_raw"] = dataset.d_raw;
  json classes = json::array();
  for (const auto& c : dataset.catalog.classes) classes.push_back({{"id", c.id}, {"name", c.name}});
  manifest["classes"] = std::move(classes);
  json activities = json::array();
  for (const auto& a : dataset.catalog.activities) {
    activities.push_back({{"id", a.id}, {"name", a.name}, {"units", a.units}});
  }
  manifest["activities"] = std::move(activities);
  json folds = json::object();
  for (int f = 0; f < 4; ++f) folds[std::to_string(f)] = dataset.folds[f];
  manifest["folds"] = std::move(folds);
  json segments = json::array();
  for (const auto& seg : dataset.segments) {
    const std::string name = segment_filename(seg);
    segments.push_back({{"subject", seg.subject_id},
                        {"activity", seg.activity_id},
                        {"unit_class", seg.unit_class},
                        {"position", seg.position},
                        {"path", name},
                        {"frames", seg.frames.rows()}});
    write_feature_file(dir / name, seg.frames);
  }
  manifest["segments"] = std::move(segments);

  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("cannot open for writing: " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw FormatError("write failed: " + (dir / "manifest.json").string());
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("missing manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.d_raw = manifest.at("d_raw").get<int>();
    for (const auto& c : manifest.at("classes")) {
      ds.catalog.classes.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
    }
    for (const auto& a : manifest.at("activities")) {
      ActivityGrammar g;
      g.id = a.at("id").get<int>();
      g.name = a.at("name").get<std::string>();
      g.units = a.at("units").get<std::vector<int>>();
      ds.catalog.activities.push_back(std::move(g));
    }
    for (int f = 0; f < 4; ++f) {
      ds.folds[f] = manifest.at("folds").at(std::to_string(f)).get<std::vector<int>>();
    }
    for (const auto& s : manifest.at("segments")) {
      SegmentRecord seg;
      seg.subject_id = s.at("subject").get<int>();
      seg.activity_id = s.at("activity").get<int>();
      seg.unit_class = s.at("unit_class").get<int>();
      seg.position = s.at("position").get<int>();
      const auto path = dir / s.at("path").get<std::string>();
      seg.frames = read_feature_file(path, s.at("frames").get<int>(), ds.d_raw);
      ds.segments.push_back(std::move(seg));
    }
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }

  // Cross-checks: folds partition the subject set, grammar references exist.
  std::map<int, int> subject_fold_count;
  for (const auto& seg : ds.segments) subject_fold_count[seg.subject_id] = 0;
  for (int f = 0; f < 4; ++f) {
    for (int s : ds.folds[f]) {
      auto it = subject_fold_count.find(s);
      if (it == subject_fold_count.end()) {
        throw FormatError(manifest_path.string() + ": fold subject " + std::to_string(s) +
                          " has no segments");
      }
      it->second++;
    }
  }
  for (const auto& [subject, n] : subject_fold_count) {
    if (n != 1) {
      throw FormatError(manifest_path.string() + ": subject " + std::to_string(subject) +
                        " appears in " + std::to_string(n) + " folds");
    }
  }
  for (const auto& a : ds.catalog.activities) {
    for (int u : a.units) {
      if (u < 0 || u >= ds.catalog.class_count()) {
        throw FormatError(manifest_path.string() + ": activity " + a.name +
                          " references unknown class " + std::to_string(u));
      }
    }
  }
  return ds;
}

std::uint64_t dataset_dir_hash(const std::filesystem::path& dir) {
  auto hash_file = [](const std::filesystem::path& path, std::uint64_t h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("missing file: " + path.string());
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
      for (std::streamsize i = 0; i < in.gcount(); ++i) {
        h ^= static_cast<unsigned char>(buf[i]);
        h *= 0x100000001b3ull;
      }
    }
    return h;
  };
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = hash_file(dir / "manifest.json", h);

  std::ifstream in(dir / "manifest.json");
  json manifest;
  in >> manifest;
  for (const auto& s : manifest.at("segments")) {
    h = hash_file(dir / s.at("path").get<std::string>(), h);
  }
  return h;
}

std::vector<VideoRef> group_videos(const Dataset& dataset) {
  std::map<std::pair<int, int>, VideoRef> videos;
  const int n_act = dataset.catalog.activity_count();
  for (int i = 0; i < static_cast<int>(dataset.segments.size()); ++i) {
    const auto& seg = dataset.segments[i];
    auto key = std::make_pair(seg.subject_id, seg.activity_id);
    auto& v = videos[key];
    v.video_id = seg.subject_id * n_act + seg.activity_id;
    v.subject_id = seg.subject_id;
    v.activity_id = seg.activity_id;
    v.segment_indices.push_back(i);
  }
  std::vector<VideoRef> out;
  out.reserve(videos.size());
  for (auto& [key, v] : videos) {
    std::sort(v.segment_indices.begin(), v.segment_indices.end(), [&](int a, int b) {
      return dataset.segments[a].position < dataset.segments[b].position;
    });
    for (int k = 0; k < static_cast<int>(v.segment_indices.size()); ++k) {
      if (dataset.segments[v.segment_indices[k]].position != k) {
        throw FormatError("video subject " + std::to_string(v.subject_id) + " activity " +
                          std::to_string(v.activity_id) + " has a gap in unit positions");
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<int> segments_in_folds(const Dataset& dataset, const std::vector<int>& fold_ids) {
  std::vector<bool> subject_in(256, false);
  for (int f : fold_ids) {
    if (f < 0 || f > 3) throw ConfigError("fold id out of range: " + std::to_string(f));
    for (int s : dataset.folds[f]) {
      if (s >= static_cast<int>(subject_in.size())) subject_in.resize(s + 1, false);
      subject_in[s] = true;
    }
  }
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(dataset.segments.size()); ++i) {
    const int s = dataset.segments[i].subject_id;
    if (s < static_cast<int>(subject_in.size()) && subject_in[s]) out.push_back(i);
  }
  return out;
}

}  // namespace skilleval
