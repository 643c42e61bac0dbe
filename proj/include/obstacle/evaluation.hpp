#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "obstacle/error.hpp"
#include "obstacle/mask.hpp"
#include "obstacle/types.hpp"

namespace obstacle {

enum class Task { depth, x_dir, y_dir, intensity };

inline constexpr std::array<Task, 4> kAllTasks{Task::depth, Task::x_dir, Task::y_dir,
                                               Task::intensity};

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::depth: return "depth";
    case Task::x_dir: return "x_dir";
    case Task::y_dir: return "y_dir";
    case Task::intensity: return "intensity";
  }
  throw InvariantError("bad task");
}

struct LabelKey {
  int frame_index = 0;
  std::int64_t object_id = 0;

  friend auto operator<=>(const LabelKey&, const LabelKey&) = default;
};

struct LabeledEntry {
  LabelKey key;
  LabelSet labels;

  friend bool operator==(const LabeledEntry&, const LabeledEntry&) = default;
};

// Ground-truth rows exclude `unknown`; depth predictions may still be
// `unknown`, which gets its own column.
inline std::vector<std::string_view> row_labels(Task t) {
  switch (t) {
    case Task::depth: return {kDepthNames.begin(), kDepthNames.end() - 1};
    case Task::x_dir: return {kXDirNames.begin(), kXDirNames.end()};
    case Task::y_dir: return {kYDirNames.begin(), kYDirNames.end()};
    case Task::intensity: return {kIntensityNames.begin(), kIntensityNames.end()};
  }
  throw InvariantError("bad task");
}

inline std::vector<std::string_view> column_labels(Task t) {
  if (t == Task::depth) return {kDepthNames.begin(), kDepthNames.end()};
  return row_labels(t);
}

inline std::size_t label_index(const LabelSet& l, Task t) {
  switch (t) {
    case Task::depth: return static_cast<std::size_t>(l.depth);
    case Task::x_dir: return static_cast<std::size_t>(l.x_dir);
    case Task::y_dir: return static_cast<std::size_t>(l.y_dir);
    case Task::intensity: return static_cast<std::size_t>(l.intensity);
  }
  throw InvariantError("bad task");
}

struct MatchedPair {
  LabelKey key;
  LabelSet predicted;
  LabelSet truth;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;  // ordered by key
  std::vector<LabelKey> unmatched_predictions;
  std::vector<LabelKey> unmatched_ground_truth;
};

// Exact (frame_index, object_id) join. Duplicate keys on either side are rejected.
inline MatchResult match_objects(const std::vector<LabeledEntry>& predictions,
                                 const std::vector<LabeledEntry>& ground_truth) {
  auto index = [](const std::vector<LabeledEntry>& entries, const char* side) {
    std::map<LabelKey, LabelSet> m;
    for (const auto& e : entries) {
      if (!m.emplace(e.key, e.labels).second) {
        throw ValidationError(side, "duplicate key (frame " + std::to_string(e.key.frame_index) +
                                        ", object " + std::to_string(e.key.object_id) + ")");
      }
    }
    return m;
  };
  const auto pred = index(predictions, "predictions");
  const auto gt = index(ground_truth, "ground_truth");
  MatchResult out;
  for (const auto& [key, labels] : gt) {
    const auto it = pred.find(key);
    if (it == pred.end()) {
      out.unmatched_ground_truth.push_back(key);
    } else {
      out.pairs.push_back({key, it->second, labels});
    }
  }
  for (const auto& [key, _] : pred) {
    if (!gt.count(key)) out.unmatched_predictions.push_back(key);
  }
  return out;
}

// Raw counts, ground truth in rows and predictions in columns.
struct ConfusionMatrix {
  Task task = Task::depth;
  std::vector<std::string_view> rows;
  std::vector<std::string_view> columns;
  std::vector<std::vector<std::uint64_t>> counts;

  std::uint64_t row_total(std::size_t r) const {
    std::uint64_t s = 0;
    for (auto c : counts[r]) s += c;
    return s;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) s += row_total(r);
    return s;
  }
  std::uint64_t correct() const {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) s += counts[r][r];
    return s;
  }
};

inline ConfusionMatrix empty_confusion(Task task) {
  ConfusionMatrix m;
  m.task = task;
  m.rows = row_labels(task);
  m.columns = column_labels(task);
  m.counts.assign(m.rows.size(), std::vector<std::uint64_t>(m.columns.size(), 0));
  return m;
}

inline ConfusionMatrix build_confusion(const std::vector<MatchedPair>& pairs, Task task) {
  ConfusionMatrix m = empty_confusion(task);
  for (const auto& p : pairs) {
    const std::size_t r = label_index(p.truth, task);
    const std::size_t c = label_index(p.predicted, task);
    if (r >= m.rows.size()) throw ValidationError("ground_truth", "depth may not be unknown");
    ++m.counts[r][c];
  }
  return m;
}

// Trace over total.
inline double accuracy(const ConfusionMatrix& m) {
  const auto total = m.total();
  if (total == 0) {
    throw ValidationError(std::string(to_string(m.task)), "accuracy of an empty matrix");
  }
  return static_cast<double>(m.correct()) / static_cast<double>(total);
}

// Fraction rendered as a percentage with two decimals: 0.8175 -> "81.75".
inline std::string format_percent(double fraction) {
  const long long q = std::llround(fraction * 10000.0);
  const long long whole = q / 100;
  const long long frac = q % 100;
  std::string s = std::to_string(whole) + ".";
  if (frac < 10) s += '0';
  s += std::to_string(frac);
  return s;
}

inline std::string matrix_csv(const ConfusionMatrix& m) {
  std::string out = "ground_truth";
  for (auto c : m.columns) out += "," + std::string(c);
  out += ",total";
  for (auto c : m.columns) out += ",pct_" + std::string(c);
  out += '\n';
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const auto total = m.row_total(r);
    out += std::string(m.rows[r]);
    for (auto c : m.counts[r]) out += "," + std::to_string(c);
    out += "," + std::to_string(total);
    for (auto c : m.counts[r]) {
      const double frac = total == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(total);
      out += "," + format_percent(frac);
    }
    out += '\n';
  }
  return out;
}

// Per-task accuracy; tasks with no matched pairs are omitted.
inline std::string accuracy_csv(const std::vector<ConfusionMatrix>& matrices) {
  std::string out = "task,correct,total,accuracy_percent\n";
  for (const auto& m : matrices) {
    if (m.total() == 0) continue;
    out += std::string(to_string(m.task)) + "," + std::to_string(m.correct()) + "," +
           std::to_string(m.total()) + "," + format_percent(accuracy(m)) + "\n";
  }
  return out;
}

inline std::string confusion_file_name(Task t) {
  return "confusion_" + std::string(to_string(t)) + ".csv";
}

inline void render_report(const std::vector<ConfusionMatrix>& matrices,
                          const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open " + p.string());
    out << text;
    if (!out) throw IoError("cannot write " + p.string());
  };
  for (const auto& m : matrices) write(out_dir / confusion_file_name(m.task), matrix_csv(m));
  write(out_dir / "accuracy.csv", accuracy_csv(matrices));
}

struct Evaluation {
  MatchResult match;
  std::vector<ConfusionMatrix> matrices;  // in kAllTasks order
};

inline Evaluation evaluate(const std::vector<LabeledEntry>& predictions,
                           const std::vector<LabeledEntry>& ground_truth) {
  Evaluation ev;
  ev.match = match_objects(predictions, ground_truth);
  for (Task t : kAllTasks) ev.matrices.push_back(build_confusion(ev.match.pairs, t));
  return ev;
}

namespace detail {

inline LabelSet parse_labels(const nlohmann::json& obj, const std::string& where,
                             bool ground_truth) {
  auto text = [&](const char* field) {
    const auto& v = obj.at(field);
    if (!v.is_string()) throw ValidationError(where + "." + field, "expected a label string");
    return v.get<std::string>();
  };
  auto bad = [&](const char* field, const std::string& value) {
    return ValidationError(where + "." + field, "unknown label '" + value + "'");
  };
  LabelSet l;
  const std::string depth = text("depth");
  const auto d = parse_depth_label(depth);
  if (!d || (ground_truth && *d == DepthLabel::unknown)) throw bad("depth", depth);
  l.depth = *d;
  const std::string xs = text("x_dir");
  const auto x = parse_x_dir_label(xs);
  if (!x) throw bad("x_dir", xs);
  l.x_dir = *x;
  const std::string ys = text("y_dir");
  const auto y = parse_y_dir_label(ys);
  if (!y) throw bad("y_dir", ys);
  l.y_dir = *y;
  const std::string is = text("intensity");
  const auto i = parse_intensity_label(is);
  if (!i) throw bad("intensity", is);
  l.intensity = *i;
  return l;
}

}  // namespace detail

// Reads label entries from analysis.json (predictions) or groundtruth.json.
// Both share {"frames":[{"frame_index":k,"objects":[{"object_id":..,
// "depth":..,"x_dir":..,"y_dir":..,"intensity":..}]}]}.
inline std::vector<LabeledEntry> parse_label_entries(const nlohmann::json& doc,
                                                     bool ground_truth) {
  using detail::json;
  const std::string root = ground_truth ? "groundtruth" : "analysis";
  detail::require_keys(doc, root, {"frames"});
  const json& frames = doc.at("frames");
  if (!frames.is_array()) throw ValidationError(root + ".frames", "expected an array");
  std::vector<LabeledEntry> out;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const std::string fwhere = "frames[" + std::to_string(fi) + "]";
    const json& f = frames[fi];
    detail::require_keys(f, fwhere, {"frame_index", "objects"});
    const int frame = detail::json_int32(f.at("frame_index"), fwhere + ".frame_index");
    const json& objects = f.at("objects");
    if (!objects.is_array()) throw ValidationError(fwhere + ".objects", "expected an array");
    for (std::size_t oi = 0; oi < objects.size(); ++oi) {
      const std::string where = fwhere + ".objects[" + std::to_string(oi) + "]";
      const json& o = objects[oi];
      if (ground_truth) {
        if (!o.is_object()) throw ValidationError(where, "expected an object");
        static const std::set<std::string> allowed{"object_id", "class_name", "depth",
                                                   "x_dir",     "y_dir",      "intensity"};
        for (const auto& [k, _] : o.items()) {
          if (!allowed.count(k)) throw ValidationError(where + "." + k, "unknown field");
        }
        for (const char* k : {"object_id", "depth", "x_dir", "y_dir", "intensity"}) {
          if (!o.contains(k)) throw ValidationError(where + "." + k, "missing field");
        }
      } else {
        detail::require_keys(o, where,
                             {"object_id", "class_name", "mean_disparity",
                              "valid_disparity_count", "xM", "yM", "VL", "pixel_count",
                              "has_flow", "depth", "x_dir", "y_dir", "intensity", "mask"});
      }
      LabeledEntry e;
      e.key = {frame, detail::json_int(o.at("object_id"), where + ".object_id")};
      e.labels = detail::parse_labels(o, where, ground_truth);
      out.push_back(e);
    }
  }
  return out;
}

inline std::vector<LabeledEntry> load_label_entries(const std::filesystem::path& path,
                                                    bool ground_truth) {
  try {
    return parse_label_entries(detail::parse_json_file(path), ground_truth);
  } catch (const ValidationError& e) {
    throw ValidationError(path.filename().string() + ": " + e.key(), e.message());
  }
}

struct GroundTruthObject {
  std::int64_t object_id = 0;
  std::string class_name;
  LabelSet labels;
};

struct GroundTruthFrame {
  int frame_index = 0;
  std::vector<GroundTruthObject> objects;
};

inline nlohmann::json groundtruth_to_json(const std::vector<GroundTruthFrame>& frames) {
  nlohmann::json jf = nlohmann::json::array();
  for (const auto& f : frames) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : f.objects) {
      if (o.labels.depth == DepthLabel::unknown) {
        throw ValidationError("groundtruth", "depth may not be unknown");
      }
      objs.push_back({{"object_id", o.object_id},
                      {"class_name", o.class_name},
                      {"depth", to_string(o.labels.depth)},
                      {"x_dir", to_string(o.labels.x_dir)},
                      {"y_dir", to_string(o.labels.y_dir)},
                      {"intensity", to_string(o.labels.intensity)}});
    }
    jf.push_back({{"frame_index", f.frame_index}, {"objects", std::move(objs)}});
  }
  return {{"frames", std::move(jf)}};
}

}  // namespace obstacle
