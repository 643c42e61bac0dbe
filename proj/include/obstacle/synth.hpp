#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "obstacle/config.hpp"
#include "obstacle/error.hpp"
#include "obstacle/evaluation.hpp"
#include "obstacle/image.hpp"
#include "obstacle/mask.hpp"
#include "obstacle/types.hpp"

// Deterministic synthetic scenes with analytically known disparity, flow,
// masks and labels.
namespace obstacle::synth {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

// Uniform value in [0,1) attached to an integer lattice point.
inline double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy) noexcept {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy) * 0xd6e8feb86659fd93ULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double value_noise(std::uint64_t seed, double x, double y, double cell) noexcept {
  const double gx = x / cell;
  const double gy = y / cell;
  const double fx0 = std::floor(gx);
  const double fy0 = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx0);
  const auto iy = static_cast<std::int64_t>(fy0);
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double sx = smooth(gx - fx0);
  const double sy = smooth(gy - fy0);
  const double v00 = lattice_value(seed, ix, iy);
  const double v10 = lattice_value(seed, ix + 1, iy);
  const double v01 = lattice_value(seed, ix, iy + 1);
  const double v11 = lattice_value(seed, ix + 1, iy + 1);
  return (1.0 - sy) * ((1.0 - sx) * v00 + sx * v10) + sy * ((1.0 - sx) * v01 + sx * v11);
}

// Multi-octave value noise with stretched contrast. Continuous in (x, y), so
// subpixel translations of the pattern are exact.
struct Texture {
  std::uint64_t seed = 0;

  double operator()(double x, double y) const noexcept {
    static constexpr std::array<double, 4> kCells{2.0, 4.0, 8.0, 16.0};
    static constexpr std::array<double, 4> kWeights{0.15, 0.25, 0.3, 0.3};
    double v = 0.0;
    for (std::size_t o = 0; o < kCells.size(); ++o) {
      v += kWeights[o] * value_noise(mix_seed(seed, o + 1), x, y, kCells[o]);
    }
    return std::clamp(0.5 + 2.2 * (v - 0.5), 0.0, 1.0);
  }
};

// img(x, y) = texture(x + ox, y + oy).
inline ImageBuffer render_texture(const Texture& t, int width, int height, double ox = 0.0,
                                  double oy = 0.0) {
  std::vector<float> data(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      data[static_cast<std::size_t>(y) * width + x] = static_cast<float>(t(x + ox, y + oy));
    }
  }
  return ImageBuffer(width, height, std::move(data));
}

// Rectified pair with uniform disparity `shift`: right(x) = left(x + shift).
inline StereoPair make_shifted_pair(int width, int height, double shift, std::uint64_t seed,
                                    int frame_index = 0) {
  const Texture t{seed};
  return StereoPair(render_texture(t, width, height), render_texture(t, width, height, shift),
                    frame_index);
}

// Consecutive frames under a global translation: next(p + (du, dv)) = prev(p).
inline std::pair<ImageBuffer, ImageBuffer> make_translated_frames(int width, int height,
                                                                  double du, double dv,
                                                                  std::uint64_t seed) {
  const Texture t{seed};
  return {render_texture(t, width, height), render_texture(t, width, height, -du, -dv)};
}

struct Actor {
  std::int64_t object_id = 0;
  std::string class_name;
  int width = 0;
  int height = 0;
  double x0 = 0.0;  // top-left corner in frame 0, left image
  double y0 = 0.0;
  double vx = 0.0;  // pixels per frame
  double vy = 0.0;
  double disparity = 0.0;
  std::uint64_t texture_seed = 0;

  double x_at(int frame) const noexcept { return x0 + frame * vx; }
  double y_at(int frame) const noexcept { return y0 + frame * vy; }
};

struct SceneScript {
  int width = 0;
  int height = 0;
  int frame_count = 0;
  std::uint64_t background_seed = 0;
  std::vector<Actor> actors;
};

inline constexpr double kMaxActorSpeed = 16.0;

namespace detail {

// Pixel columns [first, last) whose index c satisfies pos <= c < pos + len.
inline std::pair<int, int> covered_span(double pos, int len) {
  return {static_cast<int>(std::ceil(pos)), static_cast<int>(std::ceil(pos + len))};
}

inline bool spans_overlap(std::pair<int, int> a, std::pair<int, int> b) {
  return a.first < b.second && b.first < a.second;
}

}  // namespace detail

inline void validate(const SceneScript& s, int d_max) {
  if (s.width <= 0 || s.height <= 0) throw ValidationError("scene", "canvas must be non-empty");
  if (s.frame_count < 1) throw ValidationError("frame_count", "must be >= 1");
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < s.actors.size(); ++i) {
    const Actor& a = s.actors[i];
    const std::string where = "actors[" + std::to_string(i) + "]";
    if (!ids.insert(a.object_id).second) {
      throw ValidationError(where + ".object_id", "duplicate object_id");
    }
    if (a.width < 1 || a.height < 1) throw ValidationError(where, "size must be positive");
    if (!(a.disparity >= 1.0 && a.disparity <= d_max - 1.0)) {
      throw ValidationError(where + ".disparity",
                            "must be in [1, " + std::to_string(d_max - 1) + "]");
    }
    if (!(std::fabs(a.vx) <= kMaxActorSpeed && std::fabs(a.vy) <= kMaxActorSpeed)) {
      throw ValidationError(where + ".velocity", "components must be within +-16 px/frame");
    }
    for (int k = 0; k < s.frame_count; ++k) {
      const auto xs = detail::covered_span(a.x_at(k), a.width);
      const auto xr = detail::covered_span(a.x_at(k) - a.disparity, a.width);
      const auto ys = detail::covered_span(a.y_at(k), a.height);
      if (xs.first < 0 || xs.second > s.width || xr.first < 0 || ys.first < 0 ||
          ys.second > s.height) {
        throw ValidationError(where, "leaves the canvas in frame " + std::to_string(k));
      }
    }
  }
  for (std::size_t i = 0; i < s.actors.size(); ++i) {
    for (std::size_t j = i + 1; j < s.actors.size(); ++j) {
      const Actor& a = s.actors[i];
      const Actor& b = s.actors[j];
      for (int k = 0; k < s.frame_count; ++k) {
        const bool rows = detail::spans_overlap(detail::covered_span(a.y_at(k), a.height),
                                                detail::covered_span(b.y_at(k), b.height));
        const bool left = detail::spans_overlap(detail::covered_span(a.x_at(k), a.width),
                                                detail::covered_span(b.x_at(k), b.width));
        const bool right = detail::spans_overlap(
            detail::covered_span(a.x_at(k) - a.disparity, a.width),
            detail::covered_span(b.x_at(k) - b.disparity, b.width));
        if (rows && (left || right)) {
          throw ValidationError("actors", "actors " + std::to_string(a.object_id) + " and " +
                                              std::to_string(b.object_id) +
                                              " overlap in frame " + std::to_string(k));
        }
      }
    }
  }
}

inline BinaryMask actor_mask(const SceneScript& s, const Actor& a, int frame) {
  BinaryMask m(s.width, s.height);
  const auto xs = detail::covered_span(a.x_at(frame), a.width);
  const auto ys = detail::covered_span(a.y_at(frame), a.height);
  for (int y = ys.first; y < ys.second; ++y) {
    for (int x = xs.first; x < xs.second; ++x) m.set(x, y, true);
  }
  return m;
}

struct SyntheticScene {
  std::vector<StereoPair> frames;
  DetectionFile detections;
};

// Static background at disparity 0; each actor is a fronto-parallel textured
// rectangle drawn at its position in the left image and shifted left by its
// disparity in the right image.
inline SyntheticScene render_scene(const SceneScript& s, std::uint64_t seed, int d_max) {
  validate(s, d_max);
  const Texture background{mix_seed(seed, s.background_seed)};
  SyntheticScene out;
  for (int k = 0; k < s.frame_count; ++k) {
    std::vector<float> left(static_cast<std::size_t>(s.width) * s.height);
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        left[static_cast<std::size_t>(y) * s.width + x] = static_cast<float>(background(x, y));
      }
    }
    std::vector<float> right = left;
    FrameDetections fd{k, {}};
    for (const Actor& a : s.actors) {
      const Texture tex{mix_seed(seed, a.texture_seed)};
      const double px = a.x_at(k);
      const double py = a.y_at(k);
      const auto ys = detail::covered_span(py, a.height);
      const auto xl = detail::covered_span(px, a.width);
      const auto xr = detail::covered_span(px - a.disparity, a.width);
      for (int y = ys.first; y < ys.second; ++y) {
        for (int x = xl.first; x < xl.second; ++x) {
          left[static_cast<std::size_t>(y) * s.width + x] =
              static_cast<float>(tex(x - px, y - py));
        }
        for (int x = xr.first; x < xr.second; ++x) {
          right[static_cast<std::size_t>(y) * s.width + x] =
              static_cast<float>(tex(x + a.disparity - px, y - py));
        }
      }
      fd.detections.push_back(
          InstanceMask::from_mask(a.object_id, a.class_name, 1.0, actor_mask(s, a, k)));
    }
    std::sort(fd.detections.begin(), fd.detections.end(),
              [](const auto& l, const auto& r) { return l.object_id() < r.object_id(); });
    out.frames.emplace_back(ImageBuffer(s.width, s.height, std::move(left)),
                            ImageBuffer(s.width, s.height, std::move(right)), k);
    out.detections.frames.push_back(std::move(fd));
  }
  return out;
}

struct TruthEntry {
  int frame_index = 0;
  std::int64_t object_id = 0;
  std::string class_name;
  double xM = 0.0;
  double yM = 0.0;
  bool has_flow = false;
  double mean_disparity = 0.0;
  LabelSet labels;
};

struct SceneTruth {
  std::vector<TruthEntry> entries;  // ordered by (frame_index, object_id)
};

// Straight-line restatement of the labeling rules, kept separate from
// obstacle::classify so the two can be cross-checked.
inline LabelSet rule_labels(double mean_disparity, double xM, double yM,
                            const AnalysisConfig& c) {
  LabelSet l;
  const double r = mean_disparity / c.d_max;
  if (r >= c.depth_thresholds[0]) l.depth = DepthLabel::very_close;
  else if (r >= c.depth_thresholds[1]) l.depth = DepthLabel::close;
  else if (r >= c.depth_thresholds[2]) l.depth = DepthLabel::far;
  else l.depth = DepthLabel::very_far;

  if (xM > c.dir_epsilon_x) l.x_dir = XDirLabel::left_to_right;
  else if (xM < -c.dir_epsilon_x) l.x_dir = XDirLabel::right_to_left;
  else l.x_dir = XDirLabel::stable_direction;

  const bool down_is_approaching = c.y_sign_approaching == YSign::down_is_approaching;
  if (yM > c.dir_epsilon_y) {
    l.y_dir = down_is_approaching ? YDirLabel::approaching : YDirLabel::moving_away;
  } else if (yM < -c.dir_epsilon_y) {
    l.y_dir = down_is_approaching ? YDirLabel::moving_away : YDirLabel::approaching;
  } else {
    l.y_dir = YDirLabel::stable_distance;
  }

  double vl = 0.0;
  if (c.intensity_metric == IntensityMetric::product) {
    vl = xM * yM;
    if (vl < 0.0) vl = -vl;
  } else {
    vl = std::hypot(xM, yM);
  }
  const auto& t = c.intensity_thresholds;
  if (vl < t[0]) l.intensity = IntensityLabel::stopped;
  else if (vl < t[1]) l.intensity = IntensityLabel::slow;
  else if (vl < t[2]) l.intensity = IntensityLabel::average_speed;
  else if (vl < t[3]) l.intensity = IntensityLabel::fast;
  else l.intensity = IntensityLabel::very_fast;
  return l;
}

// Exact aggregates and labels for every actor in every frame. Frame 0 has no
// predecessor, so like the pipeline it carries zero motion and has_flow=false.
inline SceneTruth truth_labels(const SceneScript& s, const AnalysisConfig& config) {
  validate(s, config.d_max);
  SceneTruth truth;
  for (int k = 0; k < s.frame_count; ++k) {
    std::vector<const Actor*> actors;
    for (const Actor& a : s.actors) actors.push_back(&a);
    std::sort(actors.begin(), actors.end(),
              [](const Actor* l, const Actor* r) { return l->object_id < r->object_id; });
    for (const Actor* a : actors) {
      TruthEntry e;
      e.frame_index = k;
      e.object_id = a->object_id;
      e.class_name = a->class_name;
      e.has_flow = k > 0;
      e.xM = e.has_flow ? a->vx : 0.0;
      e.yM = e.has_flow ? a->vy : 0.0;
      e.mean_disparity = a->disparity;
      e.labels = rule_labels(e.mean_disparity, e.xM, e.yM, config);
      truth.entries.push_back(std::move(e));
    }
  }
  return truth;
}

inline std::vector<GroundTruthFrame> to_groundtruth(const SceneScript& s,
                                                    const SceneTruth& truth) {
  std::vector<GroundTruthFrame> frames(static_cast<std::size_t>(s.frame_count));
  for (int k = 0; k < s.frame_count; ++k) frames[static_cast<std::size_t>(k)].frame_index = k;
  for (const auto& e : truth.entries) {
    frames[static_cast<std::size_t>(e.frame_index)].objects.push_back(
        {e.object_id, e.class_name, e.labels});
  }
  return frames;
}

inline std::vector<LabeledEntry> to_label_entries(const SceneTruth& truth) {
  std::vector<LabeledEntry> out;
  for (const auto& e : truth.entries) out.push_back({{e.frame_index, e.object_id}, e.labels});
  return out;
}

// Scene script JSON:
// {"width":W,"height":H,"frame_count":N,"background_seed":S,
//  "actors":[{"object_id":1,"class_name":"car","width":w,"height":h,
//             "start":[x,y],"velocity":[vx,vy],"disparity":d,"texture_seed":t}]}
inline SceneScript parse_scene_script(const nlohmann::json& doc) {
  using obstacle::detail::json_int;
  using obstacle::detail::json_int32;
  using obstacle::detail::require_keys;
  require_keys(doc, "scene", {"width", "height", "frame_count", "background_seed", "actors"});
  auto number = [](const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw ValidationError(where, "expected a number");
    return v.get<double>();
  };
  auto seed = [](const nlohmann::json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ValidationError(where, "expected an integer seed");
    return v.is_number_unsigned() ? v.get<std::uint64_t>()
                                  : static_cast<std::uint64_t>(v.get<std::int64_t>());
  };
  auto pair = [&](const nlohmann::json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) throw ValidationError(where, "expected [x, y]");
    return std::pair{number(v[0], where + "[0]"), number(v[1], where + "[1]")};
  };
  SceneScript s;
  s.width = json_int32(doc.at("width"), "width");
  s.height = json_int32(doc.at("height"), "height");
  s.frame_count = json_int32(doc.at("frame_count"), "frame_count");
  s.background_seed = seed(doc.at("background_seed"), "background_seed");
  const auto& actors = doc.at("actors");
  if (!actors.is_array()) throw ValidationError("actors", "expected an array");
  for (std::size_t i = 0; i < actors.size(); ++i) {
    const std::string where = "actors[" + std::to_string(i) + "]";
    const auto& a = actors[i];
    require_keys(a, where,
                 {"object_id", "class_name", "width", "height", "start", "velocity", "disparity",
                  "texture_seed"});
    Actor actor;
    actor.object_id = json_int(a.at("object_id"), where + ".object_id");
    if (!a.at("class_name").is_string()) {
      throw ValidationError(where + ".class_name", "expected a string");
    }
    actor.class_name = a.at("class_name").get<std::string>();
    actor.width = json_int32(a.at("width"), where + ".width");
    actor.height = json_int32(a.at("height"), where + ".height");
    std::tie(actor.x0, actor.y0) = pair(a.at("start"), where + ".start");
    std::tie(actor.vx, actor.vy) = pair(a.at("velocity"), where + ".velocity");
    actor.disparity = number(a.at("disparity"), where + ".disparity");
    actor.texture_seed = seed(a.at("texture_seed"), where + ".texture_seed");
    s.actors.push_back(std::move(actor));
  }
  return s;
}

inline SceneScript load_scene_script(const std::filesystem::path& path) {
  try {
    return parse_scene_script(obstacle::detail::parse_json_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.filename().string() + ": " + e.key(), e.message());
  }
}

}  // namespace obstacle::synth
