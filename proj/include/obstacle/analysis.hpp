#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "obstacle/config.hpp"
#include "obstacle/disparity.hpp"
#include "obstacle/error.hpp"
#include "obstacle/flow.hpp"
#include "obstacle/image.hpp"
#include "obstacle/mask.hpp"
#include "obstacle/parallel.hpp"
#include "obstacle/types.hpp"

namespace obstacle {

struct DepthAggregate {
  std::optional<double> mean_disparity;
  std::size_t valid_count = 0;
};

struct FlowAggregate {
  double xM = 0.0;
  double yM = 0.0;
  std::size_t pixel_count = 0;
};

// Mean disparity over pixels that are both in the mask and valid. Absent
// when fewer than min_valid_pixels qualify. Row-major summation order.
inline DepthAggregate aggregate_depth(const BinaryMask& mask, const DisparityMap& dmap,
                                      const AnalysisConfig& config) {
  if (mask.width != dmap.width() || mask.height != dmap.height()) {
    throw DimensionError("aggregate_depth: mask and disparity map dimensions differ");
  }
  double sum = 0.0;
  std::size_t count = 0;
  const auto disp = dmap.disparity();
  const auto valid = dmap.valid();
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    if (mask.pixels[i] && valid[i]) {
      sum += disp[i];
      ++count;
    }
  }
  DepthAggregate out;
  out.valid_count = count;
  if (count > 0 && count >= static_cast<std::size_t>(config.min_valid_pixels)) {
    out.mean_disparity = sum / static_cast<double>(count);
  }
  return out;
}

// Mean flow (xM, yM) over every mask pixel.
inline FlowAggregate aggregate_flow(const BinaryMask& mask, const FlowField& flow) {
  if (mask.width != flow.width() || mask.height != flow.height()) {
    throw DimensionError("aggregate_flow: mask and flow dimensions differ");
  }
  double su = 0.0;
  double sv = 0.0;
  std::size_t n = 0;
  const auto u = flow.u();
  const auto v = flow.v();
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    if (mask.pixels[i]) {
      su += u[i];
      sv += v[i];
      ++n;
    }
  }
  if (n == 0) throw ValidationError("mask", "aggregate_flow requires a non-empty mask");
  return {su / static_cast<double>(n), sv / static_cast<double>(n), n};
}

// VL. `product` is |xM * yM|; `euclidean` is the vector norm.
inline double movement_intensity(double xM, double yM, IntensityMetric metric) {
  return metric == IntensityMetric::product ? std::fabs(xM * yM) : std::hypot(xM, yM);
}

inline double movement_intensity(double xM, double yM, const AnalysisConfig& config) {
  return movement_intensity(xM, yM, config.intensity_metric);
}

inline DepthLabel classify_depth(std::optional<double> mean_disparity,
                                 const AnalysisConfig& config) {
  if (!mean_disparity) return DepthLabel::unknown;
  const double norm = *mean_disparity / config.d_max;
  const auto& t = config.depth_thresholds;
  if (norm >= t[0]) return DepthLabel::very_close;
  if (norm >= t[1]) return DepthLabel::close;
  if (norm >= t[2]) return DepthLabel::far;
  return DepthLabel::very_far;
}

inline XDirLabel classify_x_dir(double xM, const AnalysisConfig& config) {
  if (std::fabs(xM) <= config.dir_epsilon_x) return XDirLabel::stable_direction;
  return xM > 0.0 ? XDirLabel::left_to_right : XDirLabel::right_to_left;
}

inline YDirLabel classify_y_dir(double yM, const AnalysisConfig& config) {
  if (std::fabs(yM) <= config.dir_epsilon_y) return YDirLabel::stable_distance;
  const bool down = yM > 0.0;
  const bool approaching = config.y_sign_approaching == YSign::down_is_approaching ? down : !down;
  return approaching ? YDirLabel::approaching : YDirLabel::moving_away;
}

// Half-open ascending bins; a value on a cut belongs to the higher label.
inline IntensityLabel classify_intensity(double vl, const AnalysisConfig& config) {
  const auto& t = config.intensity_thresholds;
  int bin = 0;
  while (bin < static_cast<int>(t.size()) && vl >= t[static_cast<std::size_t>(bin)]) ++bin;
  return static_cast<IntensityLabel>(bin);
}

inline LabelSet classify(const ObjectObservation& obs, const AnalysisConfig& config) {
  return {classify_depth(obs.mean_disparity, config), classify_x_dir(obs.xM, config),
          classify_y_dir(obs.yM, config), classify_intensity(obs.VL, config)};
}

struct AnalyzedObject {
  ObjectObservation observation;
  LabelSet labels;
  InstanceMask mask;
};

// Per-frame intermediate products kept for persistence.
struct FrameProducts {
  int frame_index = 0;
  DisparityMap disparity;
  std::optional<FlowField> flow;  // absent on the first frame
};

struct SequenceAnalysis {
  std::vector<FrameProducts> frames;
  std::vector<AnalyzedObject> objects;  // ordered by (frame_index, object_id)
};

inline ObjectObservation observe(int frame_index, const InstanceMask& det,
                                 const DisparityMap& dmap, const FlowField* flow,
                                 const AnalysisConfig& config) {
  if (det.width() != dmap.width() || det.height() != dmap.height()) {
    throw DimensionError("frame " + std::to_string(frame_index) + ", object " +
                         std::to_string(det.object_id()) + ": mask is " +
                         std::to_string(det.width()) + "x" + std::to_string(det.height()) +
                         " but frame is " + std::to_string(dmap.width()) + "x" +
                         std::to_string(dmap.height()));
  }
  const BinaryMask mask = det.decode();
  const DepthAggregate depth = aggregate_depth(mask, dmap, config);
  ObjectObservation obs;
  obs.frame_index = frame_index;
  obs.object_id = det.object_id();
  obs.class_name = det.class_name();
  obs.mean_disparity = depth.mean_disparity;
  obs.valid_disparity_count = depth.valid_count;
  obs.pixel_count = mask.area();
  if (flow != nullptr) {
    const FlowAggregate fa = aggregate_flow(mask, *flow);
    obs.xM = fa.xM;
    obs.yM = fa.yM;
    obs.has_flow = true;
  }
  obs.VL = movement_intensity(obs.xM, obs.yM, config);
  return obs;
}

// Disparity from each stereo pair, flow between consecutive left frames,
// both aggregated over each detection's mask and labeled. Frames run
// concurrently on up to `jobs` workers; output order is fixed.
inline SequenceAnalysis analyze_sequence(const std::vector<StereoPair>& frames,
                                         const DetectionFile& detections,
                                         const AnalysisConfig& config, int jobs = 1) {
  validate(config);
  for (std::size_t k = 1; k < frames.size(); ++k) {
    if (!frames[k].left().same_shape(frames[0].left())) {
      throw DimensionError("frame " + std::to_string(frames[k].frame_index()) +
                           " differs in size from frame " +
                           std::to_string(frames[0].frame_index()));
    }
  }
  std::map<int, std::size_t> position;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (!position.emplace(frames[k].frame_index(), k).second) {
      throw ValidationError("frames", "duplicate frame index " +
                                          std::to_string(frames[k].frame_index()));
    }
  }
  for (const auto& f : detections.frames) {
    if (!position.count(f.frame_index)) {
      throw ValidationError("detections", "frame " + std::to_string(f.frame_index) +
                                              " has detections but no images");
    }
  }

  const FlowParams flow_params = FlowParams::from(config);
  std::vector<std::optional<FrameProducts>> products(frames.size());
  std::vector<std::vector<AnalyzedObject>> per_frame(frames.size());

  parallel_for(frames.size(), jobs, [&](std::size_t k) {
    const StereoPair& pair = frames[k];
    DisparityMap dmap = compute_disparity(pair, config);
    std::optional<FlowField> flow;
    if (k > 0) flow = compute_flow(frames[k - 1].left(), pair.left(), flow_params);
    if (const FrameDetections* fd = detections.find(pair.frame_index())) {
      std::vector<AnalyzedObject> objs;
      for (const auto& det : fd->detections) {
        ObjectObservation obs =
            observe(pair.frame_index(), det, dmap, flow ? &*flow : nullptr, config);
        const LabelSet labels = classify(obs, config);
        objs.push_back({std::move(obs), labels, det});
      }
      std::sort(objs.begin(), objs.end(), [](const auto& a, const auto& b) {
        return a.observation.object_id < b.observation.object_id;
      });
      per_frame[k] = std::move(objs);
    }
    products[k] = FrameProducts{pair.frame_index(), std::move(dmap), std::move(flow)};
  });

  std::vector<std::size_t> order(frames.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frames[a].frame_index() < frames[b].frame_index();
  });
  SequenceAnalysis out;
  for (std::size_t k : order) {
    out.frames.push_back(std::move(*products[k]));
    for (auto& o : per_frame[k]) out.objects.push_back(std::move(o));
  }
  return out;
}

// analysis.json: {"frames":[{"frame_index":k,"objects":[{...}]}]}. Every
// frame in the analyzed sequence is listed, including frames without objects.
inline nlohmann::json analysis_to_json(const SequenceAnalysis& analysis) {
  nlohmann::json frames = nlohmann::json::array();
  std::size_t next = 0;
  for (const auto& fp : analysis.frames) {
    nlohmann::json objects = nlohmann::json::array();
    while (next < analysis.objects.size() &&
           analysis.objects[next].observation.frame_index == fp.frame_index) {
      const AnalyzedObject& o = analysis.objects[next++];
      const ObjectObservation& obs = o.observation;
      nlohmann::json j;
      j["object_id"] = obs.object_id;
      j["class_name"] = obs.class_name;
      j["mean_disparity"] =
          obs.mean_disparity ? nlohmann::json(*obs.mean_disparity) : nlohmann::json(nullptr);
      j["valid_disparity_count"] = obs.valid_disparity_count;
      j["xM"] = obs.xM;
      j["yM"] = obs.yM;
      j["VL"] = obs.VL;
      j["pixel_count"] = obs.pixel_count;
      j["has_flow"] = obs.has_flow;
      j["depth"] = to_string(o.labels.depth);
      j["x_dir"] = to_string(o.labels.x_dir);
      j["y_dir"] = to_string(o.labels.y_dir);
      j["intensity"] = to_string(o.labels.intensity);
      j["mask"] = {{"size", {o.mask.height(), o.mask.width()}},
                   {"rle", std::vector<std::uint32_t>(o.mask.counts().begin(),
                                                      o.mask.counts().end())}};
      objects.push_back(std::move(j));
    }
    frames.push_back({{"frame_index", fp.frame_index}, {"objects", std::move(objects)}});
  }
  if (next != analysis.objects.size()) {
    throw InvariantError("analysis objects not aligned with analyzed frames");
  }
  return {{"frames", std::move(frames)}};
}

inline void save_analysis(const SequenceAnalysis& analysis, const std::filesystem::path& path) {
  detail::write_json_file(analysis_to_json(analysis), path);
}

}  // namespace obstacle
