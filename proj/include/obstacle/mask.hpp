#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "obstacle/error.hpp"
#include "obstacle/types.hpp"

namespace obstacle {

// Uncompressed COCO run-length encoding: column-major runs alternating
// background/foreground, background first.
inline std::vector<std::uint32_t> encode_rle(const BinaryMask& mask) {
  std::vector<std::uint32_t> counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width; ++x) {
    for (int y = 0; y < mask.height; ++y) {
      const std::uint8_t p = mask.at(x, y) ? 1 : 0;
      if (p != current) {
        counts.push_back(run);
        run = 0;
        current = p;
      }
      ++run;
    }
  }
  counts.push_back(run);
  return counts;
}

inline BinaryMask decode_rle(std::span<const std::uint32_t> counts, int height, int width) {
  if (height <= 0 || width <= 0) throw ValidationError("size", "must be positive");
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  const auto expected = static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width);
  if (total != expected) {
    throw ValidationError("rle", "counts sum to " + std::to_string(total) + ", expected " +
                                     std::to_string(expected));
  }
  BinaryMask mask(width, height);
  std::uint64_t pos = 0;
  bool fg = false;
  for (auto c : counts) {
    if (fg) {
      for (std::uint64_t k = pos; k < pos + c; ++k) {
        const auto x = static_cast<int>(k / height);
        const auto y = static_cast<int>(k % height);
        mask.set(x, y, true);
      }
    }
    pos += c;
    fg = !fg;
  }
  return mask;
}

// One detector output. The mask stays encoded until decode() is called.
class InstanceMask {
 public:
  InstanceMask(std::int64_t object_id, std::string class_name, double score, int height,
               int width, std::vector<std::uint32_t> counts)
      : object_id_(object_id),
        class_name_(std::move(class_name)),
        score_(score),
        height_(height),
        width_(width),
        counts_(std::move(counts)) {
    if (!(score_ >= 0.0 && score_ <= 1.0)) throw ValidationError("score", "must be in [0,1]");
    if (height_ <= 0 || width_ <= 0) throw ValidationError("size", "must be positive");
    std::uint64_t total = 0;
    std::uint64_t foreground = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      total += counts_[i];
      if (i % 2 == 1) foreground += counts_[i];
    }
    if (total != static_cast<std::uint64_t>(height_) * static_cast<std::uint64_t>(width_)) {
      throw ValidationError("rle", "counts sum to " + std::to_string(total) + ", expected " +
                                       std::to_string(static_cast<std::uint64_t>(height_) *
                                                      static_cast<std::uint64_t>(width_)));
    }
    if (foreground == 0) throw ValidationError("rle", "mask has no foreground pixels");
  }

  static InstanceMask from_mask(std::int64_t object_id, std::string class_name, double score,
                                const BinaryMask& mask) {
    return InstanceMask(object_id, std::move(class_name), score, mask.height, mask.width,
                        encode_rle(mask));
  }

  std::int64_t object_id() const noexcept { return object_id_; }
  const std::string& class_name() const noexcept { return class_name_; }
  double score() const noexcept { return score_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }

  BinaryMask decode() const { return decode_rle(counts_, height_, width_); }

  friend bool operator==(const InstanceMask&, const InstanceMask&) = default;

 private:
  std::int64_t object_id_;
  std::string class_name_;
  double score_;
  int height_;
  int width_;
  std::vector<std::uint32_t> counts_;
};

struct FrameDetections {
  int frame_index = 0;
  std::vector<InstanceMask> detections;

  friend bool operator==(const FrameDetections&, const FrameDetections&) = default;
};

struct DetectionFile {
  std::vector<FrameDetections> frames;

  const FrameDetections* find(int frame_index) const noexcept {
    for (const auto& f : frames) {
      if (f.frame_index == frame_index) return &f;
    }
    return nullptr;
  }

  friend bool operator==(const DetectionFile&, const DetectionFile&) = default;
};

namespace detail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ValidationError(where, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) throw ValidationError(where + "." + k, "unknown field");
  }
  for (const char* k : keys) {
    if (!obj.contains(k)) throw ValidationError(where + "." + k, "missing field");
  }
}

inline std::int64_t json_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ValidationError(where, "expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    throw ValidationError(where, "integer out of range");
  }
  return v.get<std::int64_t>();
}

inline int json_int32(const json& v, const std::string& where) {
  const auto x = json_int(v, where);
  if (x < INT32_MIN || x > INT32_MAX) throw ValidationError(where, "integer out of range");
  return static_cast<int>(x);
}

inline json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace detail

// Validates a parsed detections document. Errors name the offending
// frame and field, e.g. "frames[1].detections[0].rle".
inline DetectionFile parse_detections(const nlohmann::json& doc) {
  using detail::json;
  detail::require_keys(doc, "detections", {"frames"});
  const json& frames = doc.at("frames");
  if (!frames.is_array()) throw ValidationError("frames", "expected an array");
  DetectionFile out;
  bool first = true;
  int last_index = 0;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const std::string fwhere = "frames[" + std::to_string(fi) + "]";
    const json& f = frames[fi];
    detail::require_keys(f, fwhere, {"frame_index", "detections"});
    FrameDetections fd;
    fd.frame_index = detail::json_int32(f.at("frame_index"), fwhere + ".frame_index");
    if (fd.frame_index < 0) throw ValidationError(fwhere + ".frame_index", "must be >= 0");
    if (!first && fd.frame_index <= last_index) {
      throw ValidationError(fwhere + ".frame_index", "frame indices must strictly increase");
    }
    first = false;
    last_index = fd.frame_index;
    const json& dets = f.at("detections");
    if (!dets.is_array()) throw ValidationError(fwhere + ".detections", "expected an array");
    std::set<std::int64_t> ids;
    for (std::size_t di = 0; di < dets.size(); ++di) {
      const std::string where = fwhere + ".detections[" + std::to_string(di) + "]";
      const json& d = dets[di];
      detail::require_keys(d, where, {"object_id", "class_name", "score", "size", "rle"});
      const auto id = detail::json_int(d.at("object_id"), where + ".object_id");
      if (!ids.insert(id).second) {
        throw ValidationError(where + ".object_id", "duplicate object_id in frame");
      }
      if (!d.at("class_name").is_string()) {
        throw ValidationError(where + ".class_name", "expected a string");
      }
      if (!d.at("score").is_number()) throw ValidationError(where + ".score", "expected a number");
      const double score = d.at("score").get<double>();
      const json& size = d.at("size");
      if (!size.is_array() || size.size() != 2) {
        throw ValidationError(where + ".size", "expected [height, width]");
      }
      const int height = detail::json_int32(size[0], where + ".size[0]");
      const int width = detail::json_int32(size[1], where + ".size[1]");
      const json& rle = d.at("rle");
      if (!rle.is_array()) throw ValidationError(where + ".rle", "expected an array");
      std::vector<std::uint32_t> counts;
      counts.reserve(rle.size());
      for (std::size_t k = 0; k < rle.size(); ++k) {
        const auto c = detail::json_int(rle[k], where + ".rle[" + std::to_string(k) + "]");
        if (c < 0 || c > UINT32_MAX) {
          throw ValidationError(where + ".rle[" + std::to_string(k) + "]", "count out of range");
        }
        counts.push_back(static_cast<std::uint32_t>(c));
      }
      try {
        fd.detections.emplace_back(id, d.at("class_name").get<std::string>(), score, height,
                                   width, std::move(counts));
      } catch (const ValidationError& e) {
        throw ValidationError(where + "." + e.key(), e.message());
      }
    }
    out.frames.push_back(std::move(fd));
  }
  return out;
}

inline DetectionFile parse_detections(const std::filesystem::path& path) {
  try {
    return parse_detections(detail::parse_json_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.filename().string() + ": " + e.key(), e.message());
  }
}

inline nlohmann::json to_json(const DetectionFile& file) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : file.frames) {
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : f.detections) {
      dets.push_back({{"object_id", d.object_id()},
                      {"class_name", d.class_name()},
                      {"score", d.score()},
                      {"size", {d.height(), d.width()}},
                      {"rle", std::vector<std::uint32_t>(d.counts().begin(), d.counts().end())}});
    }
    frames.push_back({{"frame_index", f.frame_index}, {"detections", std::move(dets)}});
  }
  return {{"frames", std::move(frames)}};
}

inline void save_detections(const DetectionFile& file, const std::filesystem::path& path) {
  detail::write_json_file(to_json(file), path);
}

}  // namespace obstacle
