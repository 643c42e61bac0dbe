#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obstacle/error.hpp"

namespace obstacle {

// Per-pixel disparity in pixels plus validity. Invalid pixels hold 0.
class DisparityMap {
 public:
  DisparityMap(int width, int height, int d_max, std::vector<float> disparity,
               std::vector<std::uint8_t> valid)
      : width_(width),
        height_(height),
        d_max_(d_max),
        disparity_(std::move(disparity)),
        valid_(std::move(valid)) {
    const auto n = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    if (width_ <= 0 || height_ <= 0 || disparity_.size() != n || valid_.size() != n) {
      throw ValidationError("disparity map", "inconsistent dimensions");
    }
    if (d_max_ < 1) throw ValidationError("disparity map", "d_max must be >= 1");
    for (std::size_t i = 0; i < n; ++i) {
      if (valid_[i]) {
        if (!(disparity_[i] >= 0.0f && disparity_[i] <= static_cast<float>(d_max_))) {
          throw InvariantError("valid disparity outside [0, d_max]");
        }
      } else if (disparity_[i] != 0.0f) {
        throw InvariantError("invalid disparity pixel must carry 0");
      }
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int d_max() const noexcept { return d_max_; }
  std::span<const float> disparity() const noexcept { return disparity_; }
  std::span<const std::uint8_t> valid() const noexcept { return valid_; }

  float at(int x, int y) const noexcept {
    return disparity_[static_cast<std::size_t>(y) * width_ + x];
  }
  bool is_valid(int x, int y) const noexcept {
    return valid_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (auto v : valid_) n += v != 0;
    return n;
  }

  friend bool operator==(const DisparityMap&, const DisparityMap&) = default;

 private:
  int width_;
  int height_;
  int d_max_;
  std::vector<float> disparity_;
  std::vector<std::uint8_t> valid_;
};

// Dense displacement field; u rightward, v downward, pixels per frame.
class FlowField {
 public:
  FlowField(int width, int height, std::vector<float> u, std::vector<float> v)
      : width_(width), height_(height), u_(std::move(u)), v_(std::move(v)) {
    const auto n = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    if (width_ <= 0 || height_ <= 0 || u_.size() != n || v_.size() != n) {
      throw ValidationError("flow field", "inconsistent dimensions");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(u_[i]) || !std::isfinite(v_[i])) {
        throw ValidationError("flow field", "non-finite displacement");
      }
    }
  }

  static FlowField zeros(int width, int height) {
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    return FlowField(width, height, std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f));
  }

  static FlowField uniform(int width, int height, float u, float v) {
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    return FlowField(width, height, std::vector<float>(n, u), std::vector<float>(n, v));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const float> u() const noexcept { return u_; }
  std::span<const float> v() const noexcept { return v_; }
  float u_at(int x, int y) const noexcept { return u_[static_cast<std::size_t>(y) * width_ + x]; }
  float v_at(int x, int y) const noexcept { return v_[static_cast<std::size_t>(y) * width_ + x]; }

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  int width_;
  int height_;
  std::vector<float> u_;
  std::vector<float> v_;
};

// Decoded binary raster, row-major, 1 = foreground.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const noexcept {
    return pixels[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool on) noexcept {
    pixels[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0;
  }
  std::size_t area() const noexcept {
    std::size_t n = 0;
    for (auto p : pixels) n += p != 0;
    return n;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

enum class DepthLabel { very_close, close, far, very_far, unknown };
enum class XDirLabel { left_to_right, right_to_left, stable_direction };
enum class YDirLabel { approaching, moving_away, stable_distance };
enum class IntensityLabel { stopped, slow, average_speed, fast, very_fast };

inline constexpr std::array<std::string_view, 5> kDepthNames{"very_close", "close", "far",
                                                             "very_far", "unknown"};
inline constexpr std::array<std::string_view, 3> kXDirNames{"left_to_right", "right_to_left",
                                                            "stable_direction"};
inline constexpr std::array<std::string_view, 3> kYDirNames{"approaching", "moving_away",
                                                            "stable_distance"};
inline constexpr std::array<std::string_view, 5> kIntensityNames{
    "stopped", "slow", "average_speed", "fast", "very_fast"};

inline std::string_view to_string(DepthLabel l) { return kDepthNames[static_cast<int>(l)]; }
inline std::string_view to_string(XDirLabel l) { return kXDirNames[static_cast<int>(l)]; }
inline std::string_view to_string(YDirLabel l) { return kYDirNames[static_cast<int>(l)]; }
inline std::string_view to_string(IntensityLabel l) {
  return kIntensityNames[static_cast<int>(l)];
}

namespace detail {
template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view name, const std::array<std::string_view, N>& names) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  return std::nullopt;
}
}  // namespace detail

inline std::optional<DepthLabel> parse_depth_label(std::string_view s) {
  return detail::lookup<DepthLabel>(s, kDepthNames);
}
inline std::optional<XDirLabel> parse_x_dir_label(std::string_view s) {
  return detail::lookup<XDirLabel>(s, kXDirNames);
}
inline std::optional<YDirLabel> parse_y_dir_label(std::string_view s) {
  return detail::lookup<YDirLabel>(s, kYDirNames);
}
inline std::optional<IntensityLabel> parse_intensity_label(std::string_view s) {
  return detail::lookup<IntensityLabel>(s, kIntensityNames);
}

struct LabelSet {
  DepthLabel depth = DepthLabel::unknown;
  XDirLabel x_dir = XDirLabel::stable_direction;
  YDirLabel y_dir = YDirLabel::stable_distance;
  IntensityLabel intensity = IntensityLabel::stopped;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

// One detected obstacle in one frame with its depth and motion aggregates.
struct ObjectObservation {
  int frame_index = 0;
  std::int64_t object_id = 0;
  std::string class_name;
  std::optional<double> mean_disparity;
  std::size_t valid_disparity_count = 0;
  double xM = 0.0;
  double yM = 0.0;
  double VL = 0.0;
  std::size_t pixel_count = 0;
  // False on the first frame of a sequence, where no previous frame exists.
  bool has_flow = false;

  friend bool operator==(const ObjectObservation&, const ObjectObservation&) = default;
};

}  // namespace obstacle
