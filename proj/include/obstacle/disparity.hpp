#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "obstacle/config.hpp"
#include "obstacle/error.hpp"
#include "obstacle/image.hpp"
#include "obstacle/parallel.hpp"
#include "obstacle/types.hpp"

namespace obstacle {

namespace detail {

// Aggregated SAD costs for one scanline: costs[d * width + x] for d in [0, d_max].
struct MatchCostSlice {
  int width = 0;
  int d_max = 0;
  std::vector<float> costs;

  float at(int x, int d) const noexcept {
    return costs[static_cast<std::size_t>(d) * width + x];
  }
};

inline void compute_cost_slice(const ImageBuffer& left, const ImageBuffer& right, int y,
                               int radius, MatchCostSlice& slice, std::vector<float>& column) {
  const int w = left.width();
  const int h = left.height();
  slice.costs.resize(static_cast<std::size_t>(slice.d_max + 1) * w);
  column.resize(w);
  for (int d = 0; d <= slice.d_max; ++d) {
    // Vertical sums of |L(x) - R(x - d)| over the window rows.
    for (int x = 0; x < w; ++x) {
      const int xr = std::max(x - d, 0);
      float s = 0.0f;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        s += std::fabs(left.at(x, yy) - right.at(xr, yy));
      }
      column[x] = s;
    }
    float* row = slice.costs.data() + static_cast<std::size_t>(d) * w;
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int dx = -radius; dx <= radius; ++dx) {
        s += column[std::clamp(x + dx, 0, w - 1)];
      }
      row[x] = s;
    }
  }
}

// Window variance of the left image; edge replicated.
inline void window_variance_row(const ImageBuffer& img, int y, int radius,
                                std::vector<double>& out) {
  const int w = img.width();
  out.assign(w, 0.0);
  const double n = static_cast<double>(2 * radius + 1) * (2 * radius + 1);
  for (int x = 0; x < w; ++x) {
    double s = 0.0;
    double s2 = 0.0;
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        const double v = img.clamped(x + dx, y + dy);
        s += v;
        s2 += v * v;
      }
    }
    const double mean = s / n;
    out[x] = std::max(0.0, s2 / n - mean * mean);
  }
}

// Integer right-view disparity at right-image column xr: the left pixel at
// xr + d matched with shift d covers exactly the same window pairs.
inline int right_view_disparity(const MatchCostSlice& slice, int xr) {
  const int d_hi = std::min(slice.d_max, slice.width - 1 - xr);
  int best_d = 0;
  float best = std::numeric_limits<float>::infinity();
  for (int d = 0; d <= d_hi; ++d) {
    const float c = slice.at(xr + d, d);
    if (c < best) {
      best = c;
      best_d = d;
    }
  }
  return best_d;
}

}  // namespace detail

// Dense left-view disparity by SAD window matching along scanlines with
// parabolic subpixel refinement, texture floor and left-right check.
// Rows are independent, so `workers` never changes the result.
inline DisparityMap compute_disparity(const StereoPair& pair, const AnalysisConfig& config,
                                      int workers = 1) {
  validate(config);
  const ImageBuffer& left = pair.left();
  const ImageBuffer& right = pair.right();
  const int w = left.width();
  const int h = left.height();
  const int d_max = config.d_max;
  const int radius = config.block_radius;
  if (d_max >= w) {
    throw ValidationError("d_max", "must be smaller than the image width (" +
                                       std::to_string(w) + ")");
  }

  std::vector<float> disparity(static_cast<std::size_t>(w) * h, 0.0f);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(w) * h, 0);

  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    detail::MatchCostSlice slice{w, d_max, {}};
    std::vector<float> column;
    std::vector<double> variance;
    detail::compute_cost_slice(left, right, y, radius, slice, column);
    detail::window_variance_row(left, y, radius, variance);

    for (int x = d_max; x < w; ++x) {
      if (variance[x] < config.min_texture) continue;
      int best_d = 0;
      float best = std::numeric_limits<float>::infinity();
      for (int d = 0; d <= d_max; ++d) {
        const float c = slice.at(x, d);
        if (c < best) {  // strict: smallest disparity wins ties
          best = c;
          best_d = d;
        }
      }
      double refined = best_d;
      if (best_d > 0 && best_d < d_max) {
        const double c_lo = slice.at(x, best_d - 1);
        const double c_hi = slice.at(x, best_d + 1);
        const double denom = c_lo - 2.0 * best + c_hi;
        if (denom > 0.0) {
          refined += std::clamp((c_lo - c_hi) / (2.0 * denom), -0.5, 0.5);
        }
      }
      refined = std::clamp(refined, 0.0, static_cast<double>(d_max));

      const int xr = x - static_cast<int>(std::lround(refined));
      const int d_right = detail::right_view_disparity(slice, xr);
      if (std::fabs(refined - d_right) > config.lr_consistency_tau) continue;

      const auto i = static_cast<std::size_t>(y) * w + x;
      disparity[i] = static_cast<float>(refined);
      valid[i] = 1;
    }
  });

  return DisparityMap(w, h, d_max, std::move(disparity), std::move(valid));
}

// Valid disparities scaled so d_max maps to 1; invalid pixels are 0.
inline ImageBuffer disparity_to_image(const DisparityMap& map) {
  std::vector<float> data(map.disparity().size(), 0.0f);
  const double scale = 1.0 / map.d_max();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (map.valid()[i]) {
      data[i] = static_cast<float>(std::clamp(map.disparity()[i] * scale, 0.0, 1.0));
    }
  }
  return ImageBuffer(map.width(), map.height(), std::move(data));
}

// KITTI convention: 16-bit gray PNG, value = round(d * 256), 0 = invalid.
// A valid disparity that would round to 0 is stored as 1 (1/256 px).
inline std::vector<std::uint16_t> encode_disparity_u16(const DisparityMap& map) {
  std::vector<std::uint16_t> out(map.disparity().size(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!map.valid()[i]) continue;
    const long q = std::lround(static_cast<double>(map.disparity()[i]) * 256.0);
    out[i] = static_cast<std::uint16_t>(std::clamp<long>(q, 1, 65535));
  }
  return out;
}

inline void save_disparity_png(const DisparityMap& map, const std::filesystem::path& path) {
  const auto samples = encode_disparity_u16(map);
  detail::write_png(path, map.width(), map.height(), 1, 16, samples);
}

inline DisparityMap load_disparity_png(const std::filesystem::path& path, int d_max) {
  const RawRaster raw = read_raw_image(path);
  if (raw.channels != 1 || raw.maxval != 65535) {
    throw FormatError("disparity PNG must be 16-bit grayscale: " + path.string());
  }
  std::vector<float> disparity(raw.samples.size(), 0.0f);
  std::vector<std::uint8_t> valid(raw.samples.size(), 0);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    if (raw.samples[i] == 0) continue;
    const float d = static_cast<float>(raw.samples[i] / 256.0);
    if (d > static_cast<float>(d_max)) {
      throw FormatError("disparity exceeds d_max in " + path.string());
    }
    disparity[i] = d;
    valid[i] = 1;
  }
  return DisparityMap(raw.width, raw.height, d_max, std::move(disparity), std::move(valid));
}

// Blue-to-red preview; invalid pixels black.
inline RgbImage colorize_disparity(const DisparityMap& map) {
  RgbImage out(map.width(), map.height());
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (!map.is_valid(x, y)) continue;
      const double t = std::clamp(static_cast<double>(map.at(x, y)) / map.d_max(), 0.0, 1.0);
      auto ch = [](double v) {
        return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
      };
      // Piecewise-linear jet.
      out.set(x, y, {ch(1.5 - std::fabs(4.0 * t - 3.0)), ch(1.5 - std::fabs(4.0 * t - 2.0)),
                     ch(1.5 - std::fabs(4.0 * t - 1.0))});
    }
  }
  return out;
}

}  // namespace obstacle
