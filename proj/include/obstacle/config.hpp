#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "obstacle/error.hpp"

namespace obstacle {

enum class IntensityMetric { product, euclidean };
enum class YSign { down_is_approaching, up_is_approaching };

// Parameters for every stage of the pipeline. Defaults are documented in
// README.md; every field can be overridden from a key=value file.
struct AnalysisConfig {
  // Stereo matching.
  int d_max = 128;
  int block_radius = 4;
  double lr_consistency_tau = 1.0;
  double min_texture = 1e-4;  // luminance variance over the matching window

  // Dense flow.
  int pyramid_levels = 3;
  double pyramid_scale = 0.5;
  int window_radius = 7;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.1;

  // Labeling.
  std::array<double, 3> depth_thresholds{0.5, 0.25, 0.1};  // descending, on disparity / d_max
  double dir_epsilon_x = 0.5;
  double dir_epsilon_y = 0.5;
  std::array<double, 4> intensity_thresholds{0.25, 1.0, 4.0, 9.0};  // ascending
  IntensityMetric intensity_metric = IntensityMetric::product;
  int min_valid_pixels = 25;
  YSign y_sign_approaching = YSign::down_is_approaching;

  friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

// Throws ValidationError naming the first offending key.
inline void validate(const AnalysisConfig& c) {
  auto fail = [](const char* key, const std::string& what) { throw ValidationError(key, what); };
  // 16-bit disparity PNGs store round(d * 256); larger ranges would overflow.
  if (c.d_max < 1 || c.d_max > 255) fail("d_max", "must be in [1, 255]");
  if (c.block_radius < 0) fail("block_radius", "must be >= 0");
  if (!(c.lr_consistency_tau >= 0.0) || !std::isfinite(c.lr_consistency_tau)) {
    fail("lr_consistency_tau", "must be finite and >= 0");
  }
  if (!(c.min_texture >= 0.0) || !std::isfinite(c.min_texture)) {
    fail("min_texture", "must be finite and >= 0");
  }
  if (c.pyramid_levels < 1) fail("pyramid_levels", "must be >= 1");
  if (!(c.pyramid_scale > 0.0 && c.pyramid_scale < 1.0)) {
    fail("pyramid_scale", "must be in (0,1)");
  }
  if (c.window_radius < 0) fail("window_radius", "must be >= 0");
  if (c.iterations < 1) fail("iterations", "must be >= 1");
  if (c.poly_n < 3 || c.poly_n % 2 == 0) fail("poly_n", "must be odd and >= 3");
  if (!(c.poly_sigma > 0.0) || !std::isfinite(c.poly_sigma)) {
    fail("poly_sigma", "must be finite and > 0");
  }
  for (double t : c.depth_thresholds) {
    if (!std::isfinite(t)) fail("depth_thresholds", "values must be finite");
  }
  if (!(c.depth_thresholds[0] > c.depth_thresholds[1] &&
        c.depth_thresholds[1] > c.depth_thresholds[2])) {
    fail("depth_thresholds", "must be strictly descending");
  }
  if (!(c.dir_epsilon_x >= 0.0) || !std::isfinite(c.dir_epsilon_x)) {
    fail("dir_epsilon_x", "must be finite and >= 0");
  }
  if (!(c.dir_epsilon_y >= 0.0) || !std::isfinite(c.dir_epsilon_y)) {
    fail("dir_epsilon_y", "must be finite and >= 0");
  }
  for (double t : c.intensity_thresholds) {
    if (!std::isfinite(t)) fail("intensity_thresholds", "values must be finite");
  }
  for (std::size_t i = 1; i < c.intensity_thresholds.size(); ++i) {
    if (!(c.intensity_thresholds[i] > c.intensity_thresholds[i - 1])) {
      fail("intensity_thresholds", "must be strictly ascending");
    }
  }
  if (c.min_valid_pixels < 0) fail("min_valid_pixels", "must be >= 0");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ValidationError(std::string(key), "not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline int parse_int(std::string_view key, std::string_view text) {
  text = trim(text);
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ValidationError(std::string(key), "not an integer: '" + std::string(text) + "'");
  }
  return v;
}

template <std::size_t N>
std::array<double, N> parse_list(std::string_view key, std::string_view text) {
  std::array<double, N> out{};
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                          : comma - start);
    if (count == N) {
      throw ValidationError(std::string(key), "expected " + std::to_string(N) + " values");
    }
    out[count++] = parse_double(key, item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (count != N) {
    throw ValidationError(std::string(key), "expected " + std::to_string(N) + " values");
  }
  return out;
}

}  // namespace detail

inline std::string_view to_string(IntensityMetric m) {
  return m == IntensityMetric::product ? "product" : "euclidean";
}

inline std::string_view to_string(YSign s) {
  return s == YSign::down_is_approaching ? "down_is_approaching" : "up_is_approaching";
}

// Parses key=value lines. '#' starts a comment; blank lines are skipped.
// Unknown or repeated keys are errors. The result is fully validated.
inline AnalysisConfig parse_config(std::string_view text) {
  using namespace detail;
  AnalysisConfig c;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("line " + std::to_string(line_no), "expected key=value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError("line " + std::to_string(line_no), "empty key");
    }
    if (!seen.insert(key).second) throw ValidationError(key, "specified more than once");

    if (key == "d_max") c.d_max = parse_int(key, value);
    else if (key == "block_radius") c.block_radius = parse_int(key, value);
    else if (key == "lr_consistency_tau") c.lr_consistency_tau = parse_double(key, value);
    else if (key == "min_texture") c.min_texture = parse_double(key, value);
    else if (key == "pyramid_levels") c.pyramid_levels = parse_int(key, value);
    else if (key == "pyramid_scale") c.pyramid_scale = parse_double(key, value);
    else if (key == "window_radius") c.window_radius = parse_int(key, value);
    else if (key == "iterations") c.iterations = parse_int(key, value);
    else if (key == "poly_n") c.poly_n = parse_int(key, value);
    else if (key == "poly_sigma") c.poly_sigma = parse_double(key, value);
    else if (key == "depth_thresholds") c.depth_thresholds = parse_list<3>(key, value);
    else if (key == "dir_epsilon_x") c.dir_epsilon_x = parse_double(key, value);
    else if (key == "dir_epsilon_y") c.dir_epsilon_y = parse_double(key, value);
    else if (key == "intensity_thresholds") c.intensity_thresholds = parse_list<4>(key, value);
    else if (key == "min_valid_pixels") c.min_valid_pixels = parse_int(key, value);
    else if (key == "intensity_metric") {
      if (value == "product") c.intensity_metric = IntensityMetric::product;
      else if (value == "euclidean") c.intensity_metric = IntensityMetric::euclidean;
      else throw ValidationError(key, "expected product or euclidean");
    } else if (key == "y_sign_approaching") {
      if (value == "down_is_approaching") c.y_sign_approaching = YSign::down_is_approaching;
      else if (value == "up_is_approaching") c.y_sign_approaching = YSign::up_is_approaching;
      else throw ValidationError(key, "expected down_is_approaching or up_is_approaching");
    } else {
      throw ValidationError(key, "unknown configuration key");
    }
  }
  validate(c);
  return c;
}

inline AnalysisConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace obstacle
