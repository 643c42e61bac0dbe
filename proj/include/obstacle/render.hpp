#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "obstacle/error.hpp"
#include "obstacle/evaluation.hpp"
#include "obstacle/image.hpp"
#include "obstacle/mask.hpp"
#include "obstacle/types.hpp"

namespace obstacle {

using Rgb = std::array<std::uint8_t, 3>;

namespace font {

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kAdvance = kGlyphWidth + 1;
inline constexpr int kLineHeight = kGlyphHeight + 2;

using Glyph = std::array<std::uint8_t, kGlyphHeight>;

// 5x7 bitmap glyphs, bit 4 is the leftmost column.
inline const Glyph& glyph(char ch) {
  static const std::map<char, Glyph> kGlyphs{
      {' ', {0, 0, 0, 0, 0, 0, 0}},
      {'a', {0b00000, 0b00000, 0b01110, 0b00001, 0b01111, 0b10001, 0b01111}},
      {'b', {0b10000, 0b10000, 0b10110, 0b11001, 0b10001, 0b10001, 0b11110}},
      {'c', {0b00000, 0b00000, 0b01110, 0b10000, 0b10000, 0b10001, 0b01110}},
      {'d', {0b00001, 0b00001, 0b01101, 0b10011, 0b10001, 0b10001, 0b01111}},
      {'e', {0b00000, 0b00000, 0b01110, 0b10001, 0b11111, 0b10000, 0b01110}},
      {'f', {0b00110, 0b01001, 0b01000, 0b11100, 0b01000, 0b01000, 0b01000}},
      {'g', {0b00000, 0b01111, 0b10001, 0b10001, 0b01111, 0b00001, 0b01110}},
      {'h', {0b10000, 0b10000, 0b10110, 0b11001, 0b10001, 0b10001, 0b10001}},
      {'i', {0b00100, 0b00000, 0b01100, 0b00100, 0b00100, 0b00100, 0b01110}},
      {'j', {0b00010, 0b00000, 0b00110, 0b00010, 0b00010, 0b10010, 0b01100}},
      {'k', {0b10000, 0b10000, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010}},
      {'l', {0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
      {'m', {0b00000, 0b00000, 0b11010, 0b10101, 0b10101, 0b10001, 0b10001}},
      {'n', {0b00000, 0b00000, 0b10110, 0b11001, 0b10001, 0b10001, 0b10001}},
      {'o', {0b00000, 0b00000, 0b01110, 0b10001, 0b10001, 0b10001, 0b01110}},
      {'p', {0b00000, 0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000}},
      {'q', {0b00000, 0b01111, 0b10001, 0b10001, 0b01111, 0b00001, 0b00001}},
      {'r', {0b00000, 0b00000, 0b10110, 0b11001, 0b10000, 0b10000, 0b10000}},
      {'s', {0b00000, 0b00000, 0b01110, 0b10000, 0b01110, 0b00001, 0b11110}},
      {'t', {0b01000, 0b01000, 0b11100, 0b01000, 0b01000, 0b01001, 0b00110}},
      {'u', {0b00000, 0b00000, 0b10001, 0b10001, 0b10001, 0b10011, 0b01101}},
      {'v', {0b00000, 0b00000, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
      {'w', {0b00000, 0b00000, 0b10001, 0b10001, 0b10101, 0b10101, 0b01010}},
      {'x', {0b00000, 0b00000, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001}},
      {'y', {0b00000, 0b10001, 0b10001, 0b01111, 0b00001, 0b10001, 0b01110}},
      {'z', {0b00000, 0b00000, 0b11111, 0b00010, 0b00100, 0b01000, 0b11111}},
      {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
      {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
      {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
      {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
      {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
      {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
      {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
      {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
      {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
      {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
      {'_', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b11111}},
      {'-', {0b00000, 0b00000, 0b00000, 0b01110, 0b00000, 0b00000, 0b00000}},
      {'.', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100}},
      {':', {0b00000, 0b01100, 0b01100, 0b00000, 0b01100, 0b01100, 0b00000}},
      {'/', {0b00001, 0b00010, 0b00010, 0b00100, 0b01000, 0b01000, 0b10000}},
      {'?', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b00000, 0b00100}},
  };
  const char key = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  const auto it = kGlyphs.find(key);
  return it != kGlyphs.end() ? it->second : kGlyphs.at('?');
}

}  // namespace font

inline void draw_text(RgbImage& img, int x, int y, std::string_view text, Rgb color) {
  for (char ch : text) {
    const auto& g = font::glyph(ch);
    for (int row = 0; row < font::kGlyphHeight; ++row) {
      for (int col = 0; col < font::kGlyphWidth; ++col) {
        if (g[row] & (1 << (font::kGlyphWidth - 1 - col))) img.set(x + col, y + row, color);
      }
    }
    x += font::kAdvance;
  }
}

inline void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, Rgb color) {
  for (int y = std::max(y0, 0); y < std::min(y1, img.height); ++y) {
    for (int x = std::max(x0, 0); x < std::min(x1, img.width); ++x) img.set(x, y, color);
  }
}

// Bresenham; pixels outside the image are skipped.
inline void draw_line(RgbImage& img, int x0, int y0, int x1, int y1, Rgb color) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    img.set(x0, y0, color);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

inline void draw_arrow(RgbImage& img, double x0, double y0, double x1, double y1, Rgb color) {
  const int ax = static_cast<int>(std::lround(x0));
  const int ay = static_cast<int>(std::lround(y0));
  const int bx = static_cast<int>(std::lround(x1));
  const int by = static_cast<int>(std::lround(y1));
  draw_line(img, ax, ay, bx, by, color);
  const double len = std::hypot(x1 - x0, y1 - y0);
  if (len < 1.0) return;
  const double head = std::min(5.0, 0.5 * len);
  const double ang = std::atan2(y1 - y0, x1 - x0);
  for (double side : {-1.0, 1.0}) {
    const double a = ang + 3.14159265358979323846 + side * 0.5;
    draw_line(img, bx, by, static_cast<int>(std::lround(x1 + head * std::cos(a))),
              static_cast<int>(std::lround(y1 + head * std::sin(a))), color);
  }
}

// Deterministic hue from the class name (FNV-1a), full value.
inline Rgb class_color(std::string_view class_name) {
  std::uint32_t h = 2166136261u;
  for (char ch : class_name) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 16777619u;
  }
  const double hue = static_cast<double>(h % 360u);
  const double s = 0.85;
  const double c = s;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = 1.0 - c;
  auto q = [&](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * (v + m))); };
  return {q(r), q(g), q(b)};
}

struct OverlayStyle {
  double tint_alpha = 0.4;
  double arrow_gain = 5.0;
  double arrow_max = 50.0;
  bool draw_labels = true;
  bool draw_arrows = true;
  Rgb text_color{255, 255, 255};
  Rgb text_background{0, 0, 0};
  Rgb arrow_color{255, 255, 0};
};

struct OverlayObject {
  std::int64_t object_id = 0;
  std::string class_name;
  BinaryMask mask;
  LabelSet labels;
  double xM = 0.0;
  double yM = 0.0;
  bool has_flow = false;
};

// Mask tint, label block above the bounding box and a flow arrow from the
// mask centroid.
inline RgbImage render_overlay(const ImageBuffer& frame, const std::vector<OverlayObject>& objects,
                               const OverlayStyle& style = {}) {
  RgbImage out = RgbImage::from_gray(frame);
  for (const auto& o : objects) {
    if (o.mask.width != frame.width() || o.mask.height != frame.height()) {
      throw DimensionError("overlay mask for object " + std::to_string(o.object_id) +
                           " does not match the frame size");
    }
    const Rgb tint = class_color(o.class_name);
    for (int y = 0; y < frame.height(); ++y) {
      for (int x = 0; x < frame.width(); ++x) {
        if (!o.mask.at(x, y)) continue;
        std::uint8_t* p = out.pixel(x, y);
        for (int c = 0; c < 3; ++c) {
          p[c] = static_cast<std::uint8_t>(
              std::lround((1.0 - style.tint_alpha) * p[c] + style.tint_alpha * tint[c]));
        }
      }
    }
  }
  for (const auto& o : objects) {
    int min_x = o.mask.width, min_y = o.mask.height, max_x = -1, max_y = -1;
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < o.mask.height; ++y) {
      for (int x = 0; x < o.mask.width; ++x) {
        if (!o.mask.at(x, y)) continue;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        sx += x;
        sy += y;
        ++n;
      }
    }
    if (n == 0) continue;
    if (style.draw_arrows && o.has_flow) {
      const double cx = sx / static_cast<double>(n);
      const double cy = sy / static_cast<double>(n);
      double ax = style.arrow_gain * o.xM;
      double ay = style.arrow_gain * o.yM;
      const double len = std::hypot(ax, ay);
      if (len > style.arrow_max) {
        ax *= style.arrow_max / len;
        ay *= style.arrow_max / len;
      }
      draw_arrow(out, cx, cy, cx + ax, cy + ay, style.arrow_color);
    }
    if (style.draw_labels) {
      const std::array<std::string, 5> lines{
          o.class_name, std::string(to_string(o.labels.depth)),
          std::string(to_string(o.labels.x_dir)), std::string(to_string(o.labels.y_dir)),
          std::string(to_string(o.labels.intensity))};
      std::size_t longest = 0;
      for (const auto& l : lines) longest = std::max(longest, l.size());
      const int block_w = static_cast<int>(longest) * font::kAdvance + 2;
      const int block_h = static_cast<int>(lines.size()) * font::kLineHeight + 1;
      const int left = std::clamp(min_x, 0, std::max(0, out.width - block_w));
      const int top = std::max(0, min_y - block_h - 1);
      fill_rect(out, left, top, left + block_w, top + block_h, style.text_background);
      for (std::size_t i = 0; i < lines.size(); ++i) {
        draw_text(out, left + 1, top + 1 + static_cast<int>(i) * font::kLineHeight, lines[i],
                  style.text_color);
      }
    }
  }
  return out;
}

// Flow arrows on a regular grid over the base frame.
inline RgbImage render_flow_preview(const ImageBuffer& base, const FlowField& flow,
                                    int stride = 16, double gain = 3.0) {
  if (base.width() != flow.width() || base.height() != flow.height()) {
    throw DimensionError("flow preview: image and flow dimensions differ");
  }
  RgbImage out = RgbImage::from_gray(base);
  for (int y = stride / 2; y < base.height(); y += stride) {
    for (int x = stride / 2; x < base.width(); x += stride) {
      const double u = flow.u_at(x, y);
      const double v = flow.v_at(x, y);
      if (std::hypot(u, v) * gain >= 1.0) {
        draw_arrow(out, x, y, x + gain * u, y + gain * v, {0, 255, 0});
      }
      out.set(x, y, {255, 0, 0});
    }
  }
  return out;
}

// Reads the fields of analysis.json needed for overlays, grouped by frame.
inline std::map<int, std::vector<OverlayObject>> load_overlay_objects(
    const std::filesystem::path& path) {
  const auto doc = detail::parse_json_file(path);
  // Full schema and vocabulary check first.
  (void)parse_label_entries(doc, false);
  std::map<int, std::vector<OverlayObject>> out;
  const auto& frames = doc.at("frames");
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const auto& f = frames[fi];
    const int frame = f.at("frame_index").get<int>();
    auto& list = out[frame];
    const auto& objects = f.at("objects");
    for (std::size_t oi = 0; oi < objects.size(); ++oi) {
      const auto& o = objects[oi];
      const std::string where =
          "frames[" + std::to_string(fi) + "].objects[" + std::to_string(oi) + "]";
      OverlayObject ov;
      ov.object_id = o.at("object_id").get<std::int64_t>();
      if (!o.at("class_name").is_string()) {
        throw ValidationError(where + ".class_name", "expected a string");
      }
      ov.class_name = o.at("class_name").get<std::string>();
      for (const char* k : {"xM", "yM"}) {
        if (!o.at(k).is_number()) throw ValidationError(where + "." + k, "expected a number");
      }
      if (!o.at("has_flow").is_boolean()) {
        throw ValidationError(where + ".has_flow", "expected a boolean");
      }
      ov.xM = o.at("xM").get<double>();
      ov.yM = o.at("yM").get<double>();
      ov.has_flow = o.at("has_flow").get<bool>();
      ov.labels = detail::parse_labels(o, where, false);
      const auto& m = o.at("mask");
      detail::require_keys(m, where + ".mask", {"size", "rle"});
      if (!m.at("size").is_array() || m.at("size").size() != 2 || !m.at("rle").is_array()) {
        throw ValidationError(where + ".mask", "expected size [h, w] and rle counts");
      }
      std::vector<std::uint32_t> counts;
      for (const auto& c : m.at("rle")) {
        if (!c.is_number_unsigned()) {
          throw ValidationError(where + ".mask.rle", "expected non-negative integers");
        }
        counts.push_back(c.get<std::uint32_t>());
      }
      ov.mask = decode_rle(counts, detail::json_int32(m.at("size")[0], where + ".mask.size[0]"),
                           detail::json_int32(m.at("size")[1], where + ".mask.size[1]"));
      list.push_back(std::move(ov));
    }
  }
  return out;
}

}  // namespace obstacle
