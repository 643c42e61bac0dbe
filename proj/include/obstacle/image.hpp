#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "obstacle/error.hpp"

namespace obstacle {

// Single-channel luminance raster, row-major, origin top-left, values in [0,1].
class ImageBuffer {
 public:
  ImageBuffer(int width, int height, std::vector<float> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width_ <= 0 || height_ <= 0) {
      throw ValidationError("image", "dimensions must be positive, got " +
                                         std::to_string(width_) + "x" +
                                         std::to_string(height_));
    }
    if (data_.size() != static_cast<std::size_t>(width_) * height_) {
      throw ValidationError("image", "data length does not match width*height");
    }
    for (float v : data_) {
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        throw ValidationError("image", "pixel value outside [0,1]");
      }
    }
  }

  // Constant image.
  static ImageBuffer filled(int width, int height, float value) {
    return ImageBuffer(width, height,
                       std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                              static_cast<std::size_t>(std::max(height, 0)),
                                          value));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const float> data() const noexcept { return data_; }

  float at(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  // Edge-replicated access.
  float clamped(int x, int y) const noexcept {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return at(x, y);
  }

  // Bilinear sample at a continuous position, edge-replicated.
  double bilinear(double x, double y) const noexcept {
    const double cx = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    const double cy = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = static_cast<int>(std::floor(cx));
    const int y0 = static_cast<int>(std::floor(cy));
    const double fx = cx - x0;
    const double fy = cy - y0;
    const double v00 = clamped(x0, y0);
    const double v10 = clamped(x0 + 1, y0);
    const double v01 = clamped(x0, y0 + 1);
    const double v11 = clamped(x0 + 1, y0 + 1);
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
  }

  bool same_shape(const ImageBuffer& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_;
  int height_;
  std::vector<float> data_;
};

// A rectified left/right pair for one frame.
class StereoPair {
 public:
  StereoPair(ImageBuffer left, ImageBuffer right, int frame_index)
      : left_(std::move(left)), right_(std::move(right)), frame_index_(frame_index) {
    if (!left_.same_shape(right_)) {
      throw DimensionError("stereo pair: left is " + std::to_string(left_.width()) + "x" +
                           std::to_string(left_.height()) + ", right is " +
                           std::to_string(right_.width()) + "x" +
                           std::to_string(right_.height()));
    }
  }

  const ImageBuffer& left() const noexcept { return left_; }
  const ImageBuffer& right() const noexcept { return right_; }
  int frame_index() const noexcept { return frame_index_; }

 private:
  ImageBuffer left_;
  ImageBuffer right_;
  int frame_index_;
};

// 8-bit RGB raster used for previews and overlays.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* pixel(int x, int y) noexcept {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* pixel(int x, int y) const noexcept {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  void set(int x, int y, std::array<std::uint8_t, 3> c) noexcept {
    if (!contains(x, y)) return;
    std::uint8_t* p = pixel(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  static RgbImage from_gray(const ImageBuffer& img) {
    RgbImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const auto g = static_cast<std::uint8_t>(std::lround(img.at(x, y) * 255.0f));
        out.set(x, y, {g, g, g});
      }
    }
    return out;
  }
};

// Decoded integer raster as stored on disk, before luminance conversion.
struct RawRaster {
  int width = 0;
  int height = 0;
  int channels = 0;     // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  unsigned maxval = 0;  // 255, 65535, or the PGM header value
  std::vector<std::uint16_t> samples;
};

namespace detail {

struct PngReadContext {
  char message[256] = {0};
  std::vector<png_byte> row;
  RawRaster raster;
};

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngReadContext*>(png_get_error_ptr(png));
  if (ctx != nullptr) {
    std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
  }
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

// Returns false with ctx.message set on failure. No C++ objects with
// destructors live in this frame, so the longjmp from libpng is safe.
inline bool read_png_into(std::FILE* fp, PngReadContext& ctx) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, png_error_handler,
                                           png_warning_handler);
  if (png == nullptr) {
    std::snprintf(ctx.message, sizeof(ctx.message), "cannot allocate PNG reader");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    std::snprintf(ctx.message, sizeof(ctx.message), "cannot allocate PNG info");
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 8 && bit_depth != 16) {
    std::snprintf(ctx.message, sizeof(ctx.message), "unsupported PNG bit depth %d", bit_depth);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    std::snprintf(ctx.message, sizeof(ctx.message), "unsupported PNG color type (palette)");
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    std::snprintf(ctx.message, sizeof(ctx.message), "interlaced PNG not supported");
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  ctx.row.resize(rowbytes);
  ctx.raster.width = static_cast<int>(width);
  ctx.raster.height = static_cast<int>(height);
  ctx.raster.channels = channels;
  ctx.raster.maxval = bit_depth == 16 ? 65535u : 255u;
  ctx.raster.samples.resize(static_cast<std::size_t>(width) * height * channels);
  const std::size_t per_row = static_cast<std::size_t>(width) * channels;
  for (png_uint_32 y = 0; y < height; ++y) {
    png_read_row(png, ctx.row.data(), nullptr);
    std::uint16_t* dst = ctx.raster.samples.data() + y * per_row;
    if (bit_depth == 16) {
      for (std::size_t i = 0; i < per_row; ++i) {
        dst[i] = static_cast<std::uint16_t>((ctx.row[2 * i] << 8) | ctx.row[2 * i + 1]);
      }
    } else {
      for (std::size_t i = 0; i < per_row; ++i) dst[i] = ctx.row[i];
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct PngWriteContext {
  char message[256] = {0};
  std::vector<png_byte> row;
};

inline bool write_png_from(std::FILE* fp, PngWriteContext& ctx, int width, int height,
                           int channels, int bit_depth, const std::uint16_t* samples) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx,
                                            png_error_handler, png_warning_handler);
  if (png == nullptr) {
    std::snprintf(ctx.message, sizeof(ctx.message), "cannot allocate PNG writer");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    std::snprintf(ctx.message, sizeof(ctx.message), "cannot allocate PNG info");
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  const int color_type = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t per_row = static_cast<std::size_t>(width) * channels;
  ctx.row.resize(per_row * (bit_depth == 16 ? 2 : 1));
  for (int y = 0; y < height; ++y) {
    const std::uint16_t* src = samples + static_cast<std::size_t>(y) * per_row;
    if (bit_depth == 16) {
      for (std::size_t i = 0; i < per_row; ++i) {
        ctx.row[2 * i] = static_cast<png_byte>(src[i] >> 8);
        ctx.row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xff);
      }
    } else {
      for (std::size_t i = 0; i < per_row; ++i) ctx.row[i] = static_cast<png_byte>(src[i]);
    }
    png_write_row(png, ctx.row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr fp(std::fopen(path.string().c_str(), mode));
  if (!fp) {
    throw IoError("cannot open " + path.string());
  }
  return fp;
}

// Netpbm header token, skipping whitespace and '#' comments.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  // The single whitespace after maxval is consumed here, which is what P5 requires.
  return tok;
}

inline int parse_pnm_int(const std::string& tok, const std::filesystem::path& path) {
  if (tok.empty() || tok.size() > 9 ||
      !std::all_of(tok.begin(), tok.end(), [](char ch) { return std::isdigit(ch) != 0; })) {
    throw FormatError("malformed PGM header in " + path.string());
  }
  return std::stoi(tok);
}

inline RawRaster read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P2") {
    throw FormatError("not a PGM file: " + path.string());
  }
  RawRaster r;
  r.width = parse_pnm_int(pnm_token(in), path);
  r.height = parse_pnm_int(pnm_token(in), path);
  const int maxval = parse_pnm_int(pnm_token(in), path);
  if (r.width <= 0 || r.height <= 0) throw FormatError("PGM has zero size: " + path.string());
  if (maxval <= 0 || maxval > 65535) {
    throw FormatError("unsupported PGM maxval " + std::to_string(maxval) + " in " +
                      path.string());
  }
  r.channels = 1;
  r.maxval = static_cast<unsigned>(maxval);
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  r.samples.resize(n);
  if (magic == "P5") {
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(n * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
      throw FormatError("truncated PGM data in " + path.string());
    }
    for (std::size_t i = 0; i < n; ++i) {
      r.samples[i] = bytes == 2 ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1])
                                : buf[i];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tok = pnm_token(in);
      if (tok.empty()) throw FormatError("truncated PGM data in " + path.string());
      r.samples[i] = static_cast<std::uint16_t>(parse_pnm_int(tok, path));
    }
  }
  for (auto s : r.samples) {
    if (s > r.maxval) throw FormatError("PGM sample exceeds maxval in " + path.string());
  }
  return r;
}

inline void write_png(const std::filesystem::path& path, int width, int height, int channels,
                      int bit_depth, std::span<const std::uint16_t> samples) {
  auto fp = open_file(path, "wb");
  PngWriteContext ctx;
  if (!write_png_from(fp.get(), ctx, width, height, channels, bit_depth, samples.data())) {
    throw IoError("cannot write PNG " + path.string() + ": " + ctx.message);
  }
  if (std::fflush(fp.get()) != 0) throw IoError("cannot write PNG " + path.string());
}

}  // namespace detail

// Reads a PNG (8/16-bit gray, gray+alpha, RGB, RGBA) or PGM without converting.
inline RawRaster read_raw_image(const std::filesystem::path& path) {
  std::array<unsigned char, 8> sig{};
  {
    auto fp = detail::open_file(path, "rb");
    const std::size_t got = std::fread(sig.data(), 1, sig.size(), fp.get());
    if (got >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '2')) {
      return detail::read_pgm(path);
    }
    if (got < 8 || png_sig_cmp(sig.data(), 0, 8) != 0) {
      throw FormatError("unrecognized image format: " + path.string());
    }
  }
  auto fp = detail::open_file(path, "rb");
  detail::PngReadContext ctx;
  if (!detail::read_png_into(fp.get(), ctx)) {
    throw FormatError("cannot decode PNG " + path.string() + ": " + ctx.message);
  }
  return std::move(ctx.raster);
}

// Luminance per ITU-R BT.601 weights; alpha is ignored.
inline ImageBuffer to_luminance(const RawRaster& raw) {
  const double scale = 1.0 / static_cast<double>(raw.maxval);
  std::vector<float> data(static_cast<std::size_t>(raw.width) * raw.height);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint16_t* s = raw.samples.data() + i * raw.channels;
    double v = 0.0;
    if (raw.channels >= 3) {
      v = (0.299 * s[0] + 0.587 * s[1] + 0.114 * s[2]) * scale;
    } else {
      v = s[0] * scale;
    }
    data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return ImageBuffer(raw.width, raw.height, std::move(data));
}

inline ImageBuffer load_image(const std::filesystem::path& path) {
  return to_luminance(read_raw_image(path));
}

// 16-bit grayscale PNG, value = round(v * 65535).
inline void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(img.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::uint16_t>(std::lround(img.data()[i] * 65535.0));
  }
  detail::write_png(path, img.width(), img.height(), 1, 16, samples);
}

inline void save_rgb(const RgbImage& img, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(img.rgb.begin(), img.rgb.end());
  detail::write_png(path, img.width, img.height, 3, 8, samples);
}

}  // namespace obstacle
