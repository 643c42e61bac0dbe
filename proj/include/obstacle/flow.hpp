#pragma once

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

#include "obstacle/config.hpp"
#include "obstacle/error.hpp"
#include "obstacle/image.hpp"
#include "obstacle/parallel.hpp"
#include "obstacle/types.hpp"

namespace obstacle {

// Local quadratic model f(p) ~ p^T A p + b^T p + c at one pixel, with
// p = (x, y) in pixels relative to the pixel centre.
struct PolyCoeffs {
  double a11 = 0.0;
  double a12 = 0.0;  // off-diagonal of the symmetric A
  double a22 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double c = 0.0;
};

struct PolyExpansion {
  int width = 0;
  int height = 0;
  std::vector<PolyCoeffs> coeffs;

  const PolyCoeffs& at(int x, int y) const noexcept {
    return coeffs[static_cast<std::size_t>(y) * width + x];
  }
};

struct FlowParams {
  int pyramid_levels = 3;
  double pyramid_scale = 0.5;
  int window_radius = 7;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.1;

  static FlowParams from(const AnalysisConfig& c) {
    return {c.pyramid_levels, c.pyramid_scale, c.window_radius,
            c.iterations,     c.poly_n,        c.poly_sigma};
  }

  void validate() const {
    AnalysisConfig c;
    c.pyramid_levels = pyramid_levels;
    c.pyramid_scale = pyramid_scale;
    c.window_radius = window_radius;
    c.iterations = iterations;
    c.poly_n = poly_n;
    c.poly_sigma = poly_sigma;
    obstacle::validate(c);
  }
};

namespace detail {

// Correlation kernels mapping a poly_n x poly_n neighbourhood to the six
// weighted-least-squares coefficients [c, b1, b2, a11, a22, 2*a12] under a
// Gaussian applicability.
inline std::vector<std::array<double, 6>> poly_kernels(int poly_n, double sigma) {
  const int r = poly_n / 2;
  const int n = poly_n * poly_n;
  Eigen::Matrix<double, 6, Eigen::Dynamic> wb(6, n);
  Eigen::Matrix<double, 6, 6> gram = Eigen::Matrix<double, 6, 6>::Zero();
  int k = 0;
  for (int j = -r; j <= r; ++j) {
    for (int i = -r; i <= r; ++i, ++k) {
      const double g = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      Eigen::Matrix<double, 6, 1> basis;
      basis << 1.0, i, j, static_cast<double>(i) * i, static_cast<double>(j) * j,
          static_cast<double>(i) * j;
      gram += g * basis * basis.transpose();
      wb.col(k) = g * basis;
    }
  }
  const Eigen::Matrix<double, 6, Eigen::Dynamic> filters = gram.ldlt().solve(wb);
  std::vector<std::array<double, 6>> out(n);
  for (int col = 0; col < n; ++col) {
    for (int row = 0; row < 6; ++row) out[col][row] = filters(row, col);
  }
  return out;
}

inline double sample_bilinear(const std::vector<double>& plane, int w, int h, double x,
                              double y) noexcept {
  const double cx = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  auto at = [&](int xx, int yy) { return plane[static_cast<std::size_t>(yy) * w + xx]; };
  return (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x1, y0)) +
         fy * ((1.0 - fx) * at(x0, y1) + fx * at(x1, y1));
}

inline PolyCoeffs sample_coeffs(const PolyExpansion& e, double x, double y) noexcept {
  const double cx = std::clamp(x, 0.0, static_cast<double>(e.width - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(e.height - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, e.width - 1);
  const int y1 = std::min(y0 + 1, e.height - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  const PolyCoeffs& p00 = e.at(x0, y0);
  const PolyCoeffs& p10 = e.at(x1, y0);
  const PolyCoeffs& p01 = e.at(x0, y1);
  const PolyCoeffs& p11 = e.at(x1, y1);
  auto mix = [&](double PolyCoeffs::*m) {
    return w00 * (p00.*m) + w10 * (p10.*m) + w01 * (p01.*m) + w11 * (p11.*m);
  };
  return {mix(&PolyCoeffs::a11), mix(&PolyCoeffs::a12), mix(&PolyCoeffs::a22),
          mix(&PolyCoeffs::b1),  mix(&PolyCoeffs::b2),  mix(&PolyCoeffs::c)};
}

// Displacement planes in double precision, used between pyramid levels.
struct Displacement {
  int width = 0;
  int height = 0;
  std::vector<double> u;
  std::vector<double> v;

  static Displacement zeros(int w, int h) {
    const auto n = static_cast<std::size_t>(w) * h;
    return {w, h, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  }

  static Displacement from(const FlowField& f) {
    return {f.width(), f.height(), std::vector<double>(f.u().begin(), f.u().end()),
            std::vector<double>(f.v().begin(), f.v().end())};
  }

  FlowField to_field() const {
    return FlowField(width, height, std::vector<float>(u.begin(), u.end()),
                     std::vector<float>(v.begin(), v.end()));
  }
};

inline constexpr double kSingularRatio = 1e-9;
inline constexpr double kBorderRamp = 5.0;

// Confidence of a warped sample position: 0 outside the image, rising
// linearly over the first kBorderRamp pixels inside it.
inline double border_weight(double pos, int extent) noexcept {
  const double dist = std::min(pos, static_cast<double>(extent - 1) - pos);
  if (dist < 0.0) return 0.0;
  return std::min(1.0, (dist + 1.0) / (kBorderRamp + 1.0));
}

inline Displacement flow_step_impl(const PolyExpansion& prev, const PolyExpansion& next,
                                   const Displacement& prior, int window_radius, int workers) {
  const int w = prev.width;
  const int h = prev.height;
  const auto n = static_cast<std::size_t>(w) * h;
  // Per-pixel normal-equation terms: G = Abar^T Abar (g11, g12, g22), h = Abar^T db.
  constexpr int kTerms = 5;
  std::vector<std::array<double, kTerms>> terms(n);

  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      const double du = prior.u[i];
      const double dv = prior.v[i];
      const PolyCoeffs& p1 = prev.at(x, y);
      const double wx = x + du;
      const double wy = y + dv;
      const double conf = border_weight(wx, w) * border_weight(wy, h);
      if (conf == 0.0) {
        terms[i] = {};
        continue;
      }
      const PolyCoeffs p2 = sample_coeffs(next, wx, wy);
      const double a11 = 0.5 * (p1.a11 + p2.a11);
      const double a12 = 0.5 * (p1.a12 + p2.a12);
      const double a22 = 0.5 * (p1.a22 + p2.a22);
      // The prior is folded in so the solve yields the total displacement.
      const double db1 = -0.5 * (p2.b1 - p1.b1) + a11 * du + a12 * dv;
      const double db2 = -0.5 * (p2.b2 - p1.b2) + a12 * du + a22 * dv;
      terms[i] = {conf * (a11 * a11 + a12 * a12), conf * a12 * (a11 + a22),
                  conf * (a12 * a12 + a22 * a22), conf * (a11 * db1 + a12 * db2),
                  conf * (a12 * db1 + a22 * db2)};
    }
  });

  // Box aggregation, horizontal then vertical, edge replicated.
  std::vector<std::array<double, kTerms>> horiz(n);
  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      std::array<double, kTerms> s{};
      for (int dx = -window_radius; dx <= window_radius; ++dx) {
        const auto& t = terms[static_cast<std::size_t>(y) * w + std::clamp(x + dx, 0, w - 1)];
        for (int k = 0; k < kTerms; ++k) s[k] += t[k];
      }
      horiz[static_cast<std::size_t>(y) * w + x] = s;
    }
  });

  Displacement out{w, h, std::vector<double>(n), std::vector<double>(n)};
  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      std::array<double, kTerms> s{};
      for (int dy = -window_radius; dy <= window_radius; ++dy) {
        const auto& t = horiz[static_cast<std::size_t>(std::clamp(y + dy, 0, h - 1)) * w + x];
        for (int k = 0; k < kTerms; ++k) s[k] += t[k];
      }
      const auto i = static_cast<std::size_t>(y) * w + x;
      const double det = s[0] * s[2] - s[1] * s[1];
      const double tr = s[0] + s[2];
      if (!(tr > 0.0) || det <= kSingularRatio * tr * tr) {
        out.u[i] = prior.u[i];
        out.v[i] = prior.v[i];
        continue;
      }
      out.u[i] = (s[2] * s[3] - s[1] * s[4]) / det;
      out.v[i] = (s[0] * s[4] - s[1] * s[3]) / det;
    }
  });
  return out;
}

// 5-tap binomial blur, edge replicated, followed by resampling at 1/scale.
inline ImageBuffer pyramid_down(const ImageBuffer& img, double scale) {
  static constexpr std::array<double, 5> kTaps{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int w = img.width();
  const int h = img.height();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -2; k <= 2; ++k) s += kTaps[k + 2] * img.clamped(x + k, y);
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  std::vector<double> blurred(tmp.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -2; k <= 2; ++k) {
        s += kTaps[k + 2] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
      }
      blurred[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  const int nw = std::max(1, static_cast<int>(std::lround(w * scale)));
  const int nh = std::max(1, static_cast<int>(std::lround(h * scale)));
  std::vector<float> out(static_cast<std::size_t>(nw) * nh);
  for (int y = 0; y < nh; ++y) {
    for (int x = 0; x < nw; ++x) {
      const double v = sample_bilinear(blurred, w, h, x / scale, y / scale);
      out[static_cast<std::size_t>(y) * nw + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return ImageBuffer(nw, nh, std::move(out));
}

inline Displacement upscale_displacement(const Displacement& coarse, int w, int h, double scale) {
  Displacement out{w, h, std::vector<double>(static_cast<std::size_t>(w) * h),
                   std::vector<double>(static_cast<std::size_t>(w) * h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      out.u[i] = sample_bilinear(coarse.u, coarse.width, coarse.height, x * scale, y * scale) /
                 scale;
      out.v[i] = sample_bilinear(coarse.v, coarse.width, coarse.height, x * scale, y * scale) /
                 scale;
    }
  }
  return out;
}

}  // namespace detail

// Weighted least-squares quadratic fit at every pixel under a Gaussian
// applicability of scale `poly_sigma` over a poly_n x poly_n window.
inline PolyExpansion poly_expand(const ImageBuffer& img, int poly_n, double poly_sigma,
                                 int workers = 1) {
  if (poly_n < 3 || poly_n % 2 == 0) throw ValidationError("poly_n", "must be odd and >= 3");
  if (!(poly_sigma > 0.0)) throw ValidationError("poly_sigma", "must be > 0");
  if (img.width() <= poly_n || img.height() <= poly_n) {
    throw DimensionError("image " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()) + " is not larger than poly_n=" +
                         std::to_string(poly_n));
  }
  const auto kernels = detail::poly_kernels(poly_n, poly_sigma);
  const int r = poly_n / 2;
  PolyExpansion out{img.width(), img.height(),
                    std::vector<PolyCoeffs>(static_cast<std::size_t>(img.width()) *
                                            img.height())};
  parallel_for(static_cast<std::size_t>(img.height()), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < img.width(); ++x) {
      std::array<double, 6> rc{};
      int k = 0;
      for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i, ++k) {
          const double f = img.clamped(x + i, y + j);
          for (int m = 0; m < 6; ++m) rc[m] += kernels[k][m] * f;
        }
      }
      out.coeffs[static_cast<std::size_t>(y) * img.width() + x] =
          PolyCoeffs{rc[3], 0.5 * rc[5], rc[4], rc[1], rc[2], rc[0]};
    }
  });
  return out;
}

// One refinement: solves Abar d = db per pixel with the normal equations
// aggregated over a box window. Near-singular systems keep the prior.
inline FlowField flow_step(const PolyExpansion& prev, const PolyExpansion& next,
                           const FlowField& prior, int window_radius, int workers = 1) {
  if (prev.width != next.width || prev.height != next.height || prior.width() != prev.width ||
      prior.height() != prev.height) {
    throw DimensionError("flow_step: expansions and prior must share dimensions");
  }
  if (window_radius < 0) throw ValidationError("window_radius", "must be >= 0");
  return detail::flow_step_impl(prev, next, detail::Displacement::from(prior), window_radius,
                                workers)
      .to_field();
}

// Number of pyramid levels actually usable: the coarsest level must stay
// larger than the polynomial window.
inline int usable_pyramid_levels(int width, int height, const FlowParams& params) {
  int levels = 1;
  double w = width;
  double h = height;
  while (levels < params.pyramid_levels) {
    const int nw = std::max(1, static_cast<int>(std::lround(w * params.pyramid_scale)));
    const int nh = std::max(1, static_cast<int>(std::lround(h * params.pyramid_scale)));
    if (nw <= params.poly_n || nh <= params.poly_n) break;
    w = nw;
    h = nh;
    ++levels;
  }
  return levels;
}

// Coarse-to-fine dense flow from `prev` to `next`: next(p + flow(p)) ~ prev(p).
inline FlowField compute_flow(const ImageBuffer& prev, const ImageBuffer& next,
                              const FlowParams& params, int workers = 1) {
  params.validate();
  if (!prev.same_shape(next)) {
    throw DimensionError("compute_flow: frames are " + std::to_string(prev.width()) + "x" +
                         std::to_string(prev.height()) + " and " +
                         std::to_string(next.width()) + "x" + std::to_string(next.height()));
  }
  if (prev.width() <= params.poly_n || prev.height() <= params.poly_n) {
    throw DimensionError("compute_flow: image too small for poly_n=" +
                         std::to_string(params.poly_n));
  }
  const int levels = usable_pyramid_levels(prev.width(), prev.height(), params);
  if (levels < params.pyramid_levels) {
    spdlog::warn("compute_flow: {}x{} image supports only {} of {} pyramid levels",
                 prev.width(), prev.height(), levels, params.pyramid_levels);
  }

  std::vector<ImageBuffer> pyr_prev{prev};
  std::vector<ImageBuffer> pyr_next{next};
  for (int l = 1; l < levels; ++l) {
    pyr_prev.push_back(detail::pyramid_down(pyr_prev.back(), params.pyramid_scale));
    pyr_next.push_back(detail::pyramid_down(pyr_next.back(), params.pyramid_scale));
  }

  detail::Displacement flow;
  for (int l = levels - 1; l >= 0; --l) {
    const ImageBuffer& a = pyr_prev[static_cast<std::size_t>(l)];
    const ImageBuffer& b = pyr_next[static_cast<std::size_t>(l)];
    if (l == levels - 1) {
      flow = detail::Displacement::zeros(a.width(), a.height());
    } else {
      flow = detail::upscale_displacement(flow, a.width(), a.height(), params.pyramid_scale);
    }
    const PolyExpansion ea = poly_expand(a, params.poly_n, params.poly_sigma, workers);
    const PolyExpansion eb = poly_expand(b, params.poly_n, params.poly_sigma, workers);
    for (int it = 0; it < params.iterations; ++it) {
      flow = detail::flow_step_impl(ea, eb, flow, params.window_radius, workers);
    }
  }
  return flow.to_field();
}

// Bilinear backward warp: out(p) = img(p + flow(p)), edge clamped.
inline ImageBuffer warp_image(const ImageBuffer& img, const FlowField& flow) {
  if (img.width() != flow.width() || img.height() != flow.height()) {
    throw DimensionError("warp_image: image and flow dimensions differ");
  }
  std::vector<float> out(img.size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double v = img.bilinear(x + flow.u_at(x, y), y + flow.v_at(x, y));
      out[static_cast<std::size_t>(y) * img.width() + x] =
          static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return ImageBuffer(img.width(), img.height(), std::move(out));
}

// Middlebury .flo: "PIEH", int32 width, int32 height, then interleaved
// float32 (u, v) row-major; all little-endian.
inline std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(12 + flow.u().size() * 8);
  auto put32 = [&](std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  };
  for (char ch : {'P', 'I', 'E', 'H'}) bytes.push_back(static_cast<std::uint8_t>(ch));
  put32(static_cast<std::uint32_t>(flow.width()));
  put32(static_cast<std::uint32_t>(flow.height()));
  for (std::size_t i = 0; i < flow.u().size(); ++i) {
    put32(std::bit_cast<std::uint32_t>(flow.u()[i]));
    put32(std::bit_cast<std::uint32_t>(flow.v()[i]));
  }
  return bytes;
}

inline FlowField decode_flo(std::span<const std::uint8_t> bytes) {
  auto get32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[off + k]) << (8 * k);
    return v;
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "PIEH", 4) != 0) {
    throw FormatError(".flo: missing PIEH tag");
  }
  const auto w = static_cast<std::int32_t>(get32(4));
  const auto h = static_cast<std::int32_t>(get32(8));
  if (w < 1 || h < 1 || w > 99999 || h > 99999) {
    throw FormatError(".flo: illegal dimensions");
  }
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() != 12 + n * 8) throw FormatError(".flo: wrong payload length");
  std::vector<float> u(n);
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = std::bit_cast<float>(get32(12 + 8 * i));
    v[i] = std::bit_cast<float>(get32(16 + 8 * i));
  }
  return FlowField(w, h, std::move(u), std::move(v));
}

inline void save_flo(const FlowField& flow, const std::filesystem::path& path) {
  const auto bytes = encode_flo(flow);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

inline FlowField load_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return decode_flo(bytes);
  } catch (const FormatError& e) {
    throw FormatError(std::string(e.what()) + " in " + path.string());
  }
}

}  // namespace obstacle
