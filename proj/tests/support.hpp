#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "obstacle/obstacle.hpp"

namespace testing_support {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            ("obstacle_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& p) {
  const auto b = read_bytes(p);
  return {b.begin(), b.end()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline obstacle::ImageBuffer random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> d(static_cast<std::size_t>(w) * h);
  for (auto& v : d) v = u(rng);
  return obstacle::ImageBuffer(w, h, std::move(d));
}

inline obstacle::BinaryMask random_mask(int w, int h, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution on(p);
  obstacle::BinaryMask m(w, h);
  for (auto& px : m.pixels) px = on(rng) ? 1 : 0;
  return m;
}

inline obstacle::BinaryMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  obstacle::BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.set(x, y, true);
  }
  return m;
}

// Fraction of interior valid pixels whose disparity is within tol of truth.
struct DisparityScore {
  std::size_t valid = 0;
  std::size_t within = 0;
  double fraction() const { return valid == 0 ? 0.0 : static_cast<double>(within) / valid; }
};

inline DisparityScore score_disparity(const obstacle::DisparityMap& m, double truth, int margin,
                                      double tol) {
  DisparityScore s;
  for (int y = margin; y < m.height() - margin; ++y) {
    for (int x = m.d_max() + margin; x < m.width() - margin; ++x) {
      if (!m.is_valid(x, y)) continue;
      ++s.valid;
      if (std::fabs(m.at(x, y) - truth) <= tol) ++s.within;
    }
  }
  return s;
}

// Mean endpoint error against a uniform truth over pixels at least `margin`
// away from every border.
inline double interior_epe(const obstacle::FlowField& f, double u, double v, int margin) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = margin; y < f.height() - margin; ++y) {
    for (int x = margin; x < f.width() - margin; ++x) {
      sum += std::hypot(f.u_at(x, y) - u, f.v_at(x, y) - v);
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

inline double max_magnitude(const obstacle::FlowField& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.u().size(); ++i) m = std::max(m, std::hypot(static_cast<double>(f.u()[i]), static_cast<double>(f.v()[i])));
  return m;
}

}  // namespace testing_support
