#include <gtest/gtest.h>

#include "support.hpp"

using namespace obstacle;
using testing_support::TempDir;

namespace {

AnalysisConfig stereo_config(int d_max) {
  AnalysisConfig c;
  c.d_max = d_max;
  return c;
}

// Straight re-derivation of the matcher on a small pair: SAD over the edge
// replicated window, strict argmin, texture floor and left-right check.
struct BruteDisparity {
  std::vector<int> best;        // integer argmin, -1 when not evaluated
  std::vector<double> margin;   // gap between best and runner-up cost
  std::vector<int> right_best;  // right-view argmin per column
  std::vector<double> variance;
};

double sad(const ImageBuffer& l, const ImageBuffer& r, int x, int y, int d, int rad) {
  double s = 0.0;
  for (int dy = -rad; dy <= rad; ++dy) {
    for (int dx = -rad; dx <= rad; ++dx) {
      const int xx = std::clamp(x + dx, 0, l.width() - 1);
      const int yy = std::clamp(y + dy, 0, l.height() - 1);
      s += std::fabs(static_cast<double>(l.at(xx, yy)) - r.at(std::max(xx - d, 0), yy));
    }
  }
  return s;
}

}  // namespace

TEST(Disparity, IdenticalPairIsNearZero) {
  const auto pair = synth::make_shifted_pair(96, 48, 0.0, 3);
  const auto map = compute_disparity(pair, stereo_config(16));
  ASSERT_GT(map.valid_count(), 0u);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.is_valid(x, y)) EXPECT_NEAR(map.at(x, y), 0.0, 0.5);
    }
  }
}

TEST(Disparity, RecoversConstantShift) {
  for (double shift : {3.0, 5.0, 7.5, 12.25}) {
    const auto pair = synth::make_shifted_pair(128, 64, shift, 11);
    const auto map = compute_disparity(pair, stereo_config(24));
    const auto score = testing_support::score_disparity(map, shift, 4, 0.5);
    EXPECT_GT(score.valid, 1000u);
    EXPECT_GE(score.fraction(), 0.95) << "shift " << shift;
  }
}

TEST(Disparity, LeftBorderColumnsAreInvalid) {
  const auto pair = synth::make_shifted_pair(64, 32, 4.0, 5);
  const auto map = compute_disparity(pair, stereo_config(20));
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < 20; ++x) {
      EXPECT_FALSE(map.is_valid(x, y));
      EXPECT_EQ(map.at(x, y), 0.0f);
    }
  }
}

TEST(Disparity, TexturelessRegionIsInvalid) {
  const ImageBuffer flat = ImageBuffer::filled(48, 24, 0.4f);
  const auto map = compute_disparity(StereoPair(flat, flat, 0), stereo_config(8));
  EXPECT_EQ(map.valid_count(), 0u);
}

TEST(Disparity, ValuesStayInRange) {
  std::mt19937_64 rng(9);
  const auto l = testing_support::random_image(60, 20, rng);
  const auto r = testing_support::random_image(60, 20, rng);
  const auto map = compute_disparity(StereoPair(l, r, 0), stereo_config(12));
  for (std::size_t i = 0; i < map.disparity().size(); ++i) {
    if (map.valid()[i]) {
      EXPECT_GE(map.disparity()[i], 0.0f);
      EXPECT_LE(map.disparity()[i], 12.0f);
    } else {
      EXPECT_EQ(map.disparity()[i], 0.0f);
    }
  }
}

TEST(Disparity, MatchesBruteForceMatcher) {
  std::mt19937_64 rng(21);
  const int w = 40, h = 12, d_max = 8, rad = 2;
  AnalysisConfig c = stereo_config(d_max);
  c.block_radius = rad;
  const auto left = testing_support::random_image(w, h, rng);
  // Right view: left shifted by 3 plus noise so the costs are not degenerate.
  std::vector<float> rd(static_cast<std::size_t>(w) * h);
  std::uniform_real_distribution<float> noise(-0.1f, 0.1f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      rd[static_cast<std::size_t>(y) * w + x] =
          std::clamp(left.clamped(x + 3, y) + noise(rng), 0.0f, 1.0f);
    }
  }
  const ImageBuffer right(w, h, rd);
  const auto map = compute_disparity(StereoPair(left, right, 0), c);

  std::size_t checked = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = d_max; x < w; ++x) {
      std::vector<double> costs(d_max + 1);
      for (int d = 0; d <= d_max; ++d) costs[d] = sad(left, right, x, y, d, rad);
      const int best = static_cast<int>(std::min_element(costs.begin(), costs.end()) - costs.begin());
      auto sorted = costs;
      std::sort(sorted.begin(), sorted.end());
      if (sorted[1] - sorted[0] < 1e-3) continue;  // float ties may break differently
      double refined = best;
      if (best > 0 && best < d_max) {
        const double denom = costs[best - 1] - 2 * costs[best] + costs[best + 1];
        if (denom > 0) refined += std::clamp((costs[best - 1] - costs[best + 1]) / (2 * denom), -0.5, 0.5);
      }
      const int xr = x - static_cast<int>(std::lround(refined));
      int rbest = 0;
      double rcost = std::numeric_limits<double>::infinity();
      for (int d = 0; d <= std::min(d_max, w - 1 - xr); ++d) {
        const double cst = sad(left, right, xr + d, y, d, rad);
        if (cst < rcost - 1e-9) {
          rcost = cst;
          rbest = d;
        }
      }
      const bool expect_valid = std::fabs(refined - rbest) <= c.lr_consistency_tau;
      EXPECT_EQ(map.is_valid(x, y), expect_valid) << x << "," << y;
      if (expect_valid && map.is_valid(x, y)) EXPECT_NEAR(map.at(x, y), refined, 1e-3);
      ++checked;
    }
  }
  EXPECT_GT(checked, 200u);
}

TEST(Disparity, WorkerCountDoesNotChangeResult) {
  const auto pair = synth::make_shifted_pair(96, 40, 6.0, 8);
  const auto a = compute_disparity(pair, stereo_config(16), 1);
  const auto b = compute_disparity(pair, stereo_config(16), 4);
  EXPECT_TRUE(a == b);
}

TEST(Disparity, RejectsRangeWiderThanImage) {
  const auto pair = synth::make_shifted_pair(32, 16, 2.0, 1);
  EXPECT_THROW(compute_disparity(pair, stereo_config(32)), ValidationError);
}

TEST(DisparityMap, ConstructorEnforcesInvariants) {
  EXPECT_THROW(DisparityMap(2, 1, 4, {5.0f, 0.0f}, {1, 0}), InvariantError);
  EXPECT_THROW(DisparityMap(2, 1, 4, {1.0f, 2.0f}, {1, 0}), InvariantError);
  EXPECT_NO_THROW(DisparityMap(2, 1, 4, {4.0f, 0.0f}, {1, 0}));
}

TEST(DisparityPng, RoundTripWithinQuantization) {
  TempDir dir("disp");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> d(0.0f, 64.0f);
  std::bernoulli_distribution valid(0.7);
  const int w = 31, h = 17;
  std::vector<float> disp(w * h, 0.0f);
  std::vector<std::uint8_t> val(w * h, 0);
  for (int i = 0; i < w * h; ++i) {
    if (valid(rng)) {
      val[i] = 1;
      disp[i] = d(rng);
    }
  }
  disp[0] = 0.0f;  // valid zero disparity survives as a valid pixel
  val[0] = 1;
  const DisparityMap map(w, h, 64, disp, val);
  save_disparity_png(map, dir / "d.png");
  const DisparityMap back = load_disparity_png(dir / "d.png", 64);
  for (int i = 0; i < w * h; ++i) {
    ASSERT_EQ(back.valid()[i], val[i]);
    if (val[i]) EXPECT_LE(std::fabs(back.disparity()[i] - disp[i]), 1.0 / 256.0);
  }
  // Stored values are exactly round(d * 256).
  const auto raw = read_raw_image(dir / "d.png");
  EXPECT_EQ(raw.maxval, 65535);
  for (int i = 1; i < w * h; ++i) {
    const long expected = val[i] ? std::lround(disp[i] * 256.0) : 0;
    EXPECT_EQ(raw.samples[i], expected == 0 && val[i] ? 1 : expected);
  }
}
