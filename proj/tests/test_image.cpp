#include <gtest/gtest.h>

#include <cstdio>

#include "support.hpp"

using namespace obstacle;
using testing_support::TempDir;

TEST(ImageBuffer, RejectsOutOfRangeAndNonFinite) {
  EXPECT_THROW(ImageBuffer(2, 1, {0.0f, 1.5f}), ValidationError);
  EXPECT_THROW(ImageBuffer(2, 1, {0.0f, -0.1f}), ValidationError);
  EXPECT_THROW(ImageBuffer(1, 1, {std::numeric_limits<float>::quiet_NaN()}), ValidationError);
  EXPECT_THROW(ImageBuffer(0, 1, {}), ValidationError);
  EXPECT_THROW(ImageBuffer(2, 2, {0.0f}), ValidationError);
  EXPECT_NO_THROW(ImageBuffer(1, 2, {0.0f, 1.0f}));
}

TEST(ImageBuffer, ClampedAndBilinear) {
  const ImageBuffer img(2, 2, {0.0f, 1.0f, 0.5f, 0.25f});
  EXPECT_FLOAT_EQ(img.clamped(-5, -5), 0.0f);
  EXPECT_FLOAT_EQ(img.clamped(9, 0), 1.0f);
  EXPECT_DOUBLE_EQ(img.bilinear(0.5, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(img.bilinear(0.5, 0.5), (0.0 + 1.0 + 0.5 + 0.25) / 4.0);
  EXPECT_DOUBLE_EQ(img.bilinear(7.0, -3.0), 1.0);
}

TEST(StereoPair, DimensionMismatchThrows) {
  EXPECT_THROW(StereoPair(ImageBuffer::filled(4, 4, 0.5f), ImageBuffer::filled(5, 4, 0.5f), 0),
               DimensionError);
}

TEST(ImageIo, SixteenBitRoundTrip) {
  TempDir dir("img");
  std::mt19937_64 rng(1);
  const ImageBuffer img = testing_support::random_image(17, 9, rng);
  save_image(img, dir / "a.png");
  const ImageBuffer back = load_image(dir / "a.png");
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_NEAR(back.data()[i], img.data()[i], 0.5 / 65535.0 + 1e-7);
  }
}

TEST(ImageIo, RgbLuminanceWeights) {
  TempDir dir("img");
  RgbImage rgb(2, 1);
  rgb.set(0, 0, {255, 0, 0});
  rgb.set(1, 0, {10, 200, 40});
  save_rgb(rgb, dir / "c.png");
  const ImageBuffer g = load_image(dir / "c.png");
  EXPECT_NEAR(g.at(0, 0), 0.299, 1e-6);
  EXPECT_NEAR(g.at(1, 0), (0.299 * 10 + 0.587 * 200 + 0.114 * 40) / 255.0, 1e-6);
}

TEST(ImageIo, ReadsBinaryPgm) {
  TempDir dir("img");
  {
    std::ofstream out(dir / "p.pgm", std::ios::binary);
    out << "P5\n# comment\n3 1\n255\n";
    out.put(static_cast<char>(0));
    out.put(static_cast<char>(51));
    out.put(static_cast<char>(255));
  }
  const ImageBuffer img = load_image(dir / "p.pgm");
  EXPECT_EQ(img.width(), 3);
  EXPECT_FLOAT_EQ(img.at(1, 0), 0.2f);
  EXPECT_FLOAT_EQ(img.at(2, 0), 1.0f);
}

TEST(ImageIo, MissingFileNamesPath) {
  try {
    load_image("/nonexistent/frame.png");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/frame.png"), std::string::npos);
  }
}

TEST(ImageIo, TruncatedPngIsFormatError) {
  TempDir dir("img");
  save_image(ImageBuffer::filled(32, 32, 0.3f), dir / "full.png");
  auto bytes = testing_support::read_bytes(dir / "full.png");
  bytes.resize(bytes.size() / 2);
  {
    std::ofstream out(dir / "cut.png", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(load_image(dir / "cut.png"), FormatError);
  testing_support::write_text(dir / "junk.png", "not an image at all");
  EXPECT_THROW(load_image(dir / "junk.png"), FormatError);
}
