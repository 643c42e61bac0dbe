#include <gtest/gtest.h>

#include "support.hpp"

using namespace obstacle;
using nlohmann::json;

namespace {

// Column-major flatten, then run lengths starting with a background run.
std::vector<std::uint32_t> reference_rle(const BinaryMask& m) {
  std::vector<std::uint8_t> flat;
  for (int x = 0; x < m.width; ++x)
    for (int y = 0; y < m.height; ++y) flat.push_back(m.at(x, y));
  std::vector<std::uint32_t> runs{0};
  std::uint8_t cur = 0;
  for (auto p : flat) {
    if (p != cur) {
      runs.push_back(0);
      cur = p;
    }
    ++runs.back();
  }
  return runs;
}

json detection(std::int64_t id, std::vector<std::uint32_t> rle, int h = 2, int w = 2) {
  return {{"object_id", id}, {"class_name", "car"}, {"score", 0.9}, {"size", {h, w}}, {"rle", rle}};
}

std::string error_key(const json& doc) {
  try {
    parse_detections(doc);
  } catch (const ValidationError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(Rle, ExhaustiveThreeByThree) {
  for (int bits = 0; bits < 512; ++bits) {
    BinaryMask m(3, 3);
    for (int i = 0; i < 9; ++i) m.set(i % 3, i / 3, (bits >> i) & 1);
    const auto counts = encode_rle(m);
    EXPECT_EQ(counts, reference_rle(m)) << bits;
    EXPECT_TRUE(decode_rle(counts, 3, 3) == m) << bits;
  }
}

TEST(Rle, KnownColumnMajorLayout) {
  BinaryMask m(2, 2);  // rows: [0 1] [1 1]
  m.set(1, 0, true);
  m.set(0, 1, true);
  m.set(1, 1, true);
  EXPECT_EQ(encode_rle(m), (std::vector<std::uint32_t>{1, 3}));
  BinaryMask first(3, 1);
  first.set(0, 0, true);
  EXPECT_EQ(encode_rle(first), (std::vector<std::uint32_t>{0, 1, 2}));
}

TEST(Rle, RandomRoundTrips) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 40);
  for (int t = 0; t < 200; ++t) {
    const auto m = testing_support::random_mask(dim(rng), dim(rng), 0.3, rng);
    EXPECT_TRUE(decode_rle(encode_rle(m), m.height, m.width) == m);
  }
}

TEST(Rle, DecodeRejectsWrongTotal) {
  EXPECT_THROW(decode_rle(std::vector<std::uint32_t>{1, 2}, 2, 2), ValidationError);
}

TEST(InstanceMask, Validation) {
  EXPECT_THROW(InstanceMask(1, "car", 1.2, 2, 2, {1, 3}), ValidationError);
  EXPECT_THROW(InstanceMask(1, "car", 0.5, 2, 2, {4}), ValidationError);
  EXPECT_THROW(InstanceMask(1, "car", 0.5, 2, 2, {1, 2}), ValidationError);
  EXPECT_EQ(InstanceMask(1, "car", 0.5, 2, 2, {1, 3}).decode().area(), 3u);
}

TEST(Detections, ParsesAndRoundTrips) {
  const json doc = {{"frames",
                     {{{"frame_index", 0}, {"detections", {detection(3, {1, 3}), detection(1, {0, 4})}}},
                      {{"frame_index", 2}, {"detections", json::array()}}}}};
  const auto file = parse_detections(doc);
  ASSERT_EQ(file.frames.size(), 2u);
  EXPECT_EQ(file.frames[0].detections[0].object_id(), 3);
  EXPECT_EQ(file.frames[0].detections[1].decode().area(), 4u);
  EXPECT_EQ(file.find(2)->detections.size(), 0u);
  EXPECT_EQ(file.find(1), nullptr);
  EXPECT_TRUE(parse_detections(to_json(file)) == file);
}

TEST(Detections, ErrorsNameTheOffendingField) {
  auto one = [](json det) { return json{{"frames", {{{"frame_index", 0}, {"detections", {det}}}}}}; };
  EXPECT_EQ(error_key(one(detection(1, {1, 2}))), "frames[0].detections[0].rle");
  EXPECT_EQ(error_key(one(detection(1, {4}))), "frames[0].detections[0].rle");
  json extra = detection(1, {1, 3});
  extra["colour"] = "red";
  EXPECT_EQ(error_key(one(extra)), "frames[0].detections[0].colour");
  json missing = detection(1, {1, 3});
  missing.erase("score");
  EXPECT_EQ(error_key(one(missing)), "frames[0].detections[0].score");
  json bad_score = detection(1, {1, 3});
  bad_score["score"] = 2.0;
  EXPECT_EQ(error_key(one(bad_score)), "frames[0].detections[0].score");
  json negative = detection(1, {1, 3});
  negative["rle"] = {-1, 5};
  EXPECT_EQ(error_key(one(negative)), "frames[0].detections[0].rle[0]");

  const json dup = {{"frames", {{{"frame_index", 0}, {"detections", {detection(1, {1, 3}), detection(1, {1, 3})}}}}}};
  EXPECT_EQ(error_key(dup), "frames[0].detections[1].object_id");
  const json order = {{"frames",
                       {{{"frame_index", 3}, {"detections", json::array()}},
                        {{"frame_index", 3}, {"detections", json::array()}}}}};
  EXPECT_EQ(error_key(order), "frames[1].frame_index");
  EXPECT_EQ(error_key(json{{"frames", 1}}), "frames");
  EXPECT_EQ(error_key(json{{"frame", json::array()}}), "detections.frame");
}
