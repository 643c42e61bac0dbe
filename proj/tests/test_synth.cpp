#include <gtest/gtest.h>

#include "support.hpp"

using namespace obstacle;
using nlohmann::json;

namespace {

synth::SceneScript base_script() {
  synth::SceneScript s;
  s.width = 200;
  s.height = 100;
  s.frame_count = 3;
  s.background_seed = 1;
  s.actors.push_back({1, "car", 30, 20, 60, 10, 2, 1, 10, 5});
  s.actors.push_back({2, "bike", 20, 20, 140, 60, -1, -2, 4, 6});
  return s;
}

std::string error_key(const synth::SceneScript& s) {
  try {
    synth::validate(s, 32);
  } catch (const ValidationError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(Texture, DeterministicAndSeedDependent) {
  const synth::Texture a{1}, b{1}, c{2};
  EXPECT_EQ(a(3.5, 7.25), b(3.5, 7.25));
  EXPECT_NE(a(3.5, 7.25), c(3.5, 7.25));
  for (double x = -20; x < 20; x += 0.7) {
    const double v = a(x, 0.3 * x);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(ShiftedPair, RightIsLeftShifted) {
  const auto pair = synth::make_shifted_pair(50, 10, 4.0, 3);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x + 4 < 50; ++x) EXPECT_EQ(pair.right().at(x, y), pair.left().at(x + 4, y));
}

TEST(TranslatedFrames, NextIsPrevMoved) {
  const auto [prev, next] = synth::make_translated_frames(40, 30, 3.0, -2.0, 9);
  for (int y = 2; y < 28; ++y)
    for (int x = 0; x + 3 < 40; ++x) EXPECT_EQ(next.at(x + 3, y - 2), prev.at(x, y));
}

TEST(RenderScene, MasksAndStereoAreConsistent) {
  const auto s = base_script();
  const auto scene = synth::render_scene(s, 17, 32);
  ASSERT_EQ(scene.frames.size(), 3u);
  ASSERT_EQ(scene.detections.frames.size(), 3u);
  const auto& f2 = scene.frames[2];
  const auto car = scene.detections.frames[2].detections[0].decode();
  EXPECT_EQ(car.area(), 30u * 20u);
  EXPECT_TRUE(car.at(64, 12));
  EXPECT_FALSE(car.at(63, 12));
  EXPECT_FALSE(car.at(94, 12));
  for (int y = 12; y < 32; ++y)
    for (int x = 64; x < 94; ++x) EXPECT_EQ(f2.right().at(x - 10, y), f2.left().at(x, y));
}

TEST(RenderScene, SameSeedSameBytes) {
  const auto a = synth::render_scene(base_script(), 5, 32);
  const auto b = synth::render_scene(base_script(), 5, 32);
  const auto c = synth::render_scene(base_script(), 6, 32);
  EXPECT_TRUE(a.frames[1].left() == b.frames[1].left());
  EXPECT_FALSE(a.frames[1].left() == c.frames[1].left());
  EXPECT_TRUE(a.detections == b.detections);
}

TEST(ValidateScript, RejectsBadActors) {
  auto s = base_script();
  s.actors[1].x0 = 70;  // overlaps the car
  s.actors[1].y0 = 10;
  EXPECT_EQ(error_key(s), "actors");
  s = base_script();
  s.actors[0].x0 = 185;
  EXPECT_EQ(error_key(s), "actors[0]");
  s = base_script();
  s.actors[0].disparity = 32;
  EXPECT_EQ(error_key(s), "actors[0].disparity");
  s = base_script();
  s.actors[1].object_id = 1;
  EXPECT_EQ(error_key(s), "actors[1].object_id");
  s = base_script();
  s.actors[0].vx = 20;
  EXPECT_EQ(error_key(s), "actors[0].velocity");
  s = base_script();
  s.frame_count = 0;
  EXPECT_EQ(error_key(s), "frame_count");
}

TEST(Truth, FirstFrameHasNoFlow) {
  AnalysisConfig c;
  c.d_max = 32;
  const auto t = synth::truth_labels(base_script(), c);
  ASSERT_EQ(t.entries.size(), 6u);
  EXPECT_FALSE(t.entries[0].has_flow);
  EXPECT_EQ(t.entries[0].labels.x_dir, XDirLabel::stable_direction);
  EXPECT_TRUE(t.entries[2].has_flow);
  EXPECT_EQ(t.entries[2].xM, 2.0);
  EXPECT_EQ(t.entries[2].labels.x_dir, XDirLabel::left_to_right);
  EXPECT_EQ(t.entries[2].labels.y_dir, YDirLabel::approaching);
  EXPECT_EQ(t.entries[2].labels.depth, DepthLabel::close);  // 10/32
  EXPECT_EQ(t.entries[3].labels.y_dir, YDirLabel::moving_away);
  EXPECT_EQ(t.entries[3].labels.intensity, IntensityLabel::average_speed);  // |-1 * -2|
}

TEST(Truth, RuleLabelsAgreeWithClassifierOnRandomAggregates) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0, 64), m(-6, 6);
  for (auto metric : {IntensityMetric::product, IntensityMetric::euclidean}) {
    AnalysisConfig c;
    c.d_max = 64;
    c.intensity_metric = metric;
    for (int i = 0; i < 5000; ++i) {
      ObjectObservation o;
      o.mean_disparity = d(rng);
      o.xM = m(rng);
      o.yM = m(rng);
      o.VL = movement_intensity(o.xM, o.yM, c);
      EXPECT_EQ(classify(o, c), synth::rule_labels(*o.mean_disparity, o.xM, o.yM, c));
    }
  }
}

TEST(ScriptJson, ParsesAndReportsErrors) {
  json doc = {{"width", 200}, {"height", 100}, {"frame_count", 2}, {"background_seed", 3},
              {"actors", {{{"object_id", 4}, {"class_name", "car"}, {"width", 10}, {"height", 8},
                           {"start", {50, 20}}, {"velocity", {1.5, -1}}, {"disparity", 6},
                           {"texture_seed", 9}}}}};
  const auto s = synth::parse_scene_script(doc);
  ASSERT_EQ(s.actors.size(), 1u);
  EXPECT_EQ(s.actors[0].vx, 1.5);
  EXPECT_EQ(s.actors[0].y0, 20);
  json bad = doc;
  bad["actors"][0].erase("velocity");
  try {
    synth::parse_scene_script(bad);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.key(), "actors[0].velocity");
  }
  bad = doc;
  bad["actors"][0]["start"] = {1};
  EXPECT_THROW(synth::parse_scene_script(bad), ValidationError);
}
