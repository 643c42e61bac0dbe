#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace obstacle;
using nlohmann::json;
using testing_support::TempDir;

namespace {

LabelSet labels(DepthLabel d, XDirLabel x = XDirLabel::stable_direction,
                YDirLabel y = YDirLabel::stable_distance,
                IntensityLabel i = IntensityLabel::stopped) {
  return {d, x, y, i};
}

// Builds matched pairs whose x_dir confusion has the given counts.
std::vector<MatchedPair> x_dir_pairs(const std::vector<std::vector<int>>& counts) {
  std::vector<MatchedPair> pairs;
  std::int64_t id = 0;
  for (std::size_t r = 0; r < counts.size(); ++r) {
    for (std::size_t c = 0; c < counts[r].size(); ++c) {
      for (int k = 0; k < counts[r][c]; ++k) {
        LabelSet t = labels(DepthLabel::far), p = t;
        t.x_dir = static_cast<XDirLabel>(r);
        p.x_dir = static_cast<XDirLabel>(c);
        pairs.push_back({{0, id++}, p, t});
      }
    }
  }
  return pairs;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(FormatPercent, TwoDecimalConvention) {
  EXPECT_EQ(format_percent(0.8175), "81.75");
  EXPECT_EQ(format_percent(1.0 / 3.0), "33.33");
  EXPECT_EQ(format_percent(2.0 / 3.0), "66.67");
  EXPECT_EQ(format_percent(1.0), "100.00");
  EXPECT_EQ(format_percent(0.0), "0.00");
  EXPECT_EQ(format_percent(0.0701), "7.01");
  EXPECT_EQ(format_percent(0.00005), "0.01");
}

TEST(Accuracy, TraceOverTotal) {
  ConfusionMatrix m;
  m.rows = {"a", "b"};
  m.columns = {"a", "b"};
  m.counts = {{3, 1}, {0, 4}};
  EXPECT_DOUBLE_EQ(accuracy(m), 7.0 / 8.0);
  EXPECT_EQ(format_percent(accuracy(m)), "87.50");
  EXPECT_THROW(accuracy(empty_confusion(Task::depth)), ValidationError);
}

TEST(ConfusionCsv, RowPercentagesForKnownCounts) {
  // 126/145 = 86.897%, 162/176 = 92.045% (rounds up), 10/89 = 11.236%.
  const auto m = build_confusion(x_dir_pairs({{126, 12, 7}, {9, 162, 5}, {10, 0, 79}}), Task::x_dir);
  const auto lines = csv_lines(matrix_csv(m));
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0],
            "ground_truth,left_to_right,right_to_left,stable_direction,total,pct_left_to_right,"
            "pct_right_to_left,pct_stable_direction");
  EXPECT_EQ(lines[1], "left_to_right,126,12,7,145,86.90,8.28,4.83");
  EXPECT_EQ(lines[2], "right_to_left,9,162,5,176,5.11,92.05,2.84");
  EXPECT_EQ(lines[3], "stable_direction,10,0,79,89,11.24,0.00,88.76");
}

TEST(ConfusionCsv, DepthHasUnknownColumnButNoUnknownRow) {
  std::vector<MatchedPair> pairs;
  const std::vector<std::pair<DepthLabel, int>> row{{DepthLabel::very_close, 75},
                                                    {DepthLabel::close, 18},
                                                    {DepthLabel::far, 10}};
  std::int64_t id = 0;
  for (auto [pred, n] : row)
    for (int k = 0; k < n; ++k) pairs.push_back({{0, id++}, labels(pred), labels(DepthLabel::very_close)});
  pairs.push_back({{1, 0}, labels(DepthLabel::unknown), labels(DepthLabel::far)});
  const auto lines = csv_lines(matrix_csv(build_confusion(pairs, Task::depth)));
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0],
            "ground_truth,very_close,close,far,very_far,unknown,total,pct_very_close,pct_close,"
            "pct_far,pct_very_far,pct_unknown");
  EXPECT_EQ(lines[1], "very_close,75,18,10,0,0,103,72.82,17.48,9.71,0.00,0.00");
  EXPECT_EQ(lines[3], "far,0,0,0,0,1,1,0.00,0.00,0.00,0.00,100.00");
  EXPECT_EQ(lines[4], "very_far,0,0,0,0,0,0,0.00,0.00,0.00,0.00,0.00");
}

TEST(ConfusionCsv, RowPercentagesSumToHundred) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> cell(0, 60);
  for (int t = 0; t < 2000; ++t) {
    std::vector<std::vector<int>> counts(3, std::vector<int>(3));
    for (auto& r : counts)
      for (auto& c : r) c = cell(rng);
    const auto m = build_confusion(x_dir_pairs(counts), Task::x_dir);
    for (std::size_t r = 0; r < 3; ++r) {
      if (m.row_total(r) == 0) continue;
      double sum = 0.0;
      for (auto c : m.counts[r]) sum += std::stod(format_percent(static_cast<double>(c) / m.row_total(r)));
      EXPECT_NEAR(sum, 100.0, 0.02 + 1e-9);
    }
  }
}

TEST(ConfusionMatrix, AgreesWithIndependentTally) {
  std::mt19937_64 rng(31);
  std::vector<LabeledEntry> pred, gt;
  std::map<std::pair<int, int>, int> tally;
  for (int i = 0; i < 500; ++i) {
    const LabelSet t{static_cast<DepthLabel>(rng() % 4), static_cast<XDirLabel>(rng() % 3),
                     static_cast<YDirLabel>(rng() % 3), static_cast<IntensityLabel>(rng() % 5)};
    const LabelSet p{static_cast<DepthLabel>(rng() % 5), static_cast<XDirLabel>(rng() % 3),
                     static_cast<YDirLabel>(rng() % 3), static_cast<IntensityLabel>(rng() % 5)};
    gt.push_back({{i / 10, i % 10}, t});
    pred.push_back({{i / 10, i % 10}, p});
    ++tally[{static_cast<int>(t.intensity), static_cast<int>(p.intensity)}];
  }
  const Evaluation ev = evaluate(pred, gt);
  EXPECT_EQ(ev.match.pairs.size(), 500u);
  const auto& m = ev.matrices[3];
  ASSERT_EQ(m.task, Task::intensity);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) EXPECT_EQ(m.counts[r][c], static_cast<std::uint64_t>(tally[{r, c}]));
}

TEST(Match, ExactKeyJoinReportsLeftovers) {
  const std::vector<LabeledEntry> pred{{{0, 1}, labels(DepthLabel::far)}, {{0, 2}, labels(DepthLabel::far)}};
  const std::vector<LabeledEntry> gt{{{0, 1}, labels(DepthLabel::close)}, {{1, 1}, labels(DepthLabel::far)}};
  const auto r = match_objects(pred, gt);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].truth.depth, DepthLabel::close);
  EXPECT_EQ(r.unmatched_predictions, (std::vector<LabelKey>{{0, 2}}));
  EXPECT_EQ(r.unmatched_ground_truth, (std::vector<LabelKey>{{1, 1}}));
  EXPECT_THROW(match_objects({pred[0], pred[0]}, gt), ValidationError);
}

TEST(Report, IdenticalLabelsGiveFullAccuracy) {
  TempDir dir("eval");
  std::vector<LabeledEntry> e;
  for (int i = 0; i < 12; ++i)
    e.push_back({{i, 1}, {static_cast<DepthLabel>(i % 4), static_cast<XDirLabel>(i % 3),
                          static_cast<YDirLabel>(i % 3), static_cast<IntensityLabel>(i % 5)}});
  render_report(evaluate(e, e).matrices, dir.path());
  EXPECT_EQ(testing_support::read_text(dir / "accuracy.csv"),
            "task,correct,total,accuracy_percent\n"
            "depth,12,12,100.00\nx_dir,12,12,100.00\ny_dir,12,12,100.00\nintensity,12,12,100.00\n");
  for (Task t : kAllTasks) EXPECT_TRUE(std::filesystem::exists(dir / confusion_file_name(t)));
}

TEST(LabelFiles, VocabularyErrorsNameTheLabel) {
  const json gt = {{"frames", {{{"frame_index", 0},
                                {"objects", {{{"object_id", 1}, {"depth", "nearby"}, {"x_dir", "left_to_right"},
                                              {"y_dir", "approaching"}, {"intensity", "slow"}}}}}}}};
  try {
    parse_label_entries(gt, true);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.key(), "frames[0].objects[0].depth");
    EXPECT_NE(std::string(e.what()).find("nearby"), std::string::npos);
  }
  json unknown_depth = gt;
  unknown_depth["frames"][0]["objects"][0]["depth"] = "unknown";
  EXPECT_THROW(parse_label_entries(unknown_depth, true), ValidationError);
  json ok = gt;
  ok["frames"][0]["objects"][0]["depth"] = "far";
  const auto entries = parse_label_entries(ok, true);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].labels.intensity, IntensityLabel::slow);
  json extra = ok;
  extra["frames"][0]["objects"][0]["speed"] = 3;
  EXPECT_THROW(parse_label_entries(extra, true), ValidationError);
}

TEST(LabelFiles, GroundTruthJsonRoundTrip) {
  const std::vector<GroundTruthFrame> frames{
      {0, {{1, "car", labels(DepthLabel::close, XDirLabel::left_to_right)}}},
      {1, {}}};
  const auto entries = parse_label_entries(groundtruth_to_json(frames), true);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].labels, labels(DepthLabel::close, XDirLabel::left_to_right));
}
