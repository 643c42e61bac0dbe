#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "obstacle/obstacle.hpp"

namespace fs = std::filesystem;
using namespace obstacle;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("obstacle");
  logger->set_pattern("%l: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("OBSTACLE_LOG")) {
    const std::string v = env;
    if (v == "error") spdlog::set_level(spdlog::level::err);
    else if (v == "warn") spdlog::set_level(spdlog::level::warn);
    else if (v == "info") spdlog::set_level(spdlog::level::info);
    else if (v == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring OBSTACLE_LOG={} (expected error, warn, info or debug)", v);
  }
}

AnalysisConfig config_from(const std::string& path) {
  AnalysisConfig c = path.empty() ? AnalysisConfig{} : load_config(path);
  validate(c);
  return c;
}

std::string frame_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", index);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

// Frame indices found as NNNNNN_left.png (and _right.png when required), sorted.
std::vector<int> discover_frames(const fs::path& dir, bool need_right) {
  if (!fs::is_directory(dir)) throw IoError("frames directory not found: " + dir.string());
  static const std::regex pattern(R"((\d{6})_(left|right)\.png)");
  std::map<int, std::pair<bool, bool>> seen;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || !std::regex_match(name, m, pattern)) continue;
    auto& s = seen[std::stoi(m[1].str())];
    (m[2] == "left" ? s.first : s.second) = true;
  }
  std::vector<int> out;
  for (const auto& [idx, s] : seen) {
    if (!s.first) {
      if (need_right) throw ValidationError(frame_stem(idx), "right image without a left image");
      continue;
    }
    if (need_right && !s.second) {
      throw ValidationError(frame_stem(idx), "missing " + frame_stem(idx) + "_right.png");
    }
    out.push_back(idx);
  }
  return out;
}

int cmd_disparity(const std::string& left, const std::string& right, const std::string& config,
                  const std::string& out, const std::string& preview) {
  const AnalysisConfig c = config_from(config);
  ImageBuffer left_img = load_image(left);
  ImageBuffer right_img = load_image(right);
  const StereoPair pair(std::move(left_img), std::move(right_img), 0);
  const DisparityMap map = compute_disparity(pair, c);
  ensure_parent(out);
  save_disparity_png(map, out);
  if (!preview.empty()) {
    ensure_parent(preview);
    save_rgb(colorize_disparity(map), preview);
  }
  spdlog::info("disparity: {} of {} pixels valid", map.valid_count(),
               static_cast<std::size_t>(map.width()) * map.height());
  return 0;
}

int cmd_flow(const std::string& prev, const std::string& next, const std::string& config,
             const std::string& out, const std::string& preview) {
  const AnalysisConfig c = config_from(config);
  const ImageBuffer a = load_image(prev);
  const ImageBuffer b = load_image(next);
  if (!a.same_shape(b)) {
    throw DimensionError("frames differ in size: " + prev + " is " + std::to_string(a.width()) +
                         "x" + std::to_string(a.height()) + ", " + next + " is " +
                         std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
  const FlowField flow = compute_flow(a, b, FlowParams::from(c));
  ensure_parent(out);
  save_flo(flow, out);
  if (!preview.empty()) {
    ensure_parent(preview);
    save_rgb(render_flow_preview(a, flow), preview);
  }
  return 0;
}

int cmd_analyze(const std::string& frames_dir, const std::string& detections_path,
                const std::string& config, const std::string& out, int jobs) {
  const AnalysisConfig c = config_from(config);
  const std::vector<int> indices = discover_frames(frames_dir, true);
  if (indices.empty()) throw ValidationError("frames", "no NNNNNN_left.png frames in " + frames_dir);
  for (std::size_t k = 1; k < indices.size(); ++k) {
    if (indices[k] != indices[k - 1] + 1) {
      throw ValidationError("frames", "gap in frame numbering between " +
                                          frame_stem(indices[k - 1]) + " and " +
                                          frame_stem(indices[k]));
    }
  }
  const DetectionFile detections = parse_detections(fs::path(detections_path));
  for (const auto& f : detections.frames) {
    if (f.frame_index < indices.front() || f.frame_index > indices.back()) {
      throw ValidationError("detections", "frame " + std::to_string(f.frame_index) +
                                              " has detections but no images");
    }
  }
  std::vector<StereoPair> frames;
  frames.reserve(indices.size());
  const fs::path dir(frames_dir);
  for (int idx : indices) {
    ImageBuffer l = load_image(dir / (frame_stem(idx) + "_left.png"));
    ImageBuffer r = load_image(dir / (frame_stem(idx) + "_right.png"));
    frames.emplace_back(std::move(l), std::move(r), idx);
  }
  spdlog::info("analyzing {} frames with {} worker(s)", frames.size(), jobs);
  const SequenceAnalysis result = analyze_sequence(frames, detections, c, jobs);

  const fs::path out_dir(out);
  ensure_dir(out_dir);
  for (const auto& fp : result.frames) {
    save_disparity_png(fp.disparity, out_dir / (frame_stem(fp.frame_index) + "_disparity.png"));
    if (fp.flow) save_flo(*fp.flow, out_dir / (frame_stem(fp.frame_index) + "_flow.flo"));
  }
  save_analysis(result, out_dir / "analysis.json");
  spdlog::info("wrote {} objects to {}", result.objects.size(),
               (out_dir / "analysis.json").string());
  return 0;
}

int cmd_evaluate(const std::string& pred, const std::string& gt, const std::string& out) {
  const auto predictions = load_label_entries(pred, false);
  const auto truth = load_label_entries(gt, true);
  const Evaluation ev = evaluate(predictions, truth);
  for (const auto& k : ev.match.unmatched_predictions) {
    spdlog::warn("prediction frame {} object {} has no ground truth", k.frame_index, k.object_id);
  }
  for (const auto& k : ev.match.unmatched_ground_truth) {
    spdlog::warn("ground truth frame {} object {} has no prediction", k.frame_index, k.object_id);
  }
  ensure_dir(out);
  render_report(ev.matrices, out);
  spdlog::info("evaluated {} matched objects", ev.match.pairs.size());
  return 0;
}

int cmd_render(const std::string& frames_dir, const std::string& analysis,
               const std::string& out) {
  const auto objects = load_overlay_objects(analysis);
  const std::vector<int> indices = discover_frames(frames_dir, false);
  const fs::path dir(frames_dir);
  const fs::path out_dir(out);
  ensure_dir(out_dir);
  for (int idx : indices) {
    const ImageBuffer frame = load_image(dir / (frame_stem(idx) + "_left.png"));
    const auto it = objects.find(idx);
    static const std::vector<OverlayObject> kNone;
    if (it == objects.end()) spdlog::warn("frame {} has no analysis entry", frame_stem(idx));
    save_rgb(render_overlay(frame, it == objects.end() ? kNone : it->second),
             out_dir / (frame_stem(idx) + "_overlay.png"));
  }
  for (const auto& [idx, _] : objects) {
    if (!std::binary_search(indices.begin(), indices.end(), idx)) {
      spdlog::warn("analysis frame {} has no image in {}", frame_stem(idx), frames_dir);
    }
  }
  return 0;
}

int cmd_synth(const std::string& script_path, std::uint64_t seed, const std::string& config,
              const std::string& out) {
  const AnalysisConfig c = config_from(config);
  const synth::SceneScript script = synth::load_scene_script(script_path);
  const synth::SyntheticScene scene = synth::render_scene(script, seed, c.d_max);
  const synth::SceneTruth truth = synth::truth_labels(script, c);
  const fs::path out_dir(out);
  ensure_dir(out_dir);
  for (const auto& f : scene.frames) {
    save_image(f.left(), out_dir / (frame_stem(f.frame_index()) + "_left.png"));
    save_image(f.right(), out_dir / (frame_stem(f.frame_index()) + "_right.png"));
  }
  save_detections(scene.detections, out_dir / "detections.json");
  detail::write_json_file(groundtruth_to_json(synth::to_groundtruth(script, truth)),
                          out_dir / "groundtruth.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Obstacle depth and movement pattern analysis"};
  app.require_subcommand(1);

  std::string left, right, prev, next, config, out, preview, frames, detections, pred, gt,
      analysis, script;
  int jobs = 1;
  std::uint64_t seed = 0;

  auto* disp = app.add_subcommand("disparity", "Stereo disparity map as a 16-bit PNG");
  disp->add_option("--left", left, "Left image")->required();
  disp->add_option("--right", right, "Right image")->required();
  disp->add_option("--config", config, "Configuration file");
  disp->add_option("--out", out, "Output disparity PNG")->required();
  disp->add_option("--preview", preview, "Optional colorized preview PNG");

  auto* flow = app.add_subcommand("flow", "Dense optical flow as a .flo file");
  flow->add_option("--prev", prev, "Earlier frame")->required();
  flow->add_option("--next", next, "Later frame")->required();
  flow->add_option("--config", config, "Configuration file");
  flow->add_option("--out", out, "Output .flo file")->required();
  flow->add_option("--preview", preview, "Optional arrow preview PNG");

  auto* analyze = app.add_subcommand("analyze", "Label every detected object in a sequence");
  analyze->add_option("--frames", frames, "Directory of NNNNNN_left.png/NNNNNN_right.png pairs")
      ->required();
  analyze->add_option("--detections", detections, "Detections JSON")->required();
  analyze->add_option("--config", config, "Configuration file");
  analyze->add_option("--out", out, "Output directory")->required();
  analyze->add_option("--jobs", jobs, "Worker threads over frames")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "Confusion matrices and accuracy against truth");
  eval->add_option("--pred", pred, "analysis.json")->required();
  eval->add_option("--gt", gt, "groundtruth.json")->required();
  eval->add_option("--out", out, "Output directory for the CSV reports")->required();

  auto* render = app.add_subcommand("render", "Overlay labels, masks and flow arrows on frames");
  render->add_option("--frames", frames, "Directory of NNNNNN_left.png frames")->required();
  render->add_option("--analysis", analysis, "analysis.json")->required();
  render->add_option("--out", out, "Output directory")->required();

  auto* syn = app.add_subcommand("synth", "Render a scripted synthetic scene with ground truth");
  syn->add_option("--script", script, "Scene script JSON")->required();
  syn->add_option("--seed", seed, "Random seed")->capture_default_str();
  syn->add_option("--config", config, "Configuration file (d_max and label thresholds)");
  syn->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*disp) return cmd_disparity(left, right, config, out, preview);
    if (*flow) return cmd_flow(prev, next, config, out, preview);
    if (*analyze) return cmd_analyze(frames, detections, config, out, jobs);
    if (*eval) return cmd_evaluate(pred, gt, out);
    if (*render) return cmd_render(frames, analysis, out);
    if (*syn) return cmd_synth(script, seed, config, out);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed JSON: {}", e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const InvariantError& e) {
    spdlog::critical("internal error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::critical("internal error: {}", e.what());
    return 2;
  }
  return 1;
}
