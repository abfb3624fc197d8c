#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "depthpose/io.hpp"
#include "depthpose/pipeline.hpp"
#include "depthpose/synth.hpp"

namespace fs = std::filesystem;
using namespace depthpose;

namespace {

void add_config_flags(CLI::App* cmd, PipelineConfig& cfg, std::string& config_path,
                      std::string& depth_source) {
  cmd->add_option("--config", config_path, "pipeline config file (json)");
  cmd->add_option("--skeleton", cfg.skeleton, "skeleton file or 'coco13'");
  cmd->add_option("--cross-arm", cfg.cross.arm_length, "cross arm length (odd px)");
  cmd->add_option("--cross-thickness", cfg.cross.thickness, "cross thickness (odd px)");
  cmd->add_option("--cross-min-valid", cfg.cross.min_valid, "min valid pixels per sample");
  cmd->add_option("--match-threshold", cfg.fusion.match_threshold,
                  "proposal-to-track gate (m)");
  cmd->add_option("--cluster-threshold", cfg.fusion.new_person_cluster_threshold,
                  "new-person clustering gate (m)");
  cmd->add_option("--drop-after", cfg.fusion.drop_after, "frames before a track is dropped");
  cmd->add_option("--limb-threshold", cfg.fusion.limb_threshold,
                  "outlier filter threshold (m)");
  cmd->add_option("--topk", cfg.fusion.topk, "proposals averaged per joint");
  cmd->add_option("--min-shared-joints", cfg.fusion.min_shared_joints,
                  "joints required to compare two poses");
  cmd->add_option("--min-support", cfg.fusion.min_support, "min proposals per output joint");
  cmd->add_flag("--no-offsets{false},--offsets{true}", cfg.apply_offsets,
                "toggle per-joint depth offsets");
  cmd->add_option("--confidence-min", cfg.confidence_min, "drop keypoints below this");
  cmd->add_option("--depth-source", depth_source, "direct | pc2dimg | pc2vmap");
  cmd->add_option("--voxel-resolution", cfg.voxel_resolution, "pc2vmap voxel size (m)");
  cmd->add_option("--cloud-stride", cfg.cloud_stride, "pixel stride for depth->cloud");
  cmd->add_option("--splat-radius", cfg.splat_radius, "pc2dimg splat radius (px)");
  cmd->add_option("--cameras", cfg.camera_subset, "restrict to these view ids");
  cmd->add_option("--pairing-window", cfg.pairing_window_ms,
                  "stream pairing window (ms)");
  cmd->add_flag("--calib-world-to-camera", cfg.calib_world_to_camera,
                "calibration files store world->camera extrinsics");
  cmd->add_flag("--sequential{false}", cfg.parallel_views,
                "disable per-view parallelism");
}

PipelineConfig finalize_config(const CLI::App* cmd, PipelineConfig flags,
                               const std::string& config_path,
                               const std::string& depth_source) {
  PipelineConfig cfg = flags;
  if (!config_path.empty()) {
    cfg = config_from_json(io_detail::load_json_file(config_path));
    // flags given on the command line win over the file
    PipelineConfig defaults;
    auto used = [&](const std::string& name) { return cmd->count(name) > 0; };
    if (used("--skeleton")) cfg.skeleton = flags.skeleton;
    if (used("--cross-arm")) cfg.cross.arm_length = flags.cross.arm_length;
    if (used("--cross-thickness")) cfg.cross.thickness = flags.cross.thickness;
    if (used("--cross-min-valid")) cfg.cross.min_valid = flags.cross.min_valid;
    if (used("--match-threshold")) cfg.fusion.match_threshold = flags.fusion.match_threshold;
    if (used("--cluster-threshold"))
      cfg.fusion.new_person_cluster_threshold = flags.fusion.new_person_cluster_threshold;
    if (used("--drop-after")) cfg.fusion.drop_after = flags.fusion.drop_after;
    if (used("--limb-threshold")) cfg.fusion.limb_threshold = flags.fusion.limb_threshold;
    if (used("--topk")) cfg.fusion.topk = flags.fusion.topk;
    if (used("--min-shared-joints"))
      cfg.fusion.min_shared_joints = flags.fusion.min_shared_joints;
    if (used("--min-support")) cfg.fusion.min_support = flags.fusion.min_support;
    if (used("--no-offsets") || used("--offsets")) cfg.apply_offsets = flags.apply_offsets;
    if (used("--confidence-min")) cfg.confidence_min = flags.confidence_min;
    if (used("--voxel-resolution")) cfg.voxel_resolution = flags.voxel_resolution;
    if (used("--cloud-stride")) cfg.cloud_stride = flags.cloud_stride;
    if (used("--splat-radius")) cfg.splat_radius = flags.splat_radius;
    if (used("--cameras")) cfg.camera_subset = flags.camera_subset;
    if (used("--pairing-window")) cfg.pairing_window_ms = flags.pairing_window_ms;
    if (used("--calib-world-to-camera"))
      cfg.calib_world_to_camera = flags.calib_world_to_camera;
    if (used("--sequential")) cfg.parallel_views = flags.parallel_views;
    if (!flags.input_dir.empty()) cfg.input_dir = flags.input_dir;
    if (!flags.output_dir.empty()) cfg.output_dir = flags.output_dir;
  }
  if (cmd->count("--depth-source") > 0 || config_path.empty())
    cfg.depth_source = depth_source_from_string(depth_source);
  return cfg;
}

void print_report(const MetricReport& r, std::ostream& os) {
  char line[256];
  std::snprintf(line, sizeof(line),
                "PCP %.1f  PCK@100/500 %.1f/%.1f  MPJPE %s  Recall@100/500 %.1f/%.1f  "
                "Invalid %.1f  F1 %.1f",
                r.pcp, r.pck100, r.pck500,
                r.mpjpe_mm ? (std::to_string(*r.mpjpe_mm) + " mm").c_str() : "n/a",
                r.recall100, r.recall500, r.invalid_pct, r.f1);
  os << line;
  if (r.fps) os << "  FPS " << *r.fps;
  os << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view multi-person 3D pose fusion from RGBD keypoints"};
  app.require_subcommand(1);

  // ---- run ----
  PipelineConfig run_cfg;
  std::string run_config_path, run_depth_source = "direct";
  bool run_eval = false;
  auto* run_cmd = app.add_subcommand("run", "process a dataset directory");
  run_cmd->add_option("--input", run_cfg.input_dir, "dataset directory")->required();
  run_cmd->add_option("--output", run_cfg.output_dir, "output directory");
  run_cmd->add_flag("--eval", run_eval, "score against the dataset's gt.json");
  add_config_flags(run_cmd, run_cfg, run_config_path, run_depth_source);

  // ---- eval ----
  std::string eval_pred, eval_gt, eval_skel = "coco13", eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "score written pose files against ground truth");
  eval_cmd->add_option("--predictions", eval_pred, "output directory of a run")->required();
  eval_cmd->add_option("--gt", eval_gt, "ground-truth pose file")->required();
  eval_cmd->add_option("--skeleton", eval_skel, "skeleton file or 'coco13'");
  eval_cmd->add_option("--report", eval_out, "write report json + csv next to this path");

  // ---- synth ----
  DatasetSpec synth_spec;
  std::string synth_out, synth_skel = "coco13";
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--out", synth_out, "dataset directory to create")->required();
  synth_cmd->add_option("--frames", synth_spec.frame_count, "number of frames");
  synth_cmd->add_option("--persons", synth_spec.scene.person_count, "persons in the scene");
  synth_cmd->add_option("--cameras", synth_spec.scene.camera_count, "cameras on the ring");
  synth_cmd->add_option("--ring-radius", synth_spec.scene.camera_ring_radius,
                        "camera ring radius (m)");
  synth_cmd->add_option("--width", synth_spec.scene.image_width, "image width");
  synth_cmd->add_option("--height", synth_spec.scene.image_height, "image height");
  synth_cmd->add_option("--seed", synth_spec.scene.seed, "random seed");
  synth_cmd->add_option("--depth-sigma", synth_spec.scene.noise.depth_sigma,
                        "depth noise sigma (m)");
  synth_cmd->add_option("--pixel-sigma", synth_spec.scene.noise.pixel_sigma,
                        "keypoint noise sigma (px)");
  synth_cmd->add_option("--dropout", synth_spec.scene.noise.keypoint_dropout,
                        "keypoint dropout probability");
  synth_cmd->add_option("--holes", synth_spec.scene.noise.depth_holes,
                        "depth hole probability");
  synth_cmd->add_option("--skeleton", synth_skel, "skeleton file or 'coco13'");
  synth_cmd->add_option("--depth-format", synth_spec.depth_format, "pgm | dim");
  bool synth_keep_offsets = false;
  synth_cmd->add_flag("--keep-skeleton-offsets", synth_keep_offsets,
                      "write the skeleton's own depth offsets instead of "
                      "offsets matched to the synthetic surface model");

  // ---- bench ----
  PipelineConfig bench_cfg;
  std::string bench_config_path, bench_depth_source = "direct", bench_json;
  SceneConfig bench_scene;
  int bench_frames = 10, bench_reps = 20;
  auto* bench_cmd = app.add_subcommand("bench", "time the pipeline stages");
  bench_cmd->add_option("--frames", bench_frames, "synthetic frames per repetition");
  bench_cmd->add_option("--repetitions", bench_reps, "repetitions");
  bench_cmd->add_option("--persons", bench_scene.person_count, "persons in the scene");
  bench_cmd->add_option("--bench-cameras", bench_scene.camera_count, "cameras on the ring");
  bench_cmd->add_option("--width", bench_scene.image_width, "image width");
  bench_cmd->add_option("--height", bench_scene.image_height, "image height");
  bench_cmd->add_option("--seed", bench_scene.seed, "random seed");
  bench_cmd->add_option("--json", bench_json, "also write the summary as json");
  add_config_flags(bench_cmd, bench_cfg, bench_config_path, bench_depth_source);

  // ---- inspect ----
  PipelineConfig inspect_cfg;
  std::string inspect_config_path, inspect_depth_source = "direct", inspect_out;
  std::string inspect_cloud;
  int inspect_frame = 0;
  auto* inspect_cmd =
      app.add_subcommand("inspect", "dump one frame's proposals and fused output");
  inspect_cmd->add_option("--input", inspect_cfg.input_dir, "dataset directory")->required();
  inspect_cmd->add_option("--frame", inspect_frame, "frame index to dump");
  inspect_cmd->add_option("--out", inspect_out, "write the dump here instead of stdout");
  inspect_cmd->add_option("--dump-cloud", inspect_cloud,
                          "also write the frame's merged point cloud (binary xyz)");
  add_config_flags(inspect_cmd, inspect_cfg, inspect_config_path, inspect_depth_source);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      PipelineConfig cfg =
          finalize_config(run_cmd, run_cfg, run_config_path, run_depth_source);
      const RunResult result = run_pipeline(cfg, run_eval);
      std::cout << "processed " << result.frames_processed << " frames ("
                << result.frames_skipped << " skipped), mean "
                << result.mean_total_ms() << " ms/frame\n";
      if (result.report) print_report(*result.report, std::cout);
    } else if (eval_cmd->parsed()) {
      const SkeletonDefinition skel = resolve_skeleton(eval_skel);
      const MetricReport report = evaluate_files(eval_pred, eval_gt, skel);
      print_report(report, std::cout);
      if (!eval_out.empty()) {
        io_detail::save_json_file(eval_out + ".json", report_to_json(report));
        std::ofstream csv(eval_out + ".csv");
        csv << report_csv_header() << "\n" << report_csv_row(report) << "\n";
      }
    } else if (synth_cmd->parsed()) {
      SkeletonDefinition skel = resolve_skeleton(synth_skel);
      if (!synth_keep_offsets) skel = with_body_matched_offsets(std::move(skel));
      write_dataset(synth_out, synth_spec, skel);
      std::cout << "wrote " << synth_spec.frame_count << " frames, "
                << synth_spec.scene.camera_count << " views to " << synth_out << "\n";
    } else if (bench_cmd->parsed()) {
      PipelineConfig cfg =
          finalize_config(bench_cmd, bench_cfg, bench_config_path, bench_depth_source);
      const BenchReport r = bench_pipeline(cfg, bench_scene, bench_frames, bench_reps);
      auto row = [](const char* name, const StageStats& s) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-16s mean %8.3f ms   median %8.3f ms   p95 %8.3f ms",
                      name, s.mean_ms, s.median_ms, s.p95_ms);
        return std::string(line);
      };
      std::cout << row("depth extraction", r.lift) << "\n"
                << row("fusion", r.fusion) << "\n"
                << row("cloud", r.cloud) << "\n"
                << row("total", r.total) << "\n";
      if (!bench_json.empty()) {
        json j;
        for (const auto& [name, s] : {std::pair{"lift", r.lift}, {"fusion", r.fusion},
                                      {"cloud", r.cloud}, {"total", r.total}}) {
          j[name] = {{"mean_ms", s.mean_ms}, {"median_ms", s.median_ms},
                     {"p95_ms", s.p95_ms}};
        }
        j["frames"] = r.frames;
        j["repetitions"] = r.repetitions;
        io_detail::save_json_file(bench_json, j);
      }
    } else if (inspect_cmd->parsed()) {
      PipelineConfig cfg = finalize_config(inspect_cmd, inspect_cfg, inspect_config_path,
                                           inspect_depth_source);
      json dump;
      const SkeletonDefinition skel = resolve_skeleton(cfg.skeleton);
      auto observer = [&](const FrameDebug& dbg) {
        if (dbg.frame_index != inspect_frame) return;
        dump["frame"] = dbg.frame_index;
        dump["proposals"] = json::array();
        for (const auto& p : dbg.proposals) {
          json jp;
          jp["source_view"] = p.source_view;
          jp["joints"] = json::array();
          for (std::size_t j = 0; j < p.joints.size(); ++j) {
            if (!p.joints[j]) continue;
            jp["joints"].push_back({{"name", skel.joints[j]},
                                    {"x", p.joints[j]->position.x()},
                                    {"y", p.joints[j]->position.y()},
                                    {"z", p.joints[j]->position.z()},
                                    {"confidence", p.joints[j]->confidence}});
          }
          dump["proposals"].push_back(std::move(jp));
        }
        dump["fused"] = json::array();
        for (const auto& pose : dbg.outputs) {
          json jp;
          jp["person_id"] = pose.person_id;
          jp["joints"] = json::array();
          for (std::size_t j = 0; j < pose.joints.size(); ++j) {
            if (!pose.joints[j]) continue;
            jp["joints"].push_back({{"name", skel.joints[j]},
                                    {"x", pose.joints[j]->position.x()},
                                    {"y", pose.joints[j]->position.y()},
                                    {"z", pose.joints[j]->position.z()},
                                    {"support", pose.joints[j]->support}});
          }
          dump["fused"].push_back(std::move(jp));
        }
      };
      cfg.output_dir.clear();
      run_pipeline(cfg, false, std::cerr, observer);
      if (dump.is_null()) throw std::runtime_error("frame not found in dataset");
      if (inspect_out.empty())
        std::cout << dump.dump(2) << "\n";
      else
        io_detail::save_json_file(inspect_out, dump);
      if (!inspect_cloud.empty()) {
        const auto calibs = load_calibrations(
            (fs::path(cfg.input_dir) / "calibration.json").string(),
            cfg.calib_world_to_camera);
        const auto frames = load_manifest(cfg.input_dir, cfg.pairing_window_ms);
        std::vector<PointCloud> clouds;
        for (const auto& frame : frames) {
          if (frame.frame_index != inspect_frame) continue;
          for (const auto& view : frame.views) {
            const auto it = std::find_if(calibs.begin(), calibs.end(),
                                         [&](const CameraCalibration& c) {
                                           return c.view_id == view.view_id;
                                         });
            if (it == calibs.end()) continue;
            clouds.push_back(depth_to_cloud(load_depth_image(view.depth_path, view.view_id),
                                            *it, cfg.cloud_stride));
          }
        }
        save_cloud(inspect_cloud, merge_clouds(clouds));
        std::cerr << "wrote merged cloud to " << inspect_cloud << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
