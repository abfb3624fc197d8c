#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "depthpose/cloud.hpp"
#include "depthpose/io.hpp"
#include "depthpose/metrics.hpp"
#include "depthpose/sampling.hpp"
#include "depthpose/synth.hpp"
#include "depthpose/tracking.hpp"

namespace depthpose {

enum class DepthSource { kDirect, kCloudReprojected, kVoxelMap };

inline std::string to_string(DepthSource s) {
  switch (s) {
    case DepthSource::kDirect: return "direct";
    case DepthSource::kCloudReprojected: return "pc2dimg";
    case DepthSource::kVoxelMap: return "pc2vmap";
  }
  return "direct";
}

inline DepthSource depth_source_from_string(const std::string& s) {
  if (s == "direct") return DepthSource::kDirect;
  if (s == "pc2dimg") return DepthSource::kCloudReprojected;
  if (s == "pc2vmap") return DepthSource::kVoxelMap;
  throw std::invalid_argument("unknown depth_source '" + s + "'");
}

struct PipelineConfig {
  std::string skeleton{"auto"};  // "auto" (dataset skeleton.json, else the
                                 // builtin), "coco13", or a skeleton file path
  CrossParams cross;
  FusionConfig fusion;
  bool apply_offsets{true};
  double confidence_min{0.0};
  DepthSource depth_source{DepthSource::kDirect};
  double voxel_resolution{0.05};
  int cloud_stride{2};
  int splat_radius{1};
  std::vector<std::string> camera_subset;  // empty = all views
  double pairing_window_ms{50.0};
  bool calib_world_to_camera{false};
  bool parallel_views{true};
  std::string input_dir;
  std::string output_dir;

  void validate() const {
    cross.validate();
    fusion.validate();
    if (!(voxel_resolution > 0.0))
      throw std::invalid_argument("config: voxel_resolution must be > 0");
    if (cloud_stride < 1) throw std::invalid_argument("config: cloud_stride must be >= 1");
    if (splat_radius < 0) throw std::invalid_argument("config: splat_radius must be >= 0");
    if (!(pairing_window_ms > 0.0))
      throw std::invalid_argument("config: pairing_window_ms must be > 0");
  }
};

inline json config_to_json(const PipelineConfig& c) {
  json j;
  j["skeleton"] = c.skeleton;
  j["cross"] = {{"arm_length", c.cross.arm_length},
                {"thickness", c.cross.thickness},
                {"min_valid", c.cross.min_valid}};
  j["fusion"] = {{"match_threshold", c.fusion.match_threshold},
                 {"new_person_cluster_threshold", c.fusion.new_person_cluster_threshold},
                 {"drop_after", c.fusion.drop_after},
                 {"limb_threshold", c.fusion.limb_threshold},
                 {"topk", c.fusion.topk},
                 {"min_shared_joints", c.fusion.min_shared_joints},
                 {"min_support", c.fusion.min_support}};
  j["apply_offsets"] = c.apply_offsets;
  j["confidence_min"] = c.confidence_min;
  j["depth_source"] = to_string(c.depth_source);
  j["voxel_resolution"] = c.voxel_resolution;
  j["cloud_stride"] = c.cloud_stride;
  j["splat_radius"] = c.splat_radius;
  j["camera_subset"] = c.camera_subset;
  j["pairing_window_ms"] = c.pairing_window_ms;
  j["calib_world_to_camera"] = c.calib_world_to_camera;
  j["parallel_views"] = c.parallel_views;
  j["input_dir"] = c.input_dir;
  j["output_dir"] = c.output_dir;
  return j;
}

inline PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  c.skeleton = j.value("skeleton", c.skeleton);
  if (j.contains("cross")) {
    const auto& x = j["cross"];
    c.cross.arm_length = x.value("arm_length", c.cross.arm_length);
    c.cross.thickness = x.value("thickness", c.cross.thickness);
    c.cross.min_valid = x.value("min_valid", c.cross.min_valid);
  }
  if (j.contains("fusion")) {
    const auto& x = j["fusion"];
    c.fusion.match_threshold = x.value("match_threshold", c.fusion.match_threshold);
    c.fusion.new_person_cluster_threshold =
        x.value("new_person_cluster_threshold", c.fusion.new_person_cluster_threshold);
    c.fusion.drop_after = x.value("drop_after", c.fusion.drop_after);
    c.fusion.limb_threshold = x.value("limb_threshold", c.fusion.limb_threshold);
    c.fusion.topk = x.value("topk", c.fusion.topk);
    c.fusion.min_shared_joints = x.value("min_shared_joints", c.fusion.min_shared_joints);
    c.fusion.min_support = x.value("min_support", c.fusion.min_support);
  }
  c.apply_offsets = j.value("apply_offsets", c.apply_offsets);
  c.confidence_min = j.value("confidence_min", c.confidence_min);
  c.depth_source = depth_source_from_string(
      j.value("depth_source", to_string(c.depth_source)));
  c.voxel_resolution = j.value("voxel_resolution", c.voxel_resolution);
  c.cloud_stride = j.value("cloud_stride", c.cloud_stride);
  c.splat_radius = j.value("splat_radius", c.splat_radius);
  c.camera_subset = j.value("camera_subset", c.camera_subset);
  c.pairing_window_ms = j.value("pairing_window_ms", c.pairing_window_ms);
  c.calib_world_to_camera = j.value("calib_world_to_camera", c.calib_world_to_camera);
  c.parallel_views = j.value("parallel_views", c.parallel_views);
  c.input_dir = j.value("input_dir", c.input_dir);
  c.output_dir = j.value("output_dir", c.output_dir);
  return c;
}

inline SkeletonDefinition resolve_skeleton(const std::string& source) {
  if (source == "coco13" || source == "auto") return builtin_coco13();
  return load_skeleton(source);
}

// --- Dataset manifest ---------------------------------------------------------
//
// Paired form (what `synth` writes):
//   {"frames": [{"frame": N, "views": [{"view_id":, "depth":, "keypoints":,
//                                       "timestamp_ms": optional}]}]}
// Stream form (real recordings with per-sensor clocks):
//   {"streams": [{"view_id":, "entries": [{"timestamp_ms":, "depth":,
//                                          "keypoints":}]}]}
// Streams are paired against the first stream by nearest timestamp; a frame is
// dropped when any view has no entry within the pairing window.

struct ViewInput {
  std::string view_id;
  std::string depth_path;
  std::string keypoints_path;
  std::optional<double> timestamp_ms;
};

struct FrameInput {
  int frame_index{0};
  std::vector<ViewInput> views;
};

inline std::vector<FrameInput> pair_streams(const json& streams, double window_ms,
                                            std::ostream& log) {
  struct Entry {
    double ts;
    std::string depth, keypoints;
  };
  struct Stream {
    std::string view_id;
    std::vector<Entry> entries;
  };
  std::vector<Stream> parsed;
  for (const auto& s : streams) {
    Stream stream;
    stream.view_id = s.at("view_id").get<std::string>();
    for (const auto& e : s.value("entries", json::array()))
      stream.entries.push_back({e.at("timestamp_ms").get<double>(),
                                e.at("depth").get<std::string>(),
                                e.at("keypoints").get<std::string>()});
    std::sort(stream.entries.begin(), stream.entries.end(),
              [](const Entry& a, const Entry& b) { return a.ts < b.ts; });
    parsed.push_back(std::move(stream));
  }
  if (parsed.empty()) return {};

  std::vector<FrameInput> frames;
  int index = 0;
  for (const auto& ref : parsed.front().entries) {
    FrameInput frame;
    frame.frame_index = index;
    frame.views.push_back(
        {parsed.front().view_id, ref.depth, ref.keypoints, ref.ts});
    bool complete = true;
    for (std::size_t s = 1; s < parsed.size(); ++s) {
      const Entry* best = nullptr;
      double best_gap = window_ms;
      for (const auto& e : parsed[s].entries) {
        const double gap = std::abs(e.ts - ref.ts);
        if (gap <= best_gap) {
          best_gap = gap;
          best = &e;
        }
      }
      if (!best) {
        complete = false;
        break;
      }
      frame.views.push_back({parsed[s].view_id, best->depth, best->keypoints, best->ts});
    }
    if (complete) {
      frames.push_back(std::move(frame));
      ++index;
    } else {
      log << "pairing: dropping reference timestamp " << ref.ts
          << " ms (no partner within " << window_ms << " ms)\n";
    }
  }
  return frames;
}

inline std::vector<FrameInput> load_manifest(const std::string& dataset_dir,
                                             double pairing_window_ms,
                                             std::ostream& log = std::cerr) {
  namespace fs = std::filesystem;
  const std::string path = (fs::path(dataset_dir) / "manifest.json").string();
  const json doc = io_detail::load_json_file(path);
  std::vector<FrameInput> frames;
  if (doc.contains("frames")) {
    for (const auto& f : doc["frames"]) {
      FrameInput frame;
      frame.frame_index = f.at("frame").get<int>();
      for (const auto& v : f.at("views")) {
        ViewInput view;
        view.view_id = v.at("view_id").get<std::string>();
        view.depth_path = v.at("depth").get<std::string>();
        view.keypoints_path = v.at("keypoints").get<std::string>();
        if (v.contains("timestamp_ms")) view.timestamp_ms = v["timestamp_ms"].get<double>();
        frame.views.push_back(std::move(view));
      }
      frames.push_back(std::move(frame));
    }
  } else if (doc.contains("streams")) {
    frames = pair_streams(doc["streams"], pairing_window_ms, log);
  } else {
    throw std::runtime_error(path + ": manifest needs 'frames' or 'streams'");
  }
  for (auto& frame : frames)
    for (auto& view : frame.views) {
      view.depth_path = (fs::path(dataset_dir) / view.depth_path).string();
      view.keypoints_path = (fs::path(dataset_dir) / view.keypoints_path).string();
    }
  return frames;
}

// --- In-memory frame processing ------------------------------------------------

struct FrameBundle {
  int frame_index{0};
  std::vector<DepthImage> depth;        // aligned with views
  std::vector<std::vector<Pose2D>> poses;  // per view, per person
};

struct StageTimes {
  double cloud_ms{0.0};       // cloud build + re-render (pc2dimg / pc2vmap only)
  double lift_ms{0.0};        // depth extraction: sampling + unprojection
  double fusion_ms{0.0};      // association + filter + top-k averaging
  double total_ms{0.0};
};

struct FrameDebug {
  int frame_index{0};
  std::vector<PoseProposal3D> proposals;          // after lifting
  std::vector<FusedPose3D> outputs;
};

class FramePipeline {
 public:
  FramePipeline(const PipelineConfig& config, std::vector<CameraCalibration> calibrations)
      : FramePipeline(config, std::move(calibrations), resolve_skeleton(config.skeleton)) {}

  FramePipeline(PipelineConfig config, std::vector<CameraCalibration> calibrations,
                SkeletonDefinition skeleton)
      : cfg_(std::move(config)),
        calibs_(std::move(calibrations)),
        skel_(std::move(skeleton)),
        tracker_(skel_, cfg_.fusion) {
    cfg_.validate();
    for (const auto& c : calibs_) c.validate();
  }

  const SkeletonDefinition& skeleton() const { return skel_; }
  const std::vector<CameraCalibration>& calibrations() const { return calibs_; }
  Tracker& tracker() { return tracker_; }

  /// Runs one frame through the configured depth source and the tracker.
  /// `bundle.depth` and `bundle.poses` must be aligned with calibrations().
  std::vector<FusedPose3D> process(const FrameBundle& bundle, StageTimes* times = nullptr,
                                   FrameDebug* debug = nullptr) {
    using clock = std::chrono::steady_clock;
    const auto ms = [](clock::time_point a, clock::time_point b) {
      return std::chrono::duration<double, std::milli>(b - a).count();
    };
    if (bundle.depth.size() != calibs_.size() || bundle.poses.size() != calibs_.size())
      throw std::logic_error("frame bundle does not match the calibrated views");
    for (std::size_t v = 0; v < calibs_.size(); ++v) {
      if (bundle.depth[v].width != calibs_[v].width ||
          bundle.depth[v].height != calibs_[v].height)
        throw std::runtime_error("frame " + std::to_string(bundle.frame_index) +
                                 ", view '" + calibs_[v].view_id +
                                 "': depth image size does not match calibration");
    }

    const auto t0 = clock::now();
    std::vector<const DepthImage*> lift_images(calibs_.size());
    std::vector<DepthImage> reprojected;
    if (cfg_.depth_source == DepthSource::kDirect) {
      for (std::size_t v = 0; v < calibs_.size(); ++v) lift_images[v] = &bundle.depth[v];
    } else {
      std::vector<PointCloud> clouds(calibs_.size());
      for (std::size_t v = 0; v < calibs_.size(); ++v)
        clouds[v] = depth_to_cloud(bundle.depth[v], calibs_[v], cfg_.cloud_stride);
      const PointCloud merged = merge_clouds(clouds);
      reprojected.resize(calibs_.size());
      if (cfg_.depth_source == DepthSource::kCloudReprojected) {
        for_each_view(calibs_.size(), [&](std::size_t v) {
          reprojected[v] = cloud_to_depth(merged, calibs_[v], cfg_.splat_radius);
        });
      } else {
        const VoxelMap vmap = cloud_to_voxelmap(merged, cfg_.voxel_resolution);
        for_each_view(calibs_.size(), [&](std::size_t v) {
          reprojected[v] = voxelmap_to_depth(vmap, calibs_[v]);
        });
      }
      for (std::size_t v = 0; v < calibs_.size(); ++v) lift_images[v] = &reprojected[v];
    }
    const auto t1 = clock::now();

    std::vector<std::vector<PoseProposal3D>> per_view(calibs_.size());
    for_each_view(calibs_.size(), [&](std::size_t v) {
      for (const auto& pose : bundle.poses[v]) {
        PoseProposal3D p = lift_pose(pose, *lift_images[v], calibs_[v], skel_,
                                     cfg_.cross, cfg_.apply_offsets);
        if (p.present_count() > 0) per_view[v].push_back(std::move(p));
      }
    });
    std::vector<PoseProposal3D> proposals;
    for (auto& vp : per_view)
      for (auto& p : vp) proposals.push_back(std::move(p));
    const auto t2 = clock::now();

    std::vector<FusedPose3D> outputs = tracker_.step(proposals);
    const auto t3 = clock::now();

    if (times) {
      times->cloud_ms = ms(t0, t1);
      times->lift_ms = ms(t1, t2);
      times->fusion_ms = ms(t2, t3);
      times->total_ms = ms(t0, t3);
    }
    if (debug) {
      debug->frame_index = bundle.frame_index;
      debug->proposals = std::move(proposals);
      debug->outputs = outputs;
    }
    return outputs;
  }

 private:
  // Per-view fan-out; views are independent until the sequential tracker step.
  template <typename Fn>
  void for_each_view(std::size_t count, Fn&& fn) {
    if (!cfg_.parallel_views || count < 2 ||
        std::thread::hardware_concurrency() < 2) {
      for (std::size_t v = 0; v < count; ++v) fn(v);
      return;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(count);
    for (std::size_t v = 0; v < count; ++v)
      futures.push_back(std::async(std::launch::async, [&fn, v] { fn(v); }));
    for (auto& f : futures) f.get();
  }

  PipelineConfig cfg_;
  std::vector<CameraCalibration> calibs_;
  SkeletonDefinition skel_;
  Tracker tracker_;
};

// --- File-level run -------------------------------------------------------------

struct RunResult {
  int frames_processed{0};
  int frames_skipped{0};
  std::vector<StageTimes> timing;  // one entry per processed frame
  std::vector<std::pair<int, std::vector<FusedPose3D>>> outputs;  // frame -> poses
  std::optional<MetricReport> report;  // filled when ground truth was evaluated

  double mean_total_ms() const {
    if (timing.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& t : timing) sum += t.total_ms;
    return sum / timing.size();
  }
};

/// Loads a dataset directory (calibration.json, manifest.json, per-frame depth
/// and keypoint files), runs every frame through the pipeline and writes one
/// pose file per frame plus an output manifest and a timing log. Malformed
/// frames are skipped with a diagnostic; a view without calibration is a hard
/// error before any processing. When `evaluate_against_gt` is set and the
/// dataset has a gt.json, the in-process outputs are scored as well.
inline RunResult run_pipeline(const PipelineConfig& cfg, bool evaluate_against_gt = false,
                              std::ostream& log = std::cerr,
                              const std::function<void(const FrameDebug&)>& observer = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (cfg.input_dir.empty()) throw std::invalid_argument("run: input_dir not set");

  std::vector<CameraCalibration> calibs = load_calibrations(
      (fs::path(cfg.input_dir) / "calibration.json").string(), cfg.calib_world_to_camera);
  if (!cfg.camera_subset.empty()) {
    std::vector<CameraCalibration> subset;
    for (const auto& id : cfg.camera_subset) {
      const auto it = std::find_if(calibs.begin(), calibs.end(),
                                   [&](const CameraCalibration& c) { return c.view_id == id; });
      if (it == calibs.end())
        throw std::runtime_error("camera subset names unknown view '" + id + "'");
      subset.push_back(*it);
    }
    calibs = std::move(subset);
  }

  std::vector<FrameInput> frames = load_manifest(cfg.input_dir, cfg.pairing_window_ms, log);
  // every referenced view must be calibrated before we touch any frame
  for (const auto& frame : frames)
    for (const auto& view : frame.views) {
      const bool known = std::any_of(calibs.begin(), calibs.end(),
                                     [&](const CameraCalibration& c) {
                                       return c.view_id == view.view_id;
                                     });
      const bool in_subset = cfg.camera_subset.empty() ||
                             std::find(cfg.camera_subset.begin(), cfg.camera_subset.end(),
                                       view.view_id) != cfg.camera_subset.end();
      if (!known && in_subset)
        throw std::runtime_error("frame " + std::to_string(frame.frame_index) +
                                 " references view '" + view.view_id +
                                 "' with no calibration");
    }

  PipelineConfig resolved_cfg = cfg;
  if (resolved_cfg.skeleton == "auto") {
    const std::string dataset_skeleton = (fs::path(cfg.input_dir) / "skeleton.json").string();
    if (fs::exists(dataset_skeleton)) resolved_cfg.skeleton = dataset_skeleton;
  }
  FramePipeline pipeline(resolved_cfg, calibs);
  const SkeletonDefinition& skel = pipeline.skeleton();

  const bool write_output = !cfg.output_dir.empty();
  if (write_output) fs::create_directories(cfg.output_dir);

  KeypointIngestion ingest;
  ingest.confidence_min = cfg.confidence_min;
  ingest.joint_count = skel.joint_count();

  RunResult result;
  json out_manifest;
  out_manifest["frames"] = json::array();

  for (const auto& frame : frames) {
    FrameBundle bundle;
    bundle.frame_index = frame.frame_index;
    try {
      bundle.depth.resize(calibs.size());
      bundle.poses.resize(calibs.size());
      for (std::size_t v = 0; v < calibs.size(); ++v) {
        const auto it = std::find_if(frame.views.begin(), frame.views.end(),
                                     [&](const ViewInput& vi) {
                                       return vi.view_id == calibs[v].view_id;
                                     });
        if (it == frame.views.end())
          throw std::runtime_error("view '" + calibs[v].view_id + "' missing from frame");
        bundle.depth[v] = load_depth_image(it->depth_path, it->view_id);
        bundle.poses[v] = load_keypoints(it->keypoints_path, it->view_id,
                                         calibs[v].width, calibs[v].height, ingest);
      }
    } catch (const std::exception& e) {
      log << "frame " << frame.frame_index << ": skipped (" << e.what() << ")\n";
      ++result.frames_skipped;
      continue;
    }

    StageTimes times;
    FrameDebug debug;
    std::vector<FusedPose3D> outputs;
    try {
      // data errors skip the frame; wiring errors (logic_error) propagate
      outputs = pipeline.process(bundle, &times, observer ? &debug : nullptr);
    } catch (const std::runtime_error& e) {
      log << "frame " << frame.frame_index << ": skipped (" << e.what() << ")\n";
      ++result.frames_skipped;
      continue;
    }
    if (observer) observer(debug);
    result.timing.push_back(times);
    ++result.frames_processed;

    if (write_output) {
      char name[32];
      std::snprintf(name, sizeof(name), "poses_%06d.json", frame.frame_index);
      const std::string pose_path = (fs::path(cfg.output_dir) / name).string();
      save_fused_poses(pose_path, frame.frame_index, outputs, skel);
      out_manifest["frames"].push_back({{"frame", frame.frame_index}, {"poses", name}});
    }
    result.outputs.emplace_back(frame.frame_index, std::move(outputs));
  }

  if (write_output) {
    json timing = json::array();
    for (std::size_t i = 0; i < result.timing.size(); ++i) {
      const auto& t = result.timing[i];
      timing.push_back({{"frame", result.outputs[i].first},
                        {"cloud_ms", t.cloud_ms},
                        {"lift_ms", t.lift_ms},
                        {"fusion_ms", t.fusion_ms},
                        {"total_ms", t.total_ms}});
    }
    io_detail::save_json_file((fs::path(cfg.output_dir) / "timing.json").string(), timing);
    io_detail::save_json_file((fs::path(cfg.output_dir) / "manifest.json").string(),
                              out_manifest);
  }

  if (evaluate_against_gt) {
    const std::string gt_path = (fs::path(cfg.input_dir) / "gt.json").string();
    const auto gt = load_ground_truth(gt_path, skel);
    std::vector<EvalFrame> eval_frames;
    for (const auto& [frame_index, poses] : result.outputs) {
      const auto it = std::find_if(gt.begin(), gt.end(), [&, fi = frame_index](
                                                             const GroundTruthFrame& g) {
        return g.frame_index == fi;
      });
      if (it == gt.end()) continue;
      EvalFrame ef;
      ef.ground_truth = it->persons;
      for (const auto& pose : poses) {
        EvalPose ep;
        ep.joints.resize(skel.joint_count());
        for (std::size_t j = 0; j < pose.joints.size(); ++j)
          if (pose.joints[j]) ep.joints[j] = pose.joints[j]->position;
        ef.predictions.push_back(std::move(ep));
      }
      eval_frames.push_back(std::move(ef));
    }
    MetricReport report = compute_metrics(eval_frames, skel);
    if (result.mean_total_ms() > 0.0) report.fps = 1000.0 / result.mean_total_ms();
    result.report = report;
  }
  return result;
}

/// Scores previously written pose files against a ground-truth file.
inline MetricReport evaluate_files(const std::string& prediction_dir,
                                   const std::string& gt_path,
                                   const SkeletonDefinition& skel) {
  namespace fs = std::filesystem;
  const json manifest =
      io_detail::load_json_file((fs::path(prediction_dir) / "manifest.json").string());
  const auto gt = load_ground_truth(gt_path, skel);

  std::vector<EvalFrame> eval_frames;
  for (const auto& entry : manifest.value("frames", json::array())) {
    const int frame_index = entry.at("frame").get<int>();
    const auto it = std::find_if(gt.begin(), gt.end(), [&](const GroundTruthFrame& g) {
      return g.frame_index == frame_index;
    });
    if (it == gt.end()) continue;
    const std::string pose_path =
        (fs::path(prediction_dir) / entry.at("poses").get<std::string>()).string();
    const auto poses = load_fused_poses(pose_path, skel);
    EvalFrame ef;
    ef.ground_truth = it->persons;
    for (const auto& pose : poses) {
      EvalPose ep;
      ep.joints.resize(skel.joint_count());
      for (std::size_t j = 0; j < pose.joints.size(); ++j)
        if (pose.joints[j]) ep.joints[j] = pose.joints[j]->position;
      ef.predictions.push_back(std::move(ep));
    }
    eval_frames.push_back(std::move(ef));
  }
  return compute_metrics(eval_frames, skel);
}

// --- Synthetic dataset writer -----------------------------------------------------

struct DatasetSpec {
  SceneConfig scene;
  int frame_count{50};
  std::string depth_format{"pgm"};  // "pgm" or "dim"
};

/// Writes a complete synthetic dataset in the pipeline's input formats:
/// calibration.json, skeleton.json, manifest.json, gt.json and per-frame
/// depth + keypoint files under frames/.
inline void write_dataset(const std::string& dir, const DatasetSpec& spec,
                          const SkeletonDefinition& skel) {
  namespace fs = std::filesystem;
  spec.scene.validate();
  fs::create_directories(fs::path(dir) / "frames");

  Rng noise_rng(spec.scene.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<GroundTruthFrame> gt;
  json manifest;
  manifest["frames"] = json::array();

  std::vector<CameraCalibration> calibs;
  for (int f = 0; f < spec.frame_count; ++f) {
    const Scene scene = generate_scene(spec.scene, skel, f);
    if (f == 0) calibs = scene.cameras;

    char frame_dir_name[32];
    std::snprintf(frame_dir_name, sizeof(frame_dir_name), "frames/%06d", f);
    fs::create_directories(fs::path(dir) / frame_dir_name);

    json views = json::array();
    for (const auto& calib : scene.cameras) {
      DepthImage depth = render_depth(scene.persons, skel, calib);
      std::vector<Pose2D> poses =
          project_keypoints(scene.persons, calib, depth, spec.scene.noise, noise_rng);
      add_depth_noise(depth, spec.scene.noise, noise_rng);

      const std::string ext = spec.depth_format == "pgm" ? ".pgm" : ".dim";
      const std::string depth_rel =
          std::string(frame_dir_name) + "/" + calib.view_id + ext;
      const std::string kp_rel =
          std::string(frame_dir_name) + "/" + calib.view_id + ".json";
      save_depth_image((fs::path(dir) / depth_rel).string(), depth);
      save_keypoints((fs::path(dir) / kp_rel).string(), f, calib.view_id, poses);
      views.push_back({{"view_id", calib.view_id},
                       {"depth", depth_rel},
                       {"keypoints", kp_rel},
                       {"timestamp_ms", f * 33.0}});
    }
    manifest["frames"].push_back({{"frame", f}, {"views", std::move(views)}});

    GroundTruthFrame gt_frame;
    gt_frame.frame_index = f;
    for (const auto& person : scene.persons) {
      EvalPose pose;
      for (const auto& p : person.joint_positions) pose.joints.emplace_back(p);
      gt_frame.persons.push_back(std::move(pose));
    }
    gt.push_back(std::move(gt_frame));
  }

  save_calibrations((fs::path(dir) / "calibration.json").string(), calibs);
  save_skeleton((fs::path(dir) / "skeleton.json").string(), skel);
  save_ground_truth((fs::path(dir) / "gt.json").string(), gt, skel);
  io_detail::save_json_file((fs::path(dir) / "manifest.json").string(), manifest);
}

// --- Benchmark harness -------------------------------------------------------------

struct StageStats {
  double mean_ms{0.0};
  double median_ms{0.0};
  double p95_ms{0.0};
};

struct BenchReport {
  StageStats lift;
  StageStats fusion;
  StageStats cloud;
  StageStats total;
  int frames{0};
  int repetitions{0};
};

namespace io_detail {

inline StageStats summarize(std::vector<double> samples) {
  StageStats s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean_ms = sum / samples.size();
  s.median_ms = samples[samples.size() / 2];
  s.p95_ms = samples[std::min(samples.size() - 1,
                              static_cast<std::size_t>(samples.size() * 0.95))];
  return s;
}

}  // namespace io_detail

/// Times the pipeline stages on an in-memory synthetic workload. File I/O is
/// excluded; numbers are machine-relative, meant for stage-to-stage comparison
/// and regression tracking rather than cross-paper comparison.
inline BenchReport bench_pipeline(const PipelineConfig& cfg, const SceneConfig& scene_cfg,
                                  int frame_count, int repetitions) {
  const SkeletonDefinition skel = resolve_skeleton(cfg.skeleton);

  std::vector<FrameBundle> bundles;
  std::vector<CameraCalibration> calibs;
  Rng rng(scene_cfg.seed ^ 0x5851f42d4c957f2dull);
  for (int f = 0; f < frame_count; ++f) {
    const Scene scene = generate_scene(scene_cfg, skel, f);
    if (f == 0) calibs = scene.cameras;
    FrameBundle bundle;
    bundle.frame_index = f;
    for (const auto& calib : scene.cameras) {
      DepthImage depth = render_depth(scene.persons, skel, calib);
      bundle.poses.push_back(
          project_keypoints(scene.persons, calib, depth, scene_cfg.noise, rng));
      add_depth_noise(depth, scene_cfg.noise, rng);
      bundle.depth.push_back(std::move(depth));
    }
    bundles.push_back(std::move(bundle));
  }

  BenchReport report;
  report.frames = frame_count;
  report.repetitions = repetitions;
  std::vector<double> lift, fusion, cloud, total;
  for (int rep = 0; rep < repetitions; ++rep) {
    FramePipeline pipeline(cfg, calibs);
    for (const auto& bundle : bundles) {
      StageTimes t;
      pipeline.process(bundle, &t);
      lift.push_back(t.lift_ms);
      fusion.push_back(t.fusion_ms);
      cloud.push_back(t.cloud_ms);
      total.push_back(t.total_ms);
    }
  }
  report.lift = io_detail::summarize(std::move(lift));
  report.fusion = io_detail::summarize(std::move(fusion));
  report.cloud = io_detail::summarize(std::move(cloud));
  report.total = io_detail::summarize(std::move(total));
  return report;
}

}  // namespace depthpose
