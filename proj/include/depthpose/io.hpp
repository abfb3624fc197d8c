#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "depthpose/geometry.hpp"
#include "depthpose/metrics.hpp"
#include "depthpose/skeleton.hpp"
#include "depthpose/tracking.hpp"

namespace depthpose {

using json = nlohmann::json;

namespace io_detail {

inline json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed json in " + path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace io_detail

// --- Calibration file -------------------------------------------------------
//
// {"views": [{"view_id": "...", "width": W, "height": H,
//             "fx":, "fy":, "cx":, "cy":,
//             "R": [9 numbers, row-major], "t": [3 numbers, meters],
//             "convention": "camera_to_world" | "world_to_camera" (optional),
//             "distortion": [...] (optional, ignored with a warning)}]}
//
// R/t follow `convention` (default camera_to_world: t is the camera center in
// world coordinates). world_to_camera entries are inverted on load, so either
// dataset convention can be ingested by flipping one field or the loader flag.

inline json calibration_to_json(const CameraCalibration& c) {
  json j;
  j["view_id"] = c.view_id;
  j["width"] = c.width;
  j["height"] = c.height;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  json r = json::array();
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) r.push_back(c.rotation(row, col));
  j["R"] = std::move(r);
  j["t"] = {c.translation.x(), c.translation.y(), c.translation.z()};
  return j;
}

inline void save_calibrations(const std::string& path,
                              const std::vector<CameraCalibration>& calibs) {
  json j;
  j["views"] = json::array();
  for (const auto& c : calibs) j["views"].push_back(calibration_to_json(c));
  io_detail::save_json_file(path, j);
}

inline std::vector<CameraCalibration> load_calibrations(
    const std::string& path, bool default_world_to_camera = false,
    std::ostream& warnings = std::cerr) {
  const json doc = io_detail::load_json_file(path);
  if (!doc.contains("views") || !doc["views"].is_array())
    throw std::runtime_error(path + ": missing 'views' array");
  std::vector<CameraCalibration> out;
  for (const auto& v : doc["views"]) {
    CameraCalibration c;
    c.view_id = v.value("view_id", std::string());
    try {
      c.width = v.at("width").get<int>();
      c.height = v.at("height").get<int>();
      c.fx = v.at("fx").get<double>();
      c.fy = v.at("fy").get<double>();
      c.cx = v.at("cx").get<double>();
      c.cy = v.at("cy").get<double>();
      const auto& r = v.at("R");
      const auto& t = v.at("t");
      if (r.size() != 9 || t.size() != 3)
        throw std::runtime_error("R must have 9 entries and t 3");
      for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
          c.rotation(row, col) = r[3 * row + col].get<double>();
      c.translation = Point3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    } catch (const std::exception& e) {
      throw std::runtime_error("calibration '" + c.view_id + "' in " + path + ": " +
                               e.what());
    }
    const std::string convention =
        v.value("convention",
                default_world_to_camera ? std::string("world_to_camera")
                                        : std::string("camera_to_world"));
    if (convention == "world_to_camera") {
      // p_cam = R p_world + t  ->  stored form: R' = R^T, t' = -R^T t
      c.translation = Point3(-(c.rotation.transpose() * c.translation));
      c.rotation = Mat3(c.rotation.transpose());
    } else if (convention != "camera_to_world") {
      throw std::runtime_error("calibration '" + c.view_id + "': unknown convention '" +
                               convention + "'");
    }
    if (v.contains("distortion"))
      warnings << "calibration '" << c.view_id
               << "': distortion coefficients present but no distortion model is "
                  "applied; ignoring\n";
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

// --- Skeleton file -----------------------------------------------------------

inline json skeleton_to_json(const SkeletonDefinition& s) {
  json j;
  j["name"] = s.name;
  j["joints"] = s.joints;
  j["neighbors"] = s.neighbors;
  j["depth_offsets"] = s.depth_offsets;
  json limbs = json::array();
  for (const auto& l : s.limbs) limbs.push_back({l[0], l[1]});
  j["limbs"] = std::move(limbs);
  return j;
}

inline void save_skeleton(const std::string& path, const SkeletonDefinition& s) {
  io_detail::save_json_file(path, skeleton_to_json(s));
}

inline SkeletonDefinition skeleton_from_json(const json& j) {
  SkeletonDefinition s;
  s.name = j.value("name", std::string("unnamed"));
  try {
    s.joints = j.at("joints").get<std::vector<std::string>>();
    s.neighbors = j.at("neighbors").get<std::vector<std::vector<int>>>();
    s.depth_offsets = j.at("depth_offsets").get<std::vector<double>>();
    for (const auto& l : j.at("limbs")) {
      if (l.size() != 2) throw std::runtime_error("limb entries must be pairs");
      s.limbs.push_back({l[0].get<int>(), l[1].get<int>()});
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("skeleton '" + s.name + "': " + e.what());
  }
  s.validate();
  return s;
}

inline SkeletonDefinition load_skeleton(const std::string& path) {
  return skeleton_from_json(io_detail::load_json_file(path));
}

// --- Keypoint file (one frame, one view) -------------------------------------
//
// {"frame": N, "view_id": "...",
//  "persons": [{"keypoints": [{"joint": J, "u":, "v":, "confidence":}, ...]}]}
//
// The keypoint list is sparse: absent joints were not detected (occluded).

inline void save_keypoints(const std::string& path, int frame_index,
                           const std::string& view_id, const std::vector<Pose2D>& poses) {
  json j;
  j["frame"] = frame_index;
  j["view_id"] = view_id;
  j["persons"] = json::array();
  for (const auto& pose : poses) {
    json person;
    person["keypoints"] = json::array();
    for (const auto& kp : pose.keypoints) {
      person["keypoints"].push_back(
          {{"joint", kp.joint}, {"u", kp.pixel.u}, {"v", kp.pixel.v},
           {"confidence", kp.confidence}});
    }
    j["persons"].push_back(std::move(person));
  }
  io_detail::save_json_file(path, j);
}

struct KeypointIngestion {
  double confidence_min{0.0};   // keypoints below this are dropped
  double bounds_margin{0.10};   // fraction of width/height allowed outside
  int joint_count{0};           // when > 0, joint indices are range-checked
};

/// Loads one view's detections for one frame. Keypoints outside the image by
/// more than the margin, or below the confidence floor, are dropped; malformed
/// confidences are a hard error so bad files do not pass silently.
inline std::vector<Pose2D> load_keypoints(const std::string& path,
                                          const std::string& expected_view,
                                          int image_width, int image_height,
                                          const KeypointIngestion& ingest = {}) {
  const json doc = io_detail::load_json_file(path);
  const std::string view = doc.value("view_id", std::string());
  if (view != expected_view)
    throw std::runtime_error(path + ": keypoints for view '" + view +
                             "' but expected '" + expected_view + "'");
  const double mx = ingest.bounds_margin * image_width;
  const double my = ingest.bounds_margin * image_height;
  std::vector<Pose2D> out;
  for (const auto& person : doc.value("persons", json::array())) {
    Pose2D pose;
    pose.view_id = view;
    for (const auto& k : person.value("keypoints", json::array())) {
      Keypoint2D kp;
      kp.joint = k.at("joint").get<int>();
      kp.pixel.u = k.at("u").get<double>();
      kp.pixel.v = k.at("v").get<double>();
      kp.confidence = k.value("confidence", 1.0);
      if (kp.joint < 0 ||
          (ingest.joint_count > 0 && kp.joint >= ingest.joint_count))
        throw std::runtime_error(path + ": joint index " + std::to_string(kp.joint) +
                                 " outside the active skeleton");
      if (!(kp.confidence >= 0.0 && kp.confidence <= 1.0))
        throw std::runtime_error(path + ": confidence outside [0,1] for joint " +
                                 std::to_string(kp.joint));
      if (!is_finite(kp.pixel)) continue;
      if (kp.pixel.u < -mx || kp.pixel.u >= image_width + mx || kp.pixel.v < -my ||
          kp.pixel.v >= image_height + my)
        continue;
      if (kp.confidence < ingest.confidence_min) continue;
      pose.add(kp);
    }
    if (!pose.keypoints.empty()) out.push_back(std::move(pose));
  }
  return out;
}

// --- Fused pose file (one frame) and ground-truth file -----------------------
//
// Fused:  {"frame": N, "persons": [{"person_id": I,
//            "joints": [{"name":, "x":, "y":, "z":, "support":}, ...]}]}
// GT:     {"skeleton": "...", "frames": [{"frame": N,
//            "persons": [{"person_id": I,
//              "joints": [{"name":, "x":, "y":, "z":, "valid":}, ...]}]}]}
//
// Coordinates are meters in the world frame; joints are keyed by name so a
// reader never depends on the joint order of the producing skeleton.

inline void save_fused_poses(const std::string& path, int frame_index,
                             const std::vector<FusedPose3D>& poses,
                             const SkeletonDefinition& skel) {
  json j;
  j["frame"] = frame_index;
  j["persons"] = json::array();
  for (const auto& pose : poses) {
    json person;
    person["person_id"] = pose.person_id;
    person["joints"] = json::array();
    for (std::size_t joint = 0; joint < pose.joints.size(); ++joint) {
      if (!pose.joints[joint]) continue;
      const auto& fj = *pose.joints[joint];
      person["joints"].push_back({{"name", skel.joints[joint]},
                                  {"x", fj.position.x()},
                                  {"y", fj.position.y()},
                                  {"z", fj.position.z()},
                                  {"support", fj.support}});
    }
    j["persons"].push_back(std::move(person));
  }
  io_detail::save_json_file(path, j);
}

inline std::vector<FusedPose3D> load_fused_poses(const std::string& path,
                                                 const SkeletonDefinition& skel) {
  const json doc = io_detail::load_json_file(path);
  std::vector<FusedPose3D> out;
  for (const auto& person : doc.value("persons", json::array())) {
    FusedPose3D pose;
    pose.person_id = person.value("person_id", -1);
    pose.joints.resize(skel.joint_count());
    for (const auto& jj : person.value("joints", json::array())) {
      const int idx = skel.joint_index(jj.at("name").get<std::string>());
      if (idx < 0)
        throw std::runtime_error(path + ": joint '" +
                                 jj.at("name").get<std::string>() +
                                 "' not in skeleton '" + skel.name + "'");
      pose.joints[idx] = FusedJoint{Point3(jj.at("x").get<double>(),
                                           jj.at("y").get<double>(),
                                           jj.at("z").get<double>()),
                                    jj.value("support", 1)};
    }
    out.push_back(std::move(pose));
  }
  return out;
}

struct GroundTruthFrame {
  int frame_index{0};
  std::vector<EvalPose> persons;
};

inline void save_ground_truth(const std::string& path,
                              const std::vector<GroundTruthFrame>& frames,
                              const SkeletonDefinition& skel) {
  json j;
  j["skeleton"] = skel.name;
  j["frames"] = json::array();
  for (const auto& frame : frames) {
    json jf;
    jf["frame"] = frame.frame_index;
    jf["persons"] = json::array();
    for (std::size_t p = 0; p < frame.persons.size(); ++p) {
      json person;
      person["person_id"] = static_cast<int>(p);
      person["joints"] = json::array();
      const auto& joints = frame.persons[p].joints;
      for (std::size_t joint = 0; joint < joints.size(); ++joint) {
        if (!joints[joint]) continue;
        person["joints"].push_back({{"name", skel.joints[joint]},
                                    {"x", joints[joint]->x()},
                                    {"y", joints[joint]->y()},
                                    {"z", joints[joint]->z()},
                                    {"valid", true}});
      }
      jf["persons"].push_back(std::move(person));
    }
    j["frames"].push_back(std::move(jf));
  }
  io_detail::save_json_file(path, j);
}

inline std::vector<GroundTruthFrame> load_ground_truth(const std::string& path,
                                                       const SkeletonDefinition& skel) {
  const json doc = io_detail::load_json_file(path);
  std::vector<GroundTruthFrame> out;
  for (const auto& jf : doc.value("frames", json::array())) {
    GroundTruthFrame frame;
    frame.frame_index = jf.value("frame", static_cast<int>(out.size()));
    for (const auto& person : jf.value("persons", json::array())) {
      EvalPose pose;
      pose.joints.resize(skel.joint_count());
      for (const auto& jj : person.value("joints", json::array())) {
        const std::string name = jj.at("name").get<std::string>();
        const int idx = skel.joint_index(name);
        if (idx < 0)
          throw std::runtime_error(path + ": joint '" + name + "' not in skeleton '" +
                                   skel.name + "'");
        if (!jj.value("valid", true)) continue;
        pose.joints[idx] = Point3(jj.at("x").get<double>(), jj.at("y").get<double>(),
                                  jj.at("z").get<double>());
      }
      frame.persons.push_back(std::move(pose));
    }
    out.push_back(std::move(frame));
  }
  return out;
}

// --- Metric report ------------------------------------------------------------

inline json report_to_json(const MetricReport& r) {
  json j;
  j["pcp"] = r.pcp;
  j["pck100"] = r.pck100;
  j["pck500"] = r.pck500;
  if (r.mpjpe_mm) j["mpjpe_mm"] = *r.mpjpe_mm;
  j["recall100"] = r.recall100;
  j["recall500"] = r.recall500;
  j["invalid_pct"] = r.invalid_pct;
  j["f1"] = r.f1;
  if (r.fps) j["fps"] = *r.fps;
  return j;
}

inline std::string report_csv_header() {
  return "pcp,pck100,pck500,mpjpe_mm,recall100,recall500,invalid_pct,f1,fps";
}

inline std::string report_csv_row(const MetricReport& r) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  std::string row = num(r.pcp) + "," + num(r.pck100) + "," + num(r.pck500) + ",";
  row += r.mpjpe_mm ? num(*r.mpjpe_mm) : std::string();
  row += "," + num(r.recall100) + "," + num(r.recall500) + "," + num(r.invalid_pct) +
         "," + num(r.f1) + ",";
  row += r.fps ? num(*r.fps) : std::string();
  return row;
}

}  // namespace depthpose
