#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthpose/geometry.hpp"

namespace depthpose {

/// Data-driven skeleton: joint identities, the neighbor graph used by the
/// outlier filter, per-joint depth offsets (surface-to-center, meters) and
/// the limb list used by PCP and the synthetic generator. Alternate keypoint
/// sets plug in through files; nothing downstream assumes a fixed layout.
struct SkeletonDefinition {
  std::string name;
  std::vector<std::string> joints;
  std::vector<std::vector<int>> neighbors;   // per joint, indices into joints
  std::vector<double> depth_offsets;         // per joint, meters
  std::vector<std::array<int, 2>> limbs;     // (joint_a, joint_b)

  int joint_count() const { return static_cast<int>(joints.size()); }

  int joint_index(const std::string& joint_name) const {
    const auto it = std::find(joints.begin(), joints.end(), joint_name);
    return it == joints.end() ? -1 : static_cast<int>(it - joints.begin());
  }

  // The neighbor graph is deliberately not required to be symmetric: a wrist
  // has one neighbor (the elbow) while the elbow has two.
  void validate() const {
    const int n = joint_count();
    auto fail = [this](const std::string& joint, const std::string& what) {
      throw std::invalid_argument("skeleton '" + name + "', joint '" + joint +
                                  "': " + what);
    };
    if (n == 0) throw std::invalid_argument("skeleton '" + name + "': no joints");
    if (static_cast<int>(neighbors.size()) != n)
      throw std::invalid_argument("skeleton '" + name + "': neighbors size mismatch");
    if (static_cast<int>(depth_offsets.size()) != n)
      throw std::invalid_argument("skeleton '" + name + "': depth_offsets size mismatch");
    for (int j = 0; j < n; ++j) {
      if (joints[j].empty()) fail("#" + std::to_string(j), "empty joint name");
      if (std::count(joints.begin(), joints.end(), joints[j]) != 1)
        fail(joints[j], "duplicate joint name");
      if (neighbors[j].empty()) fail(joints[j], "needs at least one neighbor");
      for (int nb : neighbors[j]) {
        if (nb < 0 || nb >= n) fail(joints[j], "neighbor index out of range");
        if (nb == j) fail(joints[j], "joint is its own neighbor");
      }
      if (!(depth_offsets[j] >= 0.0 && depth_offsets[j] <= 0.15))
        fail(joints[j], "depth offset outside [0, 0.15] m");
    }
    for (const auto& limb : limbs) {
      for (int e : limb) {
        if (e < 0 || e >= n)
          throw std::invalid_argument("skeleton '" + name +
                                      "': limb references invalid joint index");
      }
    }
  }
};

namespace coco13 {
// Joint order of the 13-keypoint set: nose plus shoulder/elbow/wrist/hip/
// knee/ankle pairs.
enum : int {
  kNose = 0,
  kLeftShoulder = 1,
  kRightShoulder = 2,
  kLeftElbow = 3,
  kRightElbow = 4,
  kLeftWrist = 5,
  kRightWrist = 6,
  kLeftHip = 7,
  kRightHip = 8,
  kLeftKnee = 9,
  kRightKnee = 10,
  kLeftAnkle = 11,
  kRightAnkle = 12,
};
}  // namespace coco13

/// The 13-joint skeleton used for evaluation. Depth offsets: 3 cm shoulders
/// and knees, 1 cm wrists; the remaining joints carry defaults sized from
/// normal human proportions (elbows 2 cm, hips 6 cm, ankles 3 cm, nose 1 cm).
/// Neighbor sets pair each limb joint with its skeletal neighbors and add
/// the torso cross-links so the outlier filter stays meaningful for hips.
inline SkeletonDefinition builtin_coco13() {
  using namespace coco13;
  SkeletonDefinition s;
  s.name = "coco13";
  s.joints = {"nose",          "left_shoulder", "right_shoulder", "left_elbow",
              "right_elbow",   "left_wrist",    "right_wrist",    "left_hip",
              "right_hip",     "left_knee",     "right_knee",     "left_ankle",
              "right_ankle"};
  s.neighbors.resize(13);
  s.neighbors[kNose] = {kLeftShoulder, kRightShoulder};
  s.neighbors[kLeftShoulder] = {kLeftElbow, kRightShoulder, kLeftHip};
  s.neighbors[kRightShoulder] = {kRightElbow, kLeftShoulder, kRightHip};
  s.neighbors[kLeftElbow] = {kLeftShoulder, kLeftWrist};
  s.neighbors[kRightElbow] = {kRightShoulder, kRightWrist};
  s.neighbors[kLeftWrist] = {kLeftElbow};
  s.neighbors[kRightWrist] = {kRightElbow};
  s.neighbors[kLeftHip] = {kLeftKnee, kRightHip, kLeftShoulder};
  s.neighbors[kRightHip] = {kRightKnee, kLeftHip, kRightShoulder};
  s.neighbors[kLeftKnee] = {kLeftHip, kLeftAnkle};
  s.neighbors[kRightKnee] = {kRightHip, kRightAnkle};
  s.neighbors[kLeftAnkle] = {kLeftKnee};
  s.neighbors[kRightAnkle] = {kRightKnee};
  s.depth_offsets = {0.01,           // nose
                     0.03, 0.03,     // shoulders
                     0.02, 0.02,     // elbows
                     0.01, 0.01,     // wrists
                     0.06, 0.06,     // hips
                     0.03, 0.03,     // knees
                     0.03, 0.03};    // ankles
  s.limbs = {{kLeftShoulder, kLeftElbow},   {kLeftElbow, kLeftWrist},
             {kRightShoulder, kRightElbow}, {kRightElbow, kRightWrist},
             {kLeftHip, kLeftKnee},         {kLeftKnee, kLeftAnkle},
             {kRightHip, kRightKnee},       {kRightKnee, kRightAnkle},
             {kLeftShoulder, kLeftHip},     {kRightShoulder, kRightHip},
             {kLeftShoulder, kRightShoulder}, {kLeftHip, kRightHip},
             {kNose, kLeftShoulder},        {kNose, kRightShoulder}};
  s.validate();
  return s;
}

struct Keypoint2D {
  int joint{0};
  Pixel pixel;
  double confidence{1.0};  // [0, 1]
};

/// One person's 2D detections in one view. Sparse: a joint that was not
/// detected (occluded or dropped) is simply absent. At most one keypoint
/// per joint index.
struct Pose2D {
  std::string view_id;
  std::vector<Keypoint2D> keypoints;  // sorted by joint index, unique

  const Keypoint2D* find(int joint) const {
    for (const auto& kp : keypoints)
      if (kp.joint == joint) return &kp;
    return nullptr;
  }

  void add(const Keypoint2D& kp) {
    if (find(kp.joint) != nullptr)
      throw std::invalid_argument("pose2d: duplicate keypoint for joint " +
                                  std::to_string(kp.joint));
    keypoints.push_back(kp);
    std::sort(keypoints.begin(), keypoints.end(),
              [](const Keypoint2D& a, const Keypoint2D& b) { return a.joint < b.joint; });
  }
};

}  // namespace depthpose
