#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthpose/depth_image.hpp"
#include "depthpose/geometry.hpp"
#include "depthpose/skeleton.hpp"

namespace depthpose {

/// Cross-shaped sampling window: the union of a horizontal and a vertical
/// rectangle (arm_length long, thickness wide) centered on the keypoint.
/// The shape emphasizes the center region and avoids the corner outliers a
/// square window would pick up at depth edges.
struct CrossParams {
  int arm_length{11};  // odd, full extent of each rectangle's long side
  int thickness{3};    // odd, short side
  int min_valid{5};    // minimum valid pixels for a sample to succeed

  void validate() const {
    if (arm_length < thickness || thickness < 1)
      throw std::invalid_argument("cross: need arm_length >= thickness >= 1");
    if (arm_length % 2 == 0 || thickness % 2 == 0)
      throw std::invalid_argument("cross: arm_length and thickness must be odd");
    if (min_valid < 1) throw std::invalid_argument("cross: min_valid must be >= 1");
  }
};

namespace detail {

// Median of the first n entries of buf; buf is reordered. Even counts take
// the mean of the two middle values.
inline double median_in_place(std::vector<double>& buf) {
  std::sort(buf.begin(), buf.end());
  const std::size_t n = buf.size();
  const std::size_t mid = n / 2;
  if (n % 2 == 1) return buf[mid];
  return (buf[mid - 1] + buf[mid]) / 2.0;
}

}  // namespace detail

/// Median depth of the valid pixels inside the cross centered at round(px),
/// clipped to the image. Empty when fewer than min_valid valid pixels remain;
/// the joint then simply cannot be lifted from this view. An out-of-bounds
/// center is allowed.
inline std::optional<double> sample_depth(const DepthImage& img, const Pixel& px,
                                          const CrossParams& params) {
  if (!is_finite(px)) return std::nullopt;
  const long lcx = std::lround(px.u);
  const long lcy = std::lround(px.v);
  const int arm = (params.arm_length - 1) / 2;
  const int thick = (params.thickness - 1) / 2;
  if (lcx < -static_cast<long>(arm) - 1 || lcx > img.width + arm ||
      lcy < -static_cast<long>(arm) - 1 || lcy > img.height + arm)
    return std::nullopt;  // cross cannot touch the image
  const int cx = static_cast<int>(lcx);
  const int cy = static_cast<int>(lcy);

  const int x0 = std::max(0, cx - arm);
  const int x1 = std::min(img.width - 1, cx + arm);
  const int y0 = std::max(0, cy - arm);
  const int y1 = std::min(img.height - 1, cy + arm);

  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(params.arm_length) * params.thickness * 2);
  for (int y = y0; y <= y1; ++y) {
    const int dy = std::abs(y - cy);
    for (int x = x0; x <= x1; ++x) {
      const int dx = std::abs(x - cx);
      if (dx > thick && dy > thick) continue;  // outside both rectangles
      const double d = img.at(x, y);
      if (d > 0.0) vals.push_back(d);
    }
  }
  if (static_cast<int>(vals.size()) < params.min_valid) return std::nullopt;
  return detail::median_in_place(vals);
}

struct JointProposal {
  Point3 position;  // world frame, meters
  double confidence{1.0};
};

/// One person's 3D pose as lifted from a single view. Multiple views yield
/// multiple proposals for the same physical person; fusion reconciles them.
struct PoseProposal3D {
  std::string source_view;
  std::vector<std::optional<JointProposal>> joints;  // indexed by skeleton joint

  int present_count() const {
    int n = 0;
    for (const auto& j : joints) n += j.has_value() ? 1 : 0;
    return n;
  }
};

/// Lifts a 2D pose to a world-frame 3D proposal: per detected keypoint, take
/// the cross-median depth, add the per-joint surface-to-center offset (a depth
/// camera measures the surface, the target is the joint center), unproject.
/// Joints whose depth sample fails are absent. A proposal with zero present
/// joints is still returned; callers drop it.
inline PoseProposal3D lift_pose(const Pose2D& pose, const DepthImage& img,
                                const CameraCalibration& calib,
                                const SkeletonDefinition& skel,
                                const CrossParams& params, bool apply_offsets) {
  if (pose.view_id != img.view_id || img.view_id != calib.view_id) {
    throw std::logic_error("lift_pose: mismatched view ids (pose '" + pose.view_id +
                           "', image '" + img.view_id + "', calibration '" +
                           calib.view_id + "')");
  }
  PoseProposal3D out;
  out.source_view = pose.view_id;
  out.joints.resize(skel.joint_count());
  for (const auto& kp : pose.keypoints) {
    if (kp.joint < 0 || kp.joint >= skel.joint_count()) {
      throw std::out_of_range("lift_pose: keypoint joint index " +
                              std::to_string(kp.joint) + " outside skeleton '" +
                              skel.name + "'");
    }
    const auto depth = sample_depth(img, kp.pixel, params);
    if (!depth) continue;
    const double d = *depth + (apply_offsets ? skel.depth_offsets[kp.joint] : 0.0);
    out.joints[kp.joint] = JointProposal{unproject(calib, kp.pixel, d), kp.confidence};
  }
  return out;
}

}  // namespace depthpose
