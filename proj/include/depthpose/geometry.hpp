#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace depthpose {

using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Continuous pixel coordinates, sub-pixel allowed.
struct Pixel {
  double u{0.0};
  double v{0.0};
};

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

inline bool is_finite(const Pixel& px) {
  return std::isfinite(px.u) && std::isfinite(px.v);
}

// Rigid motion of world space, p -> rotation * p + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Point3 translation = Point3::Zero();

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
};

/// Pinhole camera for one view. Extrinsics are stored camera->world:
/// `rotation` maps camera-frame directions into world directions and
/// `translation` is the camera center in world coordinates (meters), so
/// unprojection is a single multiply-add. Loaders convert from
/// world->camera conventions on ingestion.
struct CameraCalibration {
  std::string view_id;
  int width{0};
  int height{0};
  double fx{0.0};
  double fy{0.0};
  double cx{0.0};
  double cy{0.0};
  Mat3 rotation = Mat3::Identity();
  Point3 translation = Point3::Zero();

  Point3 world_to_camera(const Point3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }

  Point3 camera_to_world(const Point3& p_cam) const {
    return rotation * p_cam + translation;
  }

  // Throws std::invalid_argument naming the view on any violated invariant.
  void validate() const {
    auto fail = [this](const std::string& what) {
      throw std::invalid_argument("calibration '" + view_id + "': " + what);
    };
    if (view_id.empty()) fail("empty view_id");
    if (width <= 0 || height <= 0) fail("non-positive image size");
    if (!(fx > 0.0) || !(fy > 0.0)) fail("focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width)) fail("principal point cx outside image");
    if (!(cy >= 0.0 && cy < height)) fail("principal point cy outside image");
    const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-9) fail("rotation is not orthonormal");
    if (!is_finite(translation)) fail("translation not finite");
  }
};

struct CameraSample {
  Pixel pixel;
  double depth{0.0};  // camera-frame z, meters
};

/// World point -> pixel plus camera-frame depth. Empty when the point is on
/// or behind the image plane. The pixel may lie outside the image bounds;
/// callers clip.
inline std::optional<CameraSample> project(const CameraCalibration& calib,
                                           const Point3& p_world) {
  const Point3 p = calib.world_to_camera(p_world);
  if (!(p.z() > 0.0)) return std::nullopt;
  CameraSample s;
  s.pixel.u = calib.fx * p.x() / p.z() + calib.cx;
  s.pixel.v = calib.fy * p.y() / p.z() + calib.cy;
  s.depth = p.z();
  return s;
}

/// Pixel plus camera-frame depth -> world point.
inline Point3 unproject(const CameraCalibration& calib, const Pixel& px,
                        double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth) || !is_finite(px)) {
    throw std::invalid_argument("unproject('" + calib.view_id +
                                "'): depth must be finite and > 0, pixel finite");
  }
  const Point3 p_cam((px.u - calib.cx) * depth / calib.fx,
                     (px.v - calib.cy) * depth / calib.fy, depth);
  return calib.camera_to_world(p_cam);
}

// Moves the camera rig rigidly with the world: a calibration transformed this
// way projects transformed world points to the same pixels as before.
inline CameraCalibration transformed(const CameraCalibration& calib,
                                     const RigidTransform& t) {
  CameraCalibration out = calib;
  out.rotation = t.rotation * calib.rotation;
  out.translation = t.apply(calib.translation);
  return out;
}

/// Camera->world rotation for a camera at `eye` looking at `target`, with
/// image right kept horizontal w.r.t. `up`. Camera convention: +z forward,
/// +x right, +y down.
inline Mat3 look_at_rotation(const Point3& eye, const Point3& target,
                             const Point3& up = Point3(0, 0, 1)) {
  const Point3 forward = (target - eye).normalized();
  Point3 right = forward.cross(up);
  const double n = right.norm();
  if (n < 1e-12) {
    throw std::invalid_argument("look_at_rotation: view direction parallel to up");
  }
  right /= n;
  const Point3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return r;
}

}  // namespace depthpose
