#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthpose/depth_image.hpp"
#include "depthpose/geometry.hpp"
#include "depthpose/rng.hpp"
#include "depthpose/skeleton.hpp"

namespace depthpose {

/// Articulated person built from spheres at the joints and capsules along the
/// limbs, plus non-joint body volume (trunk, head) so bodies occlude each
/// other realistically. The per-joint radii are the surface model: a rendered
/// depth pixel sees the capsule surface, so the joint center sits one local
/// radius behind it — exactly what the per-joint depth offsets compensate.
struct BodyVolume {
  Point3 a, b;  // world frame; a == b for a sphere
  double radius{0.0};
};

struct SyntheticPerson {
  std::vector<Point3> joint_positions;  // world frame, meters
  std::vector<double> joint_radii;      // meters; limb capsules take the
                                        // smaller of their endpoint radii
  std::vector<BodyVolume> body;         // extra non-joint volume
};

struct NoiseConfig {
  double depth_sigma{0.0};       // gaussian per valid depth pixel, meters
  double pixel_sigma{0.0};       // gaussian on keypoint coordinates, pixels
  double keypoint_dropout{0.0};  // probability a visible keypoint is dropped
  double depth_holes{0.0};       // probability a valid depth pixel turns invalid

  void validate() const {
    for (double p : {keypoint_dropout, depth_holes})
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("noise: probabilities must be in [0,1]");
    if (depth_sigma < 0.0 || pixel_sigma < 0.0)
      throw std::invalid_argument("noise: sigmas must be >= 0");
  }
};

struct SceneConfig {
  int person_count{3};
  int camera_count{5};
  double camera_ring_radius{3.0};  // meters
  double camera_height{2.2};
  int image_width{640};
  int image_height{480};
  double focal_px{525.0};          // at 640px width; scales with resolution
  double spawn_radius{1.1};        // persons stay inside this disc
  double motion_step{0.02};        // meters per frame along the orbit
  double motion_amplitude{0.3};    // orbit radius around each base position
  NoiseConfig noise;
  std::uint64_t seed{1};

  void validate() const {
    if (person_count < 1 || camera_count < 1)
      throw std::invalid_argument("scene: counts must be >= 1");
    if (!(camera_ring_radius > 0.0) || image_width < 16 || image_height < 16)
      throw std::invalid_argument("scene: bad camera geometry");
    noise.validate();
  }
};

namespace synth_detail {

struct Anchor {
  double x, y, z;   // local frame: person at origin, facing +x, z up
  double radius;
};

// Canonical body template keyed by joint name, so data-driven skeletons
// (13-joint, 17-joint, custom) all pose the same synthetic body. Heights and
// widths sized from normal human proportions; every limb stays well under
// 0.8 m and the body under 2 m. Radii follow the default surface model of
// 0.06 m for torso joints and 0.04 m for limb joints; face landmarks stick
// out of the head sphere so they stay visible from the front.
inline const std::map<std::string, Anchor>& body_template() {
  static const std::map<std::string, Anchor> t = {
      {"nose", {0.09, 0.0, 1.62, 0.02}},
      {"head", {-0.02, 0.0, 1.66, 0.085}},
      {"left_eye", {0.07, 0.033, 1.66, 0.012}},
      {"right_eye", {0.07, -0.033, 1.66, 0.012}},
      {"left_ear", {0.0, 0.095, 1.64, 0.015}},
      {"right_ear", {0.0, -0.095, 1.64, 0.015}},
      {"neck", {0.0, 0.0, 1.48, 0.05}},
      {"left_shoulder", {0.0, 0.18, 1.45, 0.06}},
      {"right_shoulder", {0.0, -0.18, 1.45, 0.06}},
      {"left_elbow", {0.0, 0.24, 1.17, 0.04}},
      {"right_elbow", {0.0, -0.24, 1.17, 0.04}},
      {"left_wrist", {0.0, 0.26, 0.93, 0.04}},
      {"right_wrist", {0.0, -0.26, 0.93, 0.04}},
      {"left_hip", {0.0, 0.10, 0.95, 0.06}},
      {"right_hip", {0.0, -0.10, 0.95, 0.06}},
      {"left_knee", {0.0, 0.11, 0.50, 0.04}},
      {"right_knee", {0.0, -0.11, 0.50, 0.04}},
      {"left_ankle", {0.0, 0.12, 0.08, 0.04}},
      {"right_ankle", {0.0, -0.12, 0.08, 0.04}},
  };
  return t;
}

}  // namespace synth_detail

/// Poses the canonical body for one skeleton at `position` (floor point),
/// rotated by `yaw`. `swing` animates the arms (forward/backward, radians);
/// joint radii default to the template's and can be overridden per joint to
/// mis-match the depth offsets deliberately.
inline SyntheticPerson make_person(const SkeletonDefinition& skel, const Point3& position,
                                   double yaw, double swing = 0.0,
                                   const std::vector<double>* radii_override = nullptr) {
  const auto& tpl = synth_detail::body_template();
  SyntheticPerson person;
  person.joint_positions.reserve(skel.joint_count());
  person.joint_radii.reserve(skel.joint_count());
  const double c = std::cos(yaw), s = std::sin(yaw);
  auto place = [&](double x, double y, double z) {
    return Point3(position.x() + c * x - s * y, position.y() + s * x + c * y,
                  position.z() + z);
  };
  for (int j = 0; j < skel.joint_count(); ++j) {
    const auto it = tpl.find(skel.joints[j]);
    if (it == tpl.end())
      throw std::invalid_argument("synthetic body has no anchor for joint '" +
                                  skel.joints[j] + "'");
    synth_detail::Anchor a = it->second;
    // arm swing: wrists lead, elbows follow, left opposite right
    const bool left = skel.joints[j].rfind("left_", 0) == 0;
    const double side = left ? 1.0 : -1.0;
    if (skel.joints[j].find("wrist") != std::string::npos) a.x += side * 0.20 * std::sin(swing);
    if (skel.joints[j].find("elbow") != std::string::npos) a.x += side * 0.10 * std::sin(swing);
    person.joint_positions.push_back(place(a.x, a.y, a.z));
    person.joint_radii.push_back(radii_override ? (*radii_override)[j] : a.radius);
  }
  // trunk and skull: kept just inside the joint spheres so every joint stays
  // the outermost surface at its own pixel, while rays through the torso or
  // the back of the head no longer pass through empty space
  person.body.push_back({place(0, 0, 1.40), place(0, 0, 0.95), 0.058});
  person.body.push_back({place(-0.02, 0, 1.66), place(-0.02, 0, 1.66), 0.085});
  return person;
}

/// Copy of a skeleton whose depth offsets match the synthetic surface model:
/// for every joint the template knows, the offset becomes the capsule radius.
/// This is the configuration the end-to-end oracle runs with (the offsets
/// then compensate the rendered surfaces exactly); mis-matching them on
/// purpose reproduces the no-offset degradation.
inline SkeletonDefinition with_body_matched_offsets(SkeletonDefinition skel) {
  const auto& tpl = synth_detail::body_template();
  for (int j = 0; j < skel.joint_count(); ++j) {
    const auto it = tpl.find(skel.joints[j]);
    if (it != tpl.end()) skel.depth_offsets[j] = it->second.radius;
  }
  return skel;
}

struct Scene {
  std::vector<SyntheticPerson> persons;
  std::vector<CameraCalibration> cameras;
};

/// Cameras evenly spaced on a ring looking at the scene center, persons on
/// non-interpenetrating orbits with a small deterministic arm swing. A pure
/// function of (config, skeleton, frame_index).
inline Scene generate_scene(const SceneConfig& cfg, const SkeletonDefinition& skel,
                            int frame_index) {
  cfg.validate();
  Scene scene;

  const double f = cfg.focal_px * cfg.image_width / 640.0;
  for (int k = 0; k < cfg.camera_count; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / cfg.camera_count;
    CameraCalibration calib;
    calib.view_id = "cam" + std::string(k < 10 ? "0" : "") + std::to_string(k);
    calib.width = cfg.image_width;
    calib.height = cfg.image_height;
    calib.fx = calib.fy = f;
    calib.cx = (cfg.image_width - 1) / 2.0;
    calib.cy = (cfg.image_height - 1) / 2.0;
    calib.translation = Point3(cfg.camera_ring_radius * std::cos(angle),
                               cfg.camera_ring_radius * std::sin(angle), cfg.camera_height);
    calib.rotation = look_at_rotation(calib.translation, Point3(0, 0, 1.0));
    calib.validate();
    scene.cameras.push_back(std::move(calib));
  }

  // Base placement: rejection-sample positions with enough pairwise spacing
  // that orbiting bodies can never interpenetrate. An unlucky draw (first
  // person at the disc center) can make a small disc infeasible, so the disc
  // grows deterministically between rounds, capped inside the camera ring.
  Rng rng(cfg.seed);
  const double spacing = 0.7 + 2.0 * cfg.motion_amplitude;
  const double radius_cap = std::max(cfg.spawn_radius, 0.65 * cfg.camera_ring_radius);
  double radius = cfg.spawn_radius;
  std::vector<Point3> bases;
  for (int round = 0; round < 8; ++round) {
    bases.clear();
    for (int p = 0; p < cfg.person_count; ++p) {
      bool placed = false;
      for (int attempt = 0; attempt < 400 && !placed; ++attempt) {
        const double r = radius * std::sqrt(rng.uniform());
        const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Point3 base(r * std::cos(a), r * std::sin(a), 0.0);
        placed = std::all_of(bases.begin(), bases.end(), [&](const Point3& b) {
          return (b - base).norm() >= spacing;
        });
        if (placed) bases.push_back(base);
      }
      if (!placed) break;
    }
    if (static_cast<int>(bases.size()) == cfg.person_count) break;
    radius = std::min(radius * 1.2, radius_cap);
  }
  if (static_cast<int>(bases.size()) != cfg.person_count)
    throw std::runtime_error("generate_scene: cannot place " +
                             std::to_string(cfg.person_count) +
                             " persons without interpenetration");

  for (int p = 0; p < cfg.person_count; ++p) {
    const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double orbit_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double swing_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double omega =
        cfg.motion_amplitude > 0.0 ? cfg.motion_step / cfg.motion_amplitude : 0.0;
    const double t = orbit_phase + omega * frame_index;
    const Point3 pos = bases[p] + cfg.motion_amplitude * Point3(std::cos(t), std::sin(t), 0.0);
    const double swing = 0.6 * std::sin(swing_phase + 0.15 * frame_index);
    scene.persons.push_back(make_person(skel, pos, yaw, swing));
  }
  return scene;
}

namespace synth_detail {

struct CapsuleCam {
  Point3 a, b;   // endpoints in camera frame (a == b for a sphere)
  double radius;
};

// Nearest positive ray parameter for the camera-frame ray lambda * d, d the
// pixel direction with d.z == 1, against a capsule; +inf on a miss. With
// d.z == 1 the parameter IS the camera-frame z of the hit.
inline double ray_capsule(const Point3& d, const CapsuleCam& c) {
  constexpr double kMiss = std::numeric_limits<double>::infinity();
  const double d2 = d.squaredNorm();
  double best = kMiss;

  auto sphere = [&](const Point3& center) {
    const double proj = d.dot(center);
    const double disc = proj * proj - d2 * (center.squaredNorm() - c.radius * c.radius);
    if (disc < 0.0) return kMiss;
    const double t = (proj - std::sqrt(disc)) / d2;
    return t > 0.0 ? t : kMiss;
  };

  best = std::min(best, sphere(c.a));
  const Point3 axis = c.b - c.a;
  const double len2 = axis.squaredNorm();
  if (len2 > 1e-16) {
    best = std::min(best, sphere(c.b));
    // infinite cylinder, then clamp the hit to the segment
    const Point3 u = axis / std::sqrt(len2);
    const Point3 d_perp = d - d.dot(u) * u;
    const Point3 o_perp = -c.a + c.a.dot(u) * u;  // origin relative to a, axis removed
    const double A = d_perp.squaredNorm();
    if (A > 1e-16) {
      const double B = 2.0 * d_perp.dot(o_perp);
      const double C = o_perp.squaredNorm() - c.radius * c.radius;
      const double disc = B * B - 4.0 * A * C;
      if (disc >= 0.0) {
        const double t = (-B - std::sqrt(disc)) / (2.0 * A);
        if (t > 0.0 && t < best) {
          const double s = (t * d - c.a).dot(u);
          if (s >= 0.0 && s <= std::sqrt(len2)) best = t;
        }
      }
    }
  }
  return best;
}

}  // namespace synth_detail

/// Analytic capsule rasterization: per pixel, the nearest ray intersection
/// over all joint spheres and limb capsules, recorded as camera-frame z.
/// Background stays invalid. Exact geometry keeps oracle tolerances tight.
inline DepthImage render_depth(const std::vector<SyntheticPerson>& persons,
                               const SkeletonDefinition& skel,
                               const CameraCalibration& calib) {
  DepthImage img = DepthImage::zeros(calib.view_id, calib.width, calib.height);
  std::vector<double> zbuf(img.values.size(), std::numeric_limits<double>::infinity());

  std::vector<synth_detail::CapsuleCam> prims;
  for (const auto& person : persons) {
    const int n = static_cast<int>(person.joint_positions.size());
    for (int j = 0; j < n; ++j) {
      const Point3 p = calib.world_to_camera(person.joint_positions[j]);
      prims.push_back({p, p, person.joint_radii[j]});
    }
    for (const auto& limb : skel.limbs) {
      if (limb[0] >= n || limb[1] >= n) continue;
      const Point3 a = calib.world_to_camera(person.joint_positions[limb[0]]);
      const Point3 b = calib.world_to_camera(person.joint_positions[limb[1]]);
      prims.push_back({a, b, std::min(person.joint_radii[limb[0]],
                                      person.joint_radii[limb[1]])});
    }
    for (const auto& vol : person.body)
      prims.push_back({calib.world_to_camera(vol.a), calib.world_to_camera(vol.b),
                       vol.radius});
  }

  for (const auto& prim : prims) {
    // conservative screen-space bounding box of the capsule
    const double zmin = std::min(prim.a.z(), prim.b.z()) - prim.radius;
    if (zmin <= 0.05) continue;  // behind or too close; cameras sit outside bodies
    double u0 = std::numeric_limits<double>::max(), u1 = std::numeric_limits<double>::lowest();
    double v0 = u0, v1 = u1;
    for (const Point3& e : {prim.a, prim.b}) {
      // exact screen bounds of the endpoint sphere's bounding cube
      const double zlo = e.z() - prim.radius, zhi = e.z() + prim.radius;
      const double xlo = e.x() - prim.radius, xhi = e.x() + prim.radius;
      const double ylo = e.y() - prim.radius, yhi = e.y() + prim.radius;
      u0 = std::min(u0, calib.fx * (xlo >= 0.0 ? xlo / zhi : xlo / zlo) + calib.cx);
      u1 = std::max(u1, calib.fx * (xhi >= 0.0 ? xhi / zlo : xhi / zhi) + calib.cx);
      v0 = std::min(v0, calib.fy * (ylo >= 0.0 ? ylo / zhi : ylo / zlo) + calib.cy);
      v1 = std::max(v1, calib.fy * (yhi >= 0.0 ? yhi / zlo : yhi / zhi) + calib.cy);
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(u0)));
    const int x1 = std::min(calib.width - 1, static_cast<int>(std::ceil(u1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(v0)));
    const int y1 = std::min(calib.height - 1, static_cast<int>(std::ceil(v1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Point3 dir((x - calib.cx) / calib.fx, (y - calib.cy) / calib.fy, 1.0);
        const double z = synth_detail::ray_capsule(dir, prim);
        if (z == std::numeric_limits<double>::infinity()) continue;
        double& slot = zbuf[static_cast<std::size_t>(y) * calib.width + x];
        if (z < slot) slot = z;
      }
    }
  }

  for (std::size_t i = 0; i < zbuf.size(); ++i)
    img.values[i] = zbuf[i] == std::numeric_limits<double>::infinity() ? 0.0 : zbuf[i];
  return img;
}

/// Per-pixel depth noise and dropout holes. Applied after visibility has been
/// decided: visibility is a property of the geometry, not of sensor noise.
inline void add_depth_noise(DepthImage& img, const NoiseConfig& noise, Rng& rng) {
  if (noise.depth_sigma <= 0.0 && noise.depth_holes <= 0.0) return;
  for (double& v : img.values) {
    if (!(v > 0.0)) continue;
    if (noise.depth_holes > 0.0 && rng.bernoulli(noise.depth_holes)) {
      v = 0.0;
      continue;
    }
    if (noise.depth_sigma > 0.0) v = std::max(0.01, v + rng.normal(noise.depth_sigma));
  }
}

/// Emits 2D keypoints the way a visibility-aware detector would: a joint is
/// kept only when the rendered depth at its pixel matches the joint's own
/// surface depth (center depth minus local radius) within a tolerance, so
/// occluded joints never leak into the output. Pixel noise, dropout and
/// confidence sampling run afterwards.
inline std::vector<Pose2D> project_keypoints(const std::vector<SyntheticPerson>& persons,
                                             const CameraCalibration& calib,
                                             const DepthImage& clean_depth,
                                             const NoiseConfig& noise, Rng& rng) {
  std::vector<Pose2D> out;
  for (const auto& person : persons) {
    Pose2D pose;
    pose.view_id = calib.view_id;
    for (int j = 0; j < static_cast<int>(person.joint_positions.size()); ++j) {
      const auto s = project(calib, person.joint_positions[j]);
      if (!s) continue;
      const int px = static_cast<int>(std::lround(s->pixel.u));
      const int py = static_cast<int>(std::lround(s->pixel.v));
      if (!clean_depth.in_bounds(px, py)) continue;
      const double radius = person.joint_radii[j];
      const double surface = s->depth - radius;
      const double rendered = clean_depth.at(px, py);
      const double epsilon = 0.5 * radius + 0.02;
      if (!(rendered > 0.0) || std::abs(rendered - surface) > epsilon) continue;

      if (noise.keypoint_dropout > 0.0 && rng.bernoulli(noise.keypoint_dropout)) continue;
      Keypoint2D kp;
      kp.joint = j;
      kp.pixel = s->pixel;
      if (noise.pixel_sigma > 0.0) {
        kp.pixel.u = std::clamp(kp.pixel.u + rng.normal(noise.pixel_sigma), 0.0,
                                static_cast<double>(calib.width - 1));
        kp.pixel.v = std::clamp(kp.pixel.v + rng.normal(noise.pixel_sigma), 0.0,
                                static_cast<double>(calib.height - 1));
      }
      const bool noisy = noise.pixel_sigma > 0.0 || noise.depth_sigma > 0.0 ||
                         noise.keypoint_dropout > 0.0;
      kp.confidence = noisy ? std::max(0.05, 1.0 - std::abs(rng.normal(0.15))) : 1.0;
      pose.add(kp);
    }
    if (!pose.keypoints.empty()) out.push_back(std::move(pose));
  }
  return out;
}

}  // namespace depthpose
