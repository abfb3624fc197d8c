#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthpose/depth_image.hpp"
#include "depthpose/geometry.hpp"

namespace depthpose {

struct PointCloud {
  std::vector<Point3> points;  // world frame, meters
};

/// Unprojects every stride-th valid pixel into the world frame.
inline PointCloud depth_to_cloud(const DepthImage& img, const CameraCalibration& calib,
                                 int stride = 2) {
  if (stride < 1) throw std::invalid_argument("depth_to_cloud: stride must be >= 1");
  PointCloud cloud;
  cloud.points.reserve(img.values.size() / (static_cast<std::size_t>(stride) * stride) + 1);
  for (int y = 0; y < img.height; y += stride) {
    for (int x = 0; x < img.width; x += stride) {
      const double d = img.at(x, y);
      if (!(d > 0.0)) continue;
      const Point3 p_cam((x - calib.cx) * d / calib.fx, (y - calib.cy) * d / calib.fy, d);
      cloud.points.push_back(calib.camera_to_world(p_cam));
    }
  }
  return cloud;
}

inline PointCloud merge_clouds(const std::vector<PointCloud>& clouds) {
  PointCloud merged;
  std::size_t total = 0;
  for (const auto& c : clouds) total += c.points.size();
  merged.points.reserve(total);
  for (const auto& c : clouds)
    merged.points.insert(merged.points.end(), c.points.begin(), c.points.end());
  return merged;
}

namespace detail {

// z-buffered square splat: writes depth to all pixels within `radius`
// (Chebyshev) of the center iff strictly smaller than the current value.
inline void splat(std::vector<double>& zbuf, int width, int height, double u, double v,
                  double depth, int radius) {
  const int cx = static_cast<int>(std::lround(u));
  const int cy = static_cast<int>(std::lround(v));
  const int x0 = std::max(0, cx - radius);
  const int x1 = std::min(width - 1, cx + radius);
  const int y0 = std::max(0, cy - radius);
  const int y1 = std::min(height - 1, cy + radius);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double& z = zbuf[static_cast<std::size_t>(y) * width + x];
      if (depth < z) z = depth;
    }
  }
}

inline DepthImage zbuf_to_image(std::string view_id, int width, int height,
                                std::vector<double>&& zbuf) {
  DepthImage img;
  img.view_id = std::move(view_id);
  img.width = width;
  img.height = height;
  img.values = std::move(zbuf);
  for (double& z : img.values)
    if (!(z < std::numeric_limits<double>::infinity())) z = 0.0;
  return img;
}

}  // namespace detail

/// Renders a cloud back into a view by z-buffered point splatting. Each point
/// covers the pixels within splat_radius (Chebyshev) of its projection; the
/// smallest depth per pixel wins, untouched pixels stay invalid.
inline DepthImage cloud_to_depth(const PointCloud& cloud, const CameraCalibration& calib,
                                 int splat_radius = 1) {
  if (splat_radius < 0)
    throw std::invalid_argument("cloud_to_depth: splat_radius must be >= 0");
  std::vector<double> zbuf(static_cast<std::size_t>(calib.width) * calib.height,
                           std::numeric_limits<double>::infinity());
  for (const Point3& p : cloud.points) {
    const auto s = project(calib, p);
    if (!s) continue;
    detail::splat(zbuf, calib.width, calib.height, s->pixel.u, s->pixel.v, s->depth,
                  splat_radius);
  }
  return detail::zbuf_to_image(calib.view_id, calib.width, calib.height, std::move(zbuf));
}

/// Sparse occupancy grid over the cloud's bounding box. The origin snaps to a
/// resolution multiple of the AABB minimum so voxel indices are non-negative
/// and grid placement is deterministic.
struct VoxelMap {
  Point3 origin = Point3::Zero();
  double resolution{0.05};
  std::vector<Eigen::Vector3i> occupied;  // sorted lexicographically, unique

  bool contains(const Eigen::Vector3i& idx) const {
    return std::binary_search(occupied.begin(), occupied.end(), idx,
                              [](const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
                                return std::tie(a.x(), a.y(), a.z()) <
                                       std::tie(b.x(), b.y(), b.z());
                              });
  }

  Point3 center_of(const Eigen::Vector3i& idx) const {
    return origin + (idx.cast<double>() + Eigen::Vector3d::Constant(0.5)) * resolution;
  }

  Eigen::Vector3i index_of(const Point3& p) const {
    const Point3 rel = (p - origin) / resolution;
    return {static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y())),
            static_cast<int>(std::floor(rel.z()))};
  }
};

inline VoxelMap cloud_to_voxelmap(const PointCloud& cloud, double resolution) {
  if (!(resolution > 0.0))
    throw std::invalid_argument("cloud_to_voxelmap: resolution must be > 0");
  VoxelMap map;
  map.resolution = resolution;
  if (cloud.points.empty()) return map;

  Point3 lo = cloud.points.front();
  for (const Point3& p : cloud.points) lo = lo.cwiseMin(p);
  map.origin = Point3(std::floor(lo.x() / resolution) * resolution,
                      std::floor(lo.y() / resolution) * resolution,
                      std::floor(lo.z() / resolution) * resolution);

  map.occupied.reserve(cloud.points.size());
  for (const Point3& p : cloud.points) map.occupied.push_back(map.index_of(p));
  auto less = [](const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
  };
  auto eq = [](const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
    return a == b;
  };
  std::sort(map.occupied.begin(), map.occupied.end(), less);
  map.occupied.erase(std::unique(map.occupied.begin(), map.occupied.end(), eq),
                     map.occupied.end());
  return map;
}

/// Renders a voxel map into a view by splatting voxel centers with a square
/// footprint of their projected size: side = max(1, resolution * fx / z)
/// pixels, realized as a (2*half+1)^2 block with half = round((side-1)/2).
inline DepthImage voxelmap_to_depth(const VoxelMap& vmap, const CameraCalibration& calib) {
  std::vector<double> zbuf(static_cast<std::size_t>(calib.width) * calib.height,
                           std::numeric_limits<double>::infinity());
  for (const auto& idx : vmap.occupied) {
    const auto s = project(calib, vmap.center_of(idx));
    if (!s) continue;
    const double side = std::max(1.0, vmap.resolution * calib.fx / s->depth);
    const int half = static_cast<int>(std::lround((side - 1.0) / 2.0));
    detail::splat(zbuf, calib.width, calib.height, s->pixel.u, s->pixel.v, s->depth, half);
  }
  return detail::zbuf_to_image(calib.view_id, calib.width, calib.height, std::move(zbuf));
}

// --- Cloud dump: u64 little-endian point count, then count * 3 f64 xyz
// --- triplets (meters, world frame), also little-endian.

inline void save_cloud(const std::string& path, const PointCloud& cloud) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write cloud: " + path);
  const std::uint64_t count = cloud.points.size();
  f.write(reinterpret_cast<const char*>(&count), 8);
  for (const Point3& p : cloud.points) {
    const double xyz[3] = {p.x(), p.y(), p.z()};
    f.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

inline PointCloud load_cloud(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read cloud: " + path);
  std::uint64_t count = 0;
  f.read(reinterpret_cast<char*>(&count), 8);
  if (!f) throw std::runtime_error("bad cloud header: " + path);
  PointCloud cloud;
  cloud.points.resize(count);
  for (auto& p : cloud.points) {
    double xyz[3];
    f.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    if (!f) throw std::runtime_error("truncated cloud: " + path);
    p = Point3(xyz[0], xyz[1], xyz[2]);
  }
  return cloud;
}

}  // namespace depthpose
