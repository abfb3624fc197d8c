#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace depthpose {

/// Single-channel depth image, row-major, meters. 0 marks an invalid pixel
/// (sensor hole / background), matching the common sensor convention.
struct DepthImage {
  std::string view_id;
  int width{0};
  int height{0};
  std::vector<double> values;  // size width*height, meters, 0 = invalid

  static DepthImage zeros(std::string view, int w, int h) {
    DepthImage img;
    img.view_id = std::move(view);
    img.width = w;
    img.height = h;
    img.values.assign(static_cast<std::size_t>(w) * h, 0.0);
    return img;
  }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }

  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }

  double& at(int x, int y) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

namespace detail {

inline std::uint16_t quantize_depth(double meters, double unit_scale) {
  if (!(meters > 0.0)) return 0;
  const double q = meters / unit_scale + 0.5;
  if (q >= 65535.0) return 65535;
  const auto u = static_cast<std::uint16_t>(q);
  return u == 0 ? 1 : u;  // a valid depth must not collapse into the sentinel
}

}  // namespace detail

// --- 16-bit PGM (P5, maxval 65535, big-endian samples), values in units of
// --- `unit_scale` meters (default millimeters). 0 = invalid.

inline void save_depth_pgm(const std::string& path, const DepthImage& img,
                           double unit_scale = 0.001) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write depth image: " + path);
  f << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint16_t u = detail::quantize_depth(img.at(x, y), unit_scale);
      row[2 * x] = static_cast<unsigned char>(u >> 8);
      row[2 * x + 1] = static_cast<unsigned char>(u & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

inline DepthImage load_depth_pgm(const std::string& path, std::string view_id,
                                 double unit_scale = 0.001) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read depth image: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw std::runtime_error("not a P5 PGM: " + path);
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (!f || w <= 0 || h <= 0 || maxval != 65535)
    throw std::runtime_error("unsupported PGM header (need 16-bit): " + path);
  f.get();  // single whitespace after maxval
  DepthImage img = DepthImage::zeros(std::move(view_id), w, h);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 2);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!f) throw std::runtime_error("truncated PGM: " + path);
    for (int x = 0; x < w; ++x) {
      const std::uint16_t u =
          static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
      img.at(x, y) = u == 0 ? 0.0 : u * unit_scale;
    }
  }
  return img;
}

// --- Raw binary format: magic "DIM1", u32 width, u32 height, f32 unit_scale
// --- (meters per unit), then width*height u16 samples. All little-endian.

inline void save_depth_raw(const std::string& path, const DepthImage& img,
                           double unit_scale = 0.001) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write depth image: " + path);
  const char magic[4] = {'D', 'I', 'M', '1'};
  const std::uint32_t w = static_cast<std::uint32_t>(img.width);
  const std::uint32_t h = static_cast<std::uint32_t>(img.height);
  const float scale = static_cast<float>(unit_scale);
  f.write(magic, 4);
  f.write(reinterpret_cast<const char*>(&w), 4);
  f.write(reinterpret_cast<const char*>(&h), 4);
  f.write(reinterpret_cast<const char*>(&scale), 4);
  std::vector<std::uint16_t> buf(img.values.size());
  for (std::size_t i = 0; i < img.values.size(); ++i)
    buf[i] = detail::quantize_depth(img.values[i], unit_scale);
  f.write(reinterpret_cast<const char*>(buf.data()), buf.size() * 2);
  if (!f) throw std::runtime_error("short write: " + path);
}

inline DepthImage load_depth_raw(const std::string& path, std::string view_id) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read depth image: " + path);
  char magic[4] = {};
  std::uint32_t w = 0, h = 0;
  float scale = 0.f;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&w), 4);
  f.read(reinterpret_cast<char*>(&h), 4);
  f.read(reinterpret_cast<char*>(&scale), 4);
  if (!f || std::memcmp(magic, "DIM1", 4) != 0 || w == 0 || h == 0 || !(scale > 0.f))
    throw std::runtime_error("bad raw depth header: " + path);
  DepthImage img = DepthImage::zeros(std::move(view_id), static_cast<int>(w),
                                     static_cast<int>(h));
  std::vector<std::uint16_t> buf(img.values.size());
  f.read(reinterpret_cast<char*>(buf.data()), buf.size() * 2);
  if (!f) throw std::runtime_error("truncated raw depth image: " + path);
  for (std::size_t i = 0; i < buf.size(); ++i)
    img.values[i] = buf[i] == 0 ? 0.0 : buf[i] * static_cast<double>(scale);
  return img;
}

// Dispatch on extension: .pgm / .dim
inline void save_depth_image(const std::string& path, const DepthImage& img,
                             double unit_scale = 0.001) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
    save_depth_pgm(path, img, unit_scale);
  else
    save_depth_raw(path, img, unit_scale);
}

inline DepthImage load_depth_image(const std::string& path, std::string view_id,
                                   double unit_scale = 0.001) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
    return load_depth_pgm(path, std::move(view_id), unit_scale);
  return load_depth_raw(path, std::move(view_id));
}

}  // namespace depthpose
