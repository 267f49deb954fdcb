#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "hpppf/fusion.hpp"
#include "hpppf/pointcloud.hpp"

namespace hpppf {

/// Cloud as loaded from disk; normals present only when the file carried them.
struct LoadedCloud {
  PointCloud cloud;
  std::vector<Eigen::Vector3d> normals;  // empty or same length

  bool has_normals() const { return !normals.empty(); }
};

// ASCII PLY with properties x,y,z[,red,green,blue][,nx,ny,nz]
LoadedCloud read_cloud_ply(const std::string& path);
void write_cloud_ply(const std::string& path, const PointCloud& cloud,
                     const std::vector<Eigen::Vector3d>& normals = {});

// CSV with header x,y,z[,r,g,b]
LoadedCloud read_cloud_csv(const std::string& path);
void write_cloud_csv(const std::string& path, const PointCloud& cloud);

/// Dispatches on extension (.ply / .csv).
LoadedCloud read_cloud(const std::string& path);

/// 16-bit PGM depth map (P2 or P5, maxval up to 65535). Stored values are
/// scaled to meters by `scale` (default: value is millimeters).
DepthImage read_depth_pgm(const std::string& path, double scale = 1e-3);

// Flat binary matrix container (header documented in the README):
// magic "HPPF", u32 rows, u32 cols, u32 dtype (4 = f32, 8 = f64),
// then rows*cols row-major little-endian values.
void write_matrix_bin(const std::string& path, const Eigen::MatrixXd& m,
                      int dtype_bytes = 8);
Eigen::MatrixXd read_matrix_bin(const std::string& path);

// CSV with header f0..f{C-1}, one row per point
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// Spherical map container: matrix header (magic "HPSM", rows = W*H, cols = C)
// plus a (W, H, C) extension, the map center, the occupancy bytes, and the
// bin features. Bit layout in the README.
void write_map_bin(const std::string& path, const SphericalFeatureMap& map,
                   int dtype_bytes = 8);
SphericalFeatureMap read_map_bin(const std::string& path);

/// One 8-bit PGM slice of a map channel, bins scaled to the channel range.
void write_map_channel_pgm(const std::string& path,
                           const SphericalFeatureMap& map, int channel);

}  // namespace hpppf
