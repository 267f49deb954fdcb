#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

namespace hpppf {

/// 3D points in meters with optional per-point RGB in [0,1].
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;  // empty, or same length as points

  int size() const { return static_cast<int>(points.size()); }
  bool has_colors() const { return !colors.empty(); }
  void validate() const;  // finite coordinates, color length match
};

/// Point cloud with unit normals oriented toward `viewpoint`
/// (n_i . (viewpoint - p_i) >= 0 when produced by estimate_normals).
struct OrientedPointCloud {
  PointCloud cloud;
  std::vector<Eigen::Vector3d> normals;
  Eigen::Vector3d viewpoint = Eigen::Vector3d::Zero();
  int degenerate_normals = 0;  // neighborhoods with rank<2 covariance

  int size() const { return cloud.size(); }
  void validate() const;
};

struct CameraIntrinsics {
  double fx = 0, fy = 0;  // focal lengths, pixels
  double cx = 0, cy = 0;  // principal point, pixels
  int width = 0, height = 0;

  void validate() const;
};

using DepthImage = Eigen::MatrixXd;  // H x W, meters, 0 = invalid
using MaskImage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Pinhole back-projection: one point per valid masked pixel, row-major
/// pixel order. Depth 0 marks invalid pixels; negative depth is rejected.
PointCloud backproject(const DepthImage& depth, const CameraIntrinsics& intr,
                       const MaskImage* mask = nullptr);

/// Seeded deterministic index draw: n distinct indices when the cloud is
/// large enough, otherwise all indices plus draws with replacement.
std::vector<int> sample_indices(int cloud_size, int n, std::uint64_t seed);

PointCloud sample(const PointCloud& cloud, int n, std::uint64_t seed);

PointCloud select(const PointCloud& cloud, const std::vector<int>& indices);

/// Per-point normal from the covariance of the k nearest neighbors plus the
/// point itself, sign-flipped toward the viewpoint. Degenerate (rank<2)
/// neighborhoods fall back to the unit vector toward the viewpoint and are
/// counted in the result's diagnostic field.
OrientedPointCloud estimate_normals(const PointCloud& cloud, int k,
                                    const Eigen::Vector3d& viewpoint);

/// Restrict an oriented cloud to the given point indices.
OrientedPointCloud select(const OrientedPointCloud& cloud,
                          const std::vector<int>& indices);

/// Rigid transform of points and normals about `center`:
/// p -> R(p-center)+center+t. Used for invariance audits.
OrientedPointCloud apply_rigid(const OrientedPointCloud& cloud,
                               const Eigen::Matrix3d& R,
                               const Eigen::Vector3d& t,
                               const Eigen::Vector3d& center);

}  // namespace hpppf
