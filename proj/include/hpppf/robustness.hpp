#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hpppf/pointcloud.hpp"

namespace hpppf {

struct PerturbConfig {
  double rotation_max_deg = 0;
  int occlusion_n = 0;  // 0 = no occlusion; mask side is 1/n of the bbox side
  double jitter_s = 0;
  std::uint64_t seed = 0;
};

/// Rotation by a uniform angle in [0, max_deg] about a uniform axis, applied
/// about the cloud centroid (or the origin). Returns the applied rotation
/// for ground-truth bookkeeping.
std::pair<PointCloud, Eigen::Matrix3d> random_rotate(const PointCloud& cloud,
                                                     double max_deg,
                                                     std::uint64_t seed,
                                                     bool about_origin = false);

/// Uniform rotation matrix with angle in [0, max_deg], as used by
/// random_rotate.
Eigen::Matrix3d random_rotation_matrix(double max_deg, std::uint64_t seed);

/// Indices surviving a rectangular image-plane mask whose sides are 1/n of
/// the projected bounding box, centered on a seeded-random projected point.
/// Re-centers (up to 10 tries) whenever a mask would erase more than 90% of
/// the cloud. Requires z > 0 for every point.
std::vector<int> occlude_indices(const PointCloud& cloud, int n, std::uint64_t seed);

PointCloud occlude(const PointCloud& cloud, int n, std::uint64_t seed);

/// Per-coordinate uniform noise in [-0.5*s*r, 0.5*s*r] with r the mean
/// distance to the centroid.
PointCloud jitter(const PointCloud& cloud, double s, std::uint64_t seed);

enum class ShapeKind { box, lshape, cylinder, blob };

ShapeKind shape_kind_from_string(const std::string& name);
std::string to_string(ShapeKind kind);

/// Surface-sampled canonical-pose shape, bounding-box centered with the
/// largest extent scaled to 1 and analytic outward normals.
OrientedPointCloud make_shape(ShapeKind kind, int n, std::uint64_t seed);

}  // namespace hpppf
