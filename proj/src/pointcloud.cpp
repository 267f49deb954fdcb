#include "hpppf/pointcloud.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "hpppf/errors.hpp"
#include "hpppf/parallel.hpp"
#include "hpppf/rng.hpp"

namespace hpppf {

void PointCloud::validate() const {
  for (const auto& p : points) {
    if (!p.allFinite()) throw input_error("point cloud contains non-finite coordinates");
  }
  if (!colors.empty() && colors.size() != points.size()) {
    throw input_error("color count (" + std::to_string(colors.size()) +
                      ") does not match point count (" + std::to_string(points.size()) + ")");
  }
}

void OrientedPointCloud::validate() const {
  cloud.validate();
  if (normals.size() != cloud.points.size()) {
    throw input_error("normal count does not match point count");
  }
  for (const auto& n : normals) {
    if (std::abs(n.norm() - 1.0) > 1e-9) throw internal_error("normal is not unit length");
  }
}

void CameraIntrinsics::validate() const {
  if (fx <= 0 || fy <= 0) throw input_error("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw input_error("image dimensions must be positive");
  if (cx < 0 || cx >= width || cy < 0 || cy >= height) {
    throw input_error("principal point outside image");
  }
}

PointCloud backproject(const DepthImage& depth, const CameraIntrinsics& intr,
                       const MaskImage* mask) {
  intr.validate();
  if (depth.rows() != intr.height || depth.cols() != intr.width) {
    throw input_error("depth map is " + std::to_string(depth.rows()) + "x" +
                      std::to_string(depth.cols()) + " but intrinsics expect " +
                      std::to_string(intr.height) + "x" + std::to_string(intr.width));
  }
  if (mask && (mask->rows() != depth.rows() || mask->cols() != depth.cols())) {
    throw input_error("mask dimensions do not match depth map");
  }
  PointCloud out;
  for (int v = 0; v < depth.rows(); ++v) {
    for (int u = 0; u < depth.cols(); ++u) {
      const double z = depth(v, u);
      if (z < 0) throw input_error("negative depth at pixel (" + std::to_string(u) + "," + std::to_string(v) + ")");
      if (z == 0) continue;
      if (mask && (*mask)(v, u) == 0) continue;
      out.points.emplace_back((u - intr.cx) * z / intr.fx,
                              (v - intr.cy) * z / intr.fy, z);
    }
  }
  return out;
}

std::vector<int> sample_indices(int cloud_size, int n, std::uint64_t seed) {
  if (cloud_size <= 0) throw input_error("cannot sample from an empty cloud");
  if (n <= 0) throw input_error("sample count must be positive");
  CounterRng rng(seed);
  std::vector<int> out;
  out.reserve(n);
  if (cloud_size >= n) {
    // partial Fisher-Yates over [0, cloud_size)
    std::vector<int> pool(cloud_size);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < n; ++i) {
      const int j = i + static_cast<int>(rng.next_index(cloud_size - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  } else {
    for (int i = 0; i < cloud_size; ++i) out.push_back(i);
    for (int i = cloud_size; i < n; ++i) {
      out.push_back(static_cast<int>(rng.next_index(cloud_size)));
    }
  }
  return out;
}

PointCloud select(const PointCloud& cloud, const std::vector<int>& indices) {
  PointCloud out;
  out.points.reserve(indices.size());
  if (cloud.has_colors()) out.colors.reserve(indices.size());
  for (int idx : indices) {
    if (idx < 0 || idx >= cloud.size()) throw input_error("point index out of range");
    out.points.push_back(cloud.points[idx]);
    if (cloud.has_colors()) out.colors.push_back(cloud.colors[idx]);
  }
  return out;
}

PointCloud sample(const PointCloud& cloud, int n, std::uint64_t seed) {
  return select(cloud, sample_indices(cloud.size(), n, seed));
}

namespace {

// k nearest neighbors of point i, self excluded, ties broken by index.
std::vector<int> knn_brute(const std::vector<Eigen::Vector3d>& pts, int i, int k) {
  const int n = static_cast<int>(pts.size());
  std::vector<std::pair<double, int>> dist;
  dist.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    dist.emplace_back((pts[j] - pts[i]).squaredNorm(), j);
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  std::vector<int> out(k);
  for (int m = 0; m < k; ++m) out[m] = dist[m].second;
  return out;
}

}  // namespace

OrientedPointCloud estimate_normals(const PointCloud& cloud, int k,
                                    const Eigen::Vector3d& viewpoint) {
  const int n = cloud.size();
  if (k < 3) throw input_error("normal estimation requires k >= 3");
  if (n <= k) throw input_error("normal estimation requires more than k points");

  OrientedPointCloud out;
  out.cloud = cloud;
  out.viewpoint = viewpoint;
  out.normals.resize(n);
  std::vector<std::uint8_t> degenerate(n, 0);

  parallel_for(n, [&](std::size_t idx) {
    const int i = static_cast<int>(idx);
    const std::vector<int> nbr = knn_brute(cloud.points, i, k);
    // covariance over the k neighbors plus the query point
    Eigen::Vector3d mean = cloud.points[i];
    for (int j : nbr) mean += cloud.points[j];
    mean /= static_cast<double>(k + 1);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    {
      const Eigen::Vector3d d = cloud.points[i] - mean;
      cov += d * d.transpose();
    }
    for (int j : nbr) {
      const Eigen::Vector3d d = cloud.points[j] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(k + 1);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    Eigen::Vector3d normal = eig.eigenvectors().col(0);
    const double span = std::max(evals(2), 0.0);
    if (!(evals(1) > span * 1e-12) || span == 0.0) {
      // rank < 2: collinear or coincident neighborhood
      degenerate[idx] = 1;
      const Eigen::Vector3d to_view = viewpoint - cloud.points[i];
      normal = to_view.norm() > 0 ? to_view.normalized() : Eigen::Vector3d::UnitZ();
    } else {
      normal.normalize();
      if (normal.dot(viewpoint - cloud.points[i]) < 0) normal = -normal;
    }
    out.normals[idx] = normal;
  });

  out.degenerate_normals =
      static_cast<int>(std::count(degenerate.begin(), degenerate.end(), 1));
  return out;
}

OrientedPointCloud select(const OrientedPointCloud& cloud,
                          const std::vector<int>& indices) {
  OrientedPointCloud out;
  out.cloud = select(cloud.cloud, indices);
  out.viewpoint = cloud.viewpoint;
  out.degenerate_normals = cloud.degenerate_normals;
  out.normals.reserve(indices.size());
  for (int idx : indices) out.normals.push_back(cloud.normals[idx]);
  return out;
}

OrientedPointCloud apply_rigid(const OrientedPointCloud& cloud,
                               const Eigen::Matrix3d& R,
                               const Eigen::Vector3d& t,
                               const Eigen::Vector3d& center) {
  OrientedPointCloud out = cloud;
  for (auto& p : out.cloud.points) p = R * (p - center) + center + t;
  for (auto& n : out.normals) n = R * n;
  out.viewpoint = R * (cloud.viewpoint - center) + center + t;
  return out;
}

}  // namespace hpppf
