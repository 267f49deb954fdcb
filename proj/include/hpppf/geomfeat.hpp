#pragma once

#include <Eigen/Core>
#include <vector>

#include "hpppf/pointcloud.hpp"

namespace hpppf {

/// Point pair feature: distance plus the three pair angles, radians in [0, pi].
struct Ppf {
  double d = 0;
  double alpha = 0;
  double beta = 0;
  double theta = 0;

  Eigen::Vector4d vec() const { return {d, alpha, beta, theta}; }
};

/// Distance-rank cut sequence (k_0, ..., k_l): k_0 = 0, k_l = n-1, strictly
/// increasing. Panel m covers ranks in (k_{m-1}, k_m].
struct PanelSpec {
  std::vector<int> cuts;

  PanelSpec() = default;
  explicit PanelSpec(std::vector<int> c) : cuts(std::move(c)) {}

  int panels() const { return static_cast<int>(cuts.size()) - 1; }
  void validate(int cloud_size) const;

  /// Default local-to-global cuts (0, 10, 60, n-1), inner cuts clamped and
  /// deduplicated so the sequence stays strictly increasing for any n >= 2.
  static PanelSpec defaults(int cloud_size);

  /// Re-target configured cuts to a cloud of a different size.
  PanelSpec adapt(int cloud_size) const;
};

/// Per-point hierarchical features, one row per point, 4 columns per panel
/// (d, alpha, beta, theta panel means in panel order).
struct HpPpfMatrix {
  Eigen::MatrixXd features;
  PanelSpec spec;

  int rows() const { return static_cast<int>(features.rows()); }
  int cols() const { return static_cast<int>(features.cols()); }
};

/// Pairwise feature between two oriented points. Angles are evaluated as
/// atan2(|u x v|, u.v), which stays accurate near 0 and pi.
Ppf compute_ppf(const Eigen::Vector3d& p_i, const Eigen::Vector3d& n_i,
                const Eigen::Vector3d& p_j, const Eigen::Vector3d& n_j);

/// 1-based distance ranks of every j != i (entry i itself is 0).
/// Equal distances rank by ascending index.
std::vector<int> distance_ranks(const std::vector<Eigen::Vector3d>& points, int i);

/// Mean PPF between point i and every panel member, accumulated in ascending
/// index order.
Eigen::Vector4d panel_feature(const OrientedPointCloud& cloud, int i,
                              const std::vector<int>& panel);

/// Hierarchical panel features for every point.
HpPpfMatrix hp_ppf(const OrientedPointCloud& cloud, const PanelSpec& spec);

/// Single-panel baseline: mean PPF over the k nearest neighbors of each point.
Eigen::MatrixXd knn_panel_feature(const OrientedPointCloud& cloud, int k);

}  // namespace hpppf
