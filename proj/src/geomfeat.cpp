#include "hpppf/geomfeat.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <string>

#include "hpppf/errors.hpp"
#include "hpppf/parallel.hpp"

namespace hpppf {

void PanelSpec::validate(int cloud_size) const {
  if (cuts.size() < 2) throw input_error("panel spec needs at least two cuts");
  if (cuts.front() != 0) throw input_error("panel spec must start at 0");
  for (std::size_t m = 1; m < cuts.size(); ++m) {
    if (cuts[m] <= cuts[m - 1]) throw input_error("panel cuts must be strictly increasing");
  }
  if (cuts.back() != cloud_size - 1) {
    throw input_error("last panel cut is " + std::to_string(cuts.back()) +
                      " but cloud of " + std::to_string(cloud_size) +
                      " points requires " + std::to_string(cloud_size - 1));
  }
}

PanelSpec PanelSpec::defaults(int cloud_size) {
  return PanelSpec({0, 10, 60, 299}).adapt(cloud_size);
}

PanelSpec PanelSpec::adapt(int cloud_size) const {
  if (cloud_size < 2) throw input_error("panel spec requires at least 2 points");
  PanelSpec out;
  out.cuts.push_back(0);
  for (std::size_t m = 1; m + 1 < cuts.size(); ++m) {
    const int c = std::min(cuts[m], cloud_size - 2);
    if (c > out.cuts.back()) out.cuts.push_back(c);
  }
  out.cuts.push_back(cloud_size - 1);
  return out;
}

namespace {

double pair_angle(const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

}  // namespace

Ppf compute_ppf(const Eigen::Vector3d& p_i, const Eigen::Vector3d& n_i,
                const Eigen::Vector3d& p_j, const Eigen::Vector3d& n_j) {
  const Eigen::Vector3d delta = p_j - p_i;
  const double d = delta.norm();
  if (d == 0) throw input_error("PPF undefined for coincident points");
  Ppf f;
  f.d = d;
  f.alpha = pair_angle(n_i, delta);
  f.beta = pair_angle(n_j, delta);
  f.theta = pair_angle(n_j, n_i);
  return f;
}

std::vector<int> distance_ranks(const std::vector<Eigen::Vector3d>& points, int i) {
  const int n = static_cast<int>(points.size());
  if (n < 2) throw input_error("distance ranks need at least 2 points");
  if (i < 0 || i >= n) throw input_error("rank query index out of range");

  // argsort of (squared distance, index); squared distances order identically
  // to distances and avoid sqrt rounding collisions
  std::vector<std::pair<double, int>> order;
  order.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    order.emplace_back((points[j] - points[i]).squaredNorm(), j);
  }
  std::sort(order.begin(), order.end());

  std::vector<int> ranks(n, 0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    ranks[order[r].second] = static_cast<int>(r) + 1;
  }
  return ranks;
}

Eigen::Vector4d panel_feature(const OrientedPointCloud& cloud, int i,
                              const std::vector<int>& panel) {
  if (panel.empty()) throw input_error("panel feature over an empty panel");
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  for (int j : panel) {
    if (j == i) throw input_error("panel may not contain the query point");
    sum += compute_ppf(cloud.cloud.points[i], cloud.normals[i],
                       cloud.cloud.points[j], cloud.normals[j])
               .vec();
  }
  return sum / static_cast<double>(panel.size());
}

HpPpfMatrix hp_ppf(const OrientedPointCloud& cloud, const PanelSpec& spec) {
  const int n = cloud.size();
  if (n < 2) throw input_error("hierarchical features need at least 2 points");
  if (static_cast<int>(cloud.normals.size()) != n) {
    throw input_error("cloud is missing normals");
  }
  spec.validate(n);
  const int l = spec.panels();

  HpPpfMatrix out;
  out.spec = spec;
  out.features.resize(n, 4 * l);

  parallel_for(n, [&](std::size_t idx) {
    const int i = static_cast<int>(idx);
    const std::vector<int> ranks = distance_ranks(cloud.cloud.points, i);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(4, l);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(l);
    // ascending j keeps panel sums in index order
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const int r = ranks[j];
      const int m = static_cast<int>(std::upper_bound(spec.cuts.begin() + 1,
                                                      spec.cuts.end() - 1, r - 1) -
                                     (spec.cuts.begin() + 1));
      sums.col(m) += compute_ppf(cloud.cloud.points[i], cloud.normals[i],
                                 cloud.cloud.points[j], cloud.normals[j])
                         .vec();
      counts(m) += 1;
    }
    for (int m = 0; m < l; ++m) {
      if (counts(m) == 0) {
        throw internal_error("panel " + std::to_string(m) + " is empty");
      }
      out.features.block<1, 4>(i, 4 * m) = (sums.col(m) / counts(m)).transpose();
    }
  });
  return out;
}

Eigen::MatrixXd knn_panel_feature(const OrientedPointCloud& cloud, int k) {
  const int n = cloud.size();
  if (k < 1) throw input_error("knn panel needs k >= 1");
  if (n <= k) throw input_error("knn panel needs more than k points");

  Eigen::MatrixXd out(n, 4);
  parallel_for(n, [&](std::size_t idx) {
    const int i = static_cast<int>(idx);
    const std::vector<int> ranks = distance_ranks(cloud.cloud.points, i);
    std::vector<int> panel;
    panel.reserve(k);
    for (int j = 0; j < n; ++j) {
      if (j != i && ranks[j] <= k) panel.push_back(j);
    }
    out.row(i) = panel_feature(cloud, i, panel).transpose();
  });
  return out;
}

}  // namespace hpppf
