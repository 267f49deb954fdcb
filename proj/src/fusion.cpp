#include "hpppf/fusion.hpp"

#include <cmath>
#include <string>

#include "hpppf/errors.hpp"

namespace hpppf {

SphericalFeatureMap spherical_project(const std::vector<Eigen::Vector3d>& points,
                                      const Eigen::MatrixXd& features, int W,
                                      int H, const Eigen::Vector3d& center) {
  if (W < 1 || H < 1) throw input_error("spherical map needs W, H >= 1");
  const int n = static_cast<int>(points.size());
  if (features.rows() != n) {
    throw input_error("feature rows (" + std::to_string(features.rows()) +
                      ") do not match point count (" + std::to_string(n) + ")");
  }

  SphericalFeatureMap map;
  map.W = W;
  map.H = H;
  map.center = center;
  map.grid = Eigen::MatrixXd::Zero(W * H, features.cols());
  map.occupancy.assign(static_cast<std::size_t>(W) * H, 0);
  map.winner.assign(static_cast<std::size_t>(W) * H, -1);

  std::vector<double> best_r(static_cast<std::size_t>(W) * H, -1.0);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d q = points[i] - center;
    const double r = q.norm();
    if (r == 0) {
      ++map.skipped_at_center;
      continue;
    }
    double phi = std::atan2(q.y(), q.x());
    if (phi == M_PI) phi = -M_PI;  // azimuth lives in [-pi, pi)
    const double theta = std::acos(std::clamp(q.z() / r, -1.0, 1.0));
    const int u = std::min(static_cast<int>((phi + M_PI) / (2.0 * M_PI) * W), W - 1);
    const int v = std::min(static_cast<int>(theta / M_PI * H), H - 1);
    const int b = map.bin_index(u, v);
    if (r > best_r[b]) {  // strict: ties keep the earlier point
      best_r[b] = r;
      map.winner[b] = i;
    }
  }
  for (std::size_t b = 0; b < map.winner.size(); ++b) {
    if (map.winner[b] >= 0) {
      map.occupancy[b] = 1;
      map.grid.row(static_cast<int>(b)) = features.row(map.winner[b]);
    }
  }
  return map;
}

namespace {

Eigen::MatrixXd apply_stream_map(const SphericalFeatureMap& in,
                                 const std::optional<Eigen::MatrixXd>& lin) {
  if (!lin) return in.grid;
  if (lin->cols() != in.grid.cols()) {
    throw input_error("stream map expects " + std::to_string(lin->cols()) +
                      " channels, stream has " + std::to_string(in.grid.cols()));
  }
  return in.grid * lin->transpose();
}

void check_aligned(const SphericalFeatureMap& a, const SphericalFeatureMap& b,
                   const char* name) {
  if (a.W != b.W || a.H != b.H) throw input_error(std::string(name) + " stream has mismatched bin counts");
  if ((a.center - b.center).norm() != 0) throw input_error(std::string(name) + " stream has a different center");
  if (a.occupancy != b.occupancy) {
    throw input_error(std::string(name) + " stream occupancy differs: streams were not binned from the same cloud");
  }
}

}  // namespace

FusedFeatureMap fuse(const SphericalFeatureMap& geo,
                     const SphericalFeatureMap& sem,
                     const SphericalFeatureMap& color, const FusionMaps& maps) {
  check_aligned(geo, sem, "semantic");
  check_aligned(geo, color, "color");

  const Eigen::MatrixXd g = apply_stream_map(geo, maps.geo);
  const Eigen::MatrixXd s = apply_stream_map(sem, maps.sem);
  const Eigen::MatrixXd c = apply_stream_map(color, maps.color);

  FusedFeatureMap out;
  out.dim_geo = static_cast<int>(g.cols());
  out.dim_sem = static_cast<int>(s.cols());
  out.dim_color = static_cast<int>(c.cols());
  out.map.W = geo.W;
  out.map.H = geo.H;
  out.map.center = geo.center;
  out.map.occupancy = geo.occupancy;
  out.map.winner = geo.winner;
  out.map.skipped_at_center = geo.skipped_at_center;

  Eigen::MatrixXd cat(g.rows(), g.cols() + s.cols() + c.cols());
  cat << g, s, c;
  if (maps.final_map) {
    if (maps.final_map->cols() != cat.cols()) {
      throw input_error("final fusion map expects " + std::to_string(maps.final_map->cols()) +
                        " channels, concatenation has " + std::to_string(cat.cols()));
    }
    cat = cat * maps.final_map->transpose();
  }
  out.map.grid = std::move(cat);
  return out;
}

}  // namespace hpppf
