#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

namespace hpppf {

/// W x H grid over azimuth x elevation. Bin (u,v) lives at grid row v*W+u;
/// unoccupied bins are all-zero. `winner` records the source point per bin.
struct SphericalFeatureMap {
  int W = 0, H = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::MatrixXd grid;                 // (W*H) x C
  std::vector<std::uint8_t> occupancy;  // W*H, 1 = occupied
  std::vector<int> winner;              // W*H, source point index or -1
  int skipped_at_center = 0;

  int channels() const { return static_cast<int>(grid.cols()); }
  int bin_index(int u, int v) const { return v * W + u; }
};

/// Azimuth/elevation binning with the farthest-point rule: among the points
/// falling in a bin the one with the largest radius from `center` wins
/// (ties to the lowest index). Points exactly at the center are skipped and
/// counted.
SphericalFeatureMap spherical_project(const std::vector<Eigen::Vector3d>& points,
                                      const Eigen::MatrixXd& features, int W,
                                      int H, const Eigen::Vector3d& center);

/// Optional per-stream linear maps (C_out x C_in each) and a final map
/// applied to the concatenation. Absent maps are identity.
struct FusionMaps {
  std::optional<Eigen::MatrixXd> geo;
  std::optional<Eigen::MatrixXd> sem;
  std::optional<Eigen::MatrixXd> color;
  std::optional<Eigen::MatrixXd> final_map;
};

/// Per-bin channel concatenation of the three streams, blocks ordered
/// geometric, semantic, color. All streams must come from the same binning.
struct FusedFeatureMap {
  SphericalFeatureMap map;
  int dim_geo = 0;    // post-map channel widths of each block
  int dim_sem = 0;
  int dim_color = 0;
};

FusedFeatureMap fuse(const SphericalFeatureMap& geo,
                     const SphericalFeatureMap& sem,
                     const SphericalFeatureMap& color,
                     const FusionMaps& maps = {});

}  // namespace hpppf
