#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hpppf/geomfeat.hpp"
#include "hpppf/pointcloud.hpp"

namespace hpppf {

/// 9DoF target: rotation, translation, per-axis metric size.
struct Pose9 {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d s = Eigen::Vector3d::Ones();

  void validate() const;  // R orthonormal, det +1, s > 0
};

struct TranslationSize {
  Eigen::Vector3d t;
  Eigen::Vector3d s;
  int floored_axes = 0;  // extent components clamped to the 1e-6 m floor
};

/// Centroid translation and axis-aligned extent in the camera frame.
TranslationSize estimate_translation_size(const PointCloud& cloud);

/// p' = (p - t) / |s|_2. Ground-truth t, s during evaluation, estimated ones
/// at inference.
PointCloud normalize(const PointCloud& cloud, const Eigen::Vector3d& t,
                     const Eigen::Vector3d& s);

struct Similarity {
  double scale = 1;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// Closed-form least-squares alignment dst ~ scale*R*src + t, rigid when
/// with_scale is off. Reflections are resolved by the determinant-correction
/// convention; collinear input raises a rank-deficiency error.
Similarity umeyama(const std::vector<Eigen::Vector3d>& src,
                   const std::vector<Eigen::Vector3d>& dst, bool with_scale);

struct Correspondence {
  int query = -1;
  int tmpl = -1;
  double dist = 0;
};

/// Mutual nearest neighbors in feature space passing the best/second-best
/// ratio test. Expects rows already scaled per channel (column_standardize).
std::vector<Correspondence> match_features(const Eigen::MatrixXd& query,
                                           const Eigen::MatrixXd& tmpl,
                                           double ratio);

struct ColumnStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // floored at 1e-12
};

ColumnStats column_stats(const Eigen::MatrixXd& m);
Eigen::MatrixXd column_standardize(const Eigen::MatrixXd& m, const ColumnStats& stats);

/// Object model in canonical pose: bounding-box centered, largest extent 1.
/// Features are computed on the normalize()d copy of the cloud.
struct CanonicalTemplate {
  OrientedPointCloud cloud;      // canonical pose
  HpPpfMatrix features;
  std::optional<Eigen::MatrixXd> semantic;
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // canonical extent

  std::vector<Eigen::Vector3d> normalized_points() const;
  void validate() const;
};

/// Centers an arbitrarily placed cloud, scales the largest extent to 1, and
/// computes hierarchical features in the normalized frame. Normals are
/// re-estimated with the viewpoint at the object center unless
/// use_input_normals is set and the cloud carries them.
CanonicalTemplate build_template(const OrientedPointCloud& raw, const PanelSpec& cuts,
                                 int normal_k = 10, bool use_input_normals = false);

struct RansacConfig {
  int iterations = 1000;
  double epsilon = 0.02;     // inlier distance, normalized units
  int min_inliers = 10;
  double match_ratio = 0.8;  // Lowe-style best/second-best threshold
  std::uint64_t seed = 0;
};

struct RotationEstimate {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();  // residual offset, normalized units
  int inliers = 0;
  int matches = 0;
};

/// Raised when RANSAC cannot reach min_inliers; carries the best attempt.
class estimation_error : public std::runtime_error {
 public:
  estimation_error(const std::string& msg, RotationEstimate best)
      : std::runtime_error(msg), best_attempt(best) {}
  RotationEstimate best_attempt;
};

/// Correspondence RANSAC against the template, refined by rigid umeyama on
/// the inlier set. The query must already be normalize()d and carry features
/// from the same panel configuration as the template.
RotationEstimate estimate_rotation(const OrientedPointCloud& query,
                                   const Eigen::MatrixXd& query_features,
                                   const CanonicalTemplate& tmpl,
                                   const RansacConfig& config);

struct PoseEstimate {
  Pose9 pose;
  double scale = 1;  // similarity scale of the rotation stage (1 = rigid)
  int inliers = 0;
  int matches = 0;
};

/// Full 9DoF recovery: translation/size from centroid/extent (or the given
/// ground truth), normalization, normal re-estimation, feature extraction,
/// rotation RANSAC.
PoseEstimate estimate_pose(const PointCloud& query, const CanonicalTemplate& tmpl,
                           const RansacConfig& config, int normal_k = 10,
                           const std::optional<Eigen::Vector3d>& gt_t = std::nullopt,
                           const std::optional<Eigen::Vector3d>& gt_s = std::nullopt);

}  // namespace hpppf
