#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "hpppf/estimator.hpp"

namespace hpppf {

enum class Symmetry { none, axis_y };

struct PoseErrorRecord {
  double rot_deg = 0;   // [0, 180]
  double trans_m = 0;
  double iou = 0;       // [0, 1]
  std::string category;
  Symmetry symmetry = Symmetry::none;
};

struct MetricsReport {
  // keys mirror the usual table headers, e.g. "5deg_2cm", "IoU_75"
  std::map<std::string, double> map_at;        // per-category macro average
  std::map<std::string, double> map_at_micro;  // per-record average
  std::map<std::string, double> iou_at;
  std::map<std::string, double> iou_at_micro;
  int records = 0;
  int categories = 0;
  int skipped_records = 0;  // records with an empty category label
};

std::string pose_threshold_key(double rot_deg, double trans_m);
std::string iou_threshold_key(double iou);

/// Geodesic rotation error in degrees. axis_y takes the minimum over all
/// rotations about the template y-axis, in closed form.
double rotation_error_deg(const Eigen::Matrix3d& R_pred, const Eigen::Matrix3d& R_gt,
                          Symmetry symmetry = Symmetry::none);

/// Fraction of records within each (rot, trans) threshold pair; inclusive
/// comparison, macro-averaged over categories with the micro average kept
/// alongside.
MetricsReport pose_map(const std::vector<PoseErrorRecord>& records,
                       const std::vector<double>& rot_thresholds_deg,
                       const std::vector<double>& trans_thresholds_m);

/// pose_map plus IoU-at-threshold fractions in one report.
MetricsReport evaluate_records(const std::vector<PoseErrorRecord>& records,
                               const std::vector<double>& rot_thresholds_deg,
                               const std::vector<double>& trans_thresholds_m,
                               const std::vector<double>& iou_thresholds);

/// Exact IoU of the two size-scaled oriented boxes, intersection volume by
/// convex polytope clipping.
double iou3d(const Pose9& pose_a, const Pose9& pose_b);

/// L1 translation/size loss: lambda_t*|t_pred-t_gt|_1 + lambda_s*|s_pred-s_gt|_1.
double loss_ts(const Eigen::Vector3d& t_pred, const Eigen::Vector3d& t_gt,
               const Eigen::Vector3d& s_pred, const Eigen::Vector3d& s_gt,
               double lambda_t, double lambda_s);

/// Element-wise L1 over the 9 matrix entries; inputs need not be rotations.
double loss_r(const Eigen::Matrix3d& R_pred, const Eigen::Matrix3d& R_gt);

}  // namespace hpppf
