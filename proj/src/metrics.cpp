#include "hpppf/metrics.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hpppf/errors.hpp"

namespace hpppf {

namespace {

std::string trim_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void check_rotation(const Eigen::Matrix3d& R, const char* name) {
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(R.determinant() - 1.0) > 1e-6) {
    throw input_error(std::string(name) + " is not a rotation matrix");
  }
}

}  // namespace

std::string pose_threshold_key(double rot_deg, double trans_m) {
  return trim_number(rot_deg) + "deg_" + trim_number(trans_m * 100.0) + "cm";
}

std::string iou_threshold_key(double iou) {
  return "IoU_" + trim_number(iou * 100.0);
}

double rotation_error_deg(const Eigen::Matrix3d& R_pred, const Eigen::Matrix3d& R_gt,
                          Symmetry symmetry) {
  check_rotation(R_pred, "R_pred");
  check_rotation(R_gt, "R_gt");
  const Eigen::Matrix3d M = R_gt.transpose() * R_pred;
  double cos_angle;
  if (symmetry == Symmetry::axis_y) {
    // min over phi of geodesic(R_pred, R_gt*Rot_y(phi)):
    // trace(Rot_y(-phi)*M) = m11 + cos(phi)*(m00+m22) + sin(phi)*(m02-m20)
    // maximized at hypot of the two sinusoid coefficients
    cos_angle = (M(1, 1) + std::hypot(M(0, 0) + M(2, 2), M(0, 2) - M(2, 0)) - 1.0) / 2.0;
  } else {
    cos_angle = (M.trace() - 1.0) / 2.0;
  }
  cos_angle = std::clamp(cos_angle, -1.0, 1.0);
  return std::acos(cos_angle) * 180.0 / M_PI;
}

MetricsReport pose_map(const std::vector<PoseErrorRecord>& records,
                       const std::vector<double>& rot_thresholds_deg,
                       const std::vector<double>& trans_thresholds_m) {
  return evaluate_records(records, rot_thresholds_deg, trans_thresholds_m, {});
}

MetricsReport evaluate_records(const std::vector<PoseErrorRecord>& records,
                               const std::vector<double>& rot_thresholds_deg,
                               const std::vector<double>& trans_thresholds_m,
                               const std::vector<double>& iou_thresholds) {
  if (records.empty()) throw input_error("no pose records to evaluate");

  std::vector<const PoseErrorRecord*> kept;
  std::set<std::string> cats;
  int skipped = 0;
  for (const auto& r : records) {
    if (r.category.empty()) {
      ++skipped;
      continue;
    }
    kept.push_back(&r);
    cats.insert(r.category);
  }
  if (kept.empty()) throw input_error("all records skipped (empty category labels)");

  MetricsReport report;
  report.records = static_cast<int>(kept.size());
  report.categories = static_cast<int>(cats.size());
  report.skipped_records = skipped;

  auto macro_micro = [&](const auto& pass) -> std::pair<double, double> {
    std::map<std::string, std::pair<long, long>> per_cat;  // hits, total
    long hits = 0;
    for (const auto* r : kept) {
      auto& [h, t] = per_cat[r->category];
      ++t;
      if (pass(*r)) {
        ++h;
        ++hits;
      }
    }
    double macro = 0;
    for (const auto& [cat, ht] : per_cat) {
      macro += static_cast<double>(ht.first) / ht.second;
    }
    macro /= per_cat.size();
    return {macro, static_cast<double>(hits) / kept.size()};
  };

  for (double rot : rot_thresholds_deg) {
    for (double trans : trans_thresholds_m) {
      const auto [macro, micro] = macro_micro([&](const PoseErrorRecord& r) {
        return r.rot_deg <= rot && r.trans_m <= trans;
      });
      const std::string key = pose_threshold_key(rot, trans);
      report.map_at[key] = macro;
      report.map_at_micro[key] = micro;
    }
  }
  for (double iou : iou_thresholds) {
    const auto [macro, micro] =
        macro_micro([&](const PoseErrorRecord& r) { return r.iou >= iou; });
    const std::string key = iou_threshold_key(iou);
    report.iou_at[key] = macro;
    report.iou_at_micro[key] = micro;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Oriented-box IoU via half-space clipping.
// The intersection of two convex boxes is built by clipping box A's face
// polygons against B's six half-spaces; each clip also emits a cap polygon in
// the cutting plane so the polyhedron stays closed. Volume then follows from
// the divergence theorem over the outward-oriented faces.
// ---------------------------------------------------------------------------
namespace {

using Polygon = std::vector<Eigen::Vector3d>;

struct Plane {
  Eigen::Vector3d n;  // unit outward normal of the kept half-space n.x <= d
  double d;
};

// clip polygon to n.x <= d + eps, appending boundary crossings to `cap`;
// the eps bias keeps faces that lie exactly in a clip plane (coincident
// boxes) instead of dropping them to sign noise and opening the polyhedron
Polygon clip_polygon(const Polygon& poly, const Plane& pl, double eps,
                     std::vector<Eigen::Vector3d>& cap) {
  Polygon out;
  const int n = static_cast<int>(poly.size());
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d& a = poly[i];
    const Eigen::Vector3d& b = poly[(i + 1) % n];
    const double da = pl.n.dot(a) - pl.d;
    const double db = pl.n.dot(b) - pl.d;
    const bool in_a = da <= eps, in_b = db <= eps;
    if (in_a) out.push_back(a);
    if (in_a != in_b) {
      const Eigen::Vector3d x = a + ((da - eps) / (da - db)) * (b - a);
      out.push_back(x);
      cap.push_back(x);
    }
  }
  return out;
}

std::vector<Polygon> box_faces(const Pose9& pose) {
  const Eigen::Vector3d h = pose.s / 2.0;
  auto corner = [&](int sx, int sy, int sz) -> Eigen::Vector3d {
    return pose.R * Eigen::Vector3d(sx * h.x(), sy * h.y(), sz * h.z()) + pose.t;
  };
  const Eigen::Vector3d c000 = corner(-1, -1, -1), c001 = corner(-1, -1, 1);
  const Eigen::Vector3d c010 = corner(-1, 1, -1), c011 = corner(-1, 1, 1);
  const Eigen::Vector3d c100 = corner(1, -1, -1), c101 = corner(1, -1, 1);
  const Eigen::Vector3d c110 = corner(1, 1, -1), c111 = corner(1, 1, 1);
  // outward-oriented (counterclockwise from outside)
  return {
      {c100, c110, c111, c101},  // +x
      {c000, c001, c011, c010},  // -x
      {c010, c011, c111, c110},  // +y
      {c000, c100, c101, c001},  // -y
      {c001, c101, c111, c011},  // +z
      {c000, c010, c110, c100},  // -z
  };
}

std::vector<Plane> box_planes(const Pose9& pose) {
  std::vector<Plane> planes;
  const Eigen::Vector3d h = pose.s / 2.0;
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign : {1, -1}) {
      Plane pl;
      pl.n = sign * pose.R.col(axis);
      pl.d = pl.n.dot(pose.t) + h(axis);
      planes.push_back(pl);
    }
  }
  return planes;
}

double polyhedron_volume(const std::vector<Polygon>& faces) {
  double six_v = 0;
  for (const auto& f : faces) {
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
      six_v += f[0].dot(f[i].cross(f[i + 1]));
    }
  }
  return six_v / 6.0;
}

}  // namespace

double iou3d(const Pose9& pose_a, const Pose9& pose_b) {
  for (const Pose9* p : {&pose_a, &pose_b}) {
    if ((p->R.transpose() * p->R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() >
            1e-9 ||
        std::abs(p->R.determinant() - 1.0) > 1e-9) {
      throw input_error("box rotation is not orthonormal");
    }
    if (!p->t.allFinite() || !p->s.allFinite() || !(p->s.array() >= 0).all()) {
      throw input_error("box translation/size must be finite and nonnegative");
    }
  }
  // zero-volume boxes are legal here and score 0 by definition
  const double va = pose_a.s.prod();
  const double vb = pose_b.s.prod();
  if (va <= 0 || vb <= 0) return 0.0;

  const double eps = 1e-9 * std::max({1.0, pose_a.s.maxCoeff(), pose_b.s.maxCoeff(),
                                      pose_a.t.norm(), pose_b.t.norm()});
  std::vector<Polygon> faces = box_faces(pose_a);
  for (const Plane& pl : box_planes(pose_b)) {
    std::vector<Polygon> next;
    std::vector<Eigen::Vector3d> cap;
    for (const auto& f : faces) {
      Polygon clipped = clip_polygon(f, pl, eps, cap);
      if (clipped.size() >= 3) next.push_back(std::move(clipped));
    }
    if (cap.size() >= 3) {
      // order the cap ring around the plane normal; outward normal is pl.n
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      for (const auto& p : cap) centroid += p;
      centroid /= static_cast<double>(cap.size());
      Eigen::Vector3d ref = Eigen::Vector3d::Zero();
      double spread = 0;
      for (const auto& p : cap) {
        const double r2 = (p - centroid).squaredNorm();
        if (r2 > spread) {
          spread = r2;
          ref = p - centroid;
        }
      }
      if (spread > eps * eps) {
        ref.normalize();
        const Eigen::Vector3d ortho = pl.n.cross(ref);
        std::sort(cap.begin(), cap.end(),
                  [&](const Eigen::Vector3d& p, const Eigen::Vector3d& q) {
                    const Eigen::Vector3d dp = p - centroid, dq = q - centroid;
                    return std::atan2(dp.dot(ortho), dp.dot(ref)) <
                           std::atan2(dq.dot(ortho), dq.dot(ref));
                  });
        next.push_back(std::move(cap));
      }
    }
    faces = std::move(next);
    if (faces.empty()) break;
  }

  const double vi = std::clamp(faces.empty() ? 0.0 : polyhedron_volume(faces), 0.0,
                               std::min(va, vb));
  const double vu = va + vb - vi;
  return vu > 0 ? vi / vu : 0.0;
}

double loss_ts(const Eigen::Vector3d& t_pred, const Eigen::Vector3d& t_gt,
               const Eigen::Vector3d& s_pred, const Eigen::Vector3d& s_gt,
               double lambda_t, double lambda_s) {
  if (lambda_t < 0 || lambda_s < 0) throw input_error("loss weights must be >= 0");
  if (!t_pred.allFinite() || !t_gt.allFinite() || !s_pred.allFinite() || !s_gt.allFinite()) {
    throw input_error("loss inputs must be finite");
  }
  return lambda_t * (t_pred - t_gt).lpNorm<1>() + lambda_s * (s_pred - s_gt).lpNorm<1>();
}

double loss_r(const Eigen::Matrix3d& R_pred, const Eigen::Matrix3d& R_gt) {
  if (!R_pred.allFinite() || !R_gt.allFinite()) {
    throw input_error("loss inputs must be finite");
  }
  return (R_pred - R_gt).cwiseAbs().sum();
}

}  // namespace hpppf
