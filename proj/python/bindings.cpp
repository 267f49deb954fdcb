#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <vector>

#include "hpppf/errors.hpp"
#include "hpppf/estimator.hpp"
#include "hpppf/fusion.hpp"
#include "hpppf/geomfeat.hpp"
#include "hpppf/metrics.hpp"
#include "hpppf/parallel.hpp"
#include "hpppf/pointcloud.hpp"
#include "hpppf/rng.hpp"
#include "hpppf/robustness.hpp"
#include "hpppf/version.hpp"

namespace py = pybind11;
using namespace hpppf;

namespace {

std::vector<Eigen::Vector3d> to_points(const Eigen::MatrixXd& m, const char* what) {
  if (m.cols() != 3) {
    throw input_error(std::string(what) + " must be an (n, 3) array");
  }
  std::vector<Eigen::Vector3d> out;
  out.reserve(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i));
  return out;
}

Eigen::MatrixXd from_points(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::MatrixXd m(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(i) = pts[i];
  return m;
}

Symmetry symmetry_from_string(const std::string& s) {
  if (s == "none") return Symmetry::none;
  if (s == "axis_y") return Symmetry::axis_y;
  throw input_error("unknown symmetry '" + s + "' (use none or axis_y)");
}

}  // namespace

PYBIND11_MODULE(_hpppf, m) {
  m.doc() = "hierarchical point-pair features and 9DoF pose estimation";
  m.attr("__version__") = kVersion;

  py::register_exception<input_error>(m, "InputError", PyExc_ValueError);
  py::register_exception<internal_error>(m, "InternalError", PyExc_RuntimeError);
  static py::exception<estimation_error> est_exc(m, "EstimationError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const estimation_error& e) {
      py::set_error(est_exc, e.what());
    }
  });

  m.def("set_thread_count", &set_thread_count, py::arg("threads"),
        "worker cap; 0 = HPPPF_THREADS or hardware");

  m.def(
      "make_shape",
      [](const std::string& kind, int n, std::uint64_t seed) {
        const OrientedPointCloud c = make_shape(shape_kind_from_string(kind), n, seed);
        return py::make_tuple(from_points(c.cloud.points), from_points(c.normals));
      },
      py::arg("kind"), py::arg("n"), py::arg("seed") = 0,
      "surface-sample a canonical shape; returns (points, normals)");

  m.def(
      "estimate_normals",
      [](const Eigen::MatrixXd& points, int k, const Eigen::Vector3d& viewpoint) {
        PointCloud cloud;
        cloud.points = to_points(points, "points");
        const OrientedPointCloud oriented = estimate_normals(cloud, k, viewpoint);
        return py::make_tuple(from_points(oriented.normals),
                              oriented.degenerate_normals);
      },
      py::arg("points"), py::arg("k") = 10,
      py::arg("viewpoint") = Eigen::Vector3d::Zero().eval(),
      "covariance normals oriented toward the viewpoint; returns "
      "(normals, degenerate_count)");

  m.def(
      "compute_ppf",
      [](const Eigen::Vector3d& p_i, const Eigen::Vector3d& n_i,
         const Eigen::Vector3d& p_j, const Eigen::Vector3d& n_j) {
        return compute_ppf(p_i, n_i, p_j, n_j).vec();
      },
      py::arg("p_i"), py::arg("n_i"), py::arg("p_j"), py::arg("n_j"),
      "pair feature [d, alpha, beta, theta]");

  m.def(
      "hp_ppf",
      [](const Eigen::MatrixXd& points, const Eigen::MatrixXd& normals,
         const std::vector<int>& cuts) {
        OrientedPointCloud cloud;
        cloud.cloud.points = to_points(points, "points");
        cloud.normals = to_points(normals, "normals");
        PanelSpec spec = cuts.empty() ? PanelSpec::defaults(cloud.size())
                                      : PanelSpec(cuts).adapt(cloud.size());
        return hp_ppf(cloud, spec).features;
      },
      py::arg("points"), py::arg("normals"),
      py::arg("cuts") = std::vector<int>{},
      "per-point hierarchical panel features, 4 columns per panel");

  m.def(
      "sample_indices",
      [](int cloud_size, int n, std::uint64_t seed) {
        return sample_indices(cloud_size, n, seed);
      },
      py::arg("cloud_size"), py::arg("n"), py::arg("seed") = 0);

  m.def(
      "spherical_project",
      [](const Eigen::MatrixXd& points, const Eigen::MatrixXd& features, int W,
         int H, const Eigen::Vector3d& center) {
        const SphericalFeatureMap map =
            spherical_project(to_points(points, "points"), features, W, H, center);
        py::dict out;
        out["grid"] = map.grid;
        out["occupancy"] = map.occupancy;
        out["winner"] = map.winner;
        out["W"] = map.W;
        out["H"] = map.H;
        out["skipped_at_center"] = map.skipped_at_center;
        return out;
      },
      py::arg("points"), py::arg("features"), py::arg("W") = 32,
      py::arg("H") = 32, py::arg("center") = Eigen::Vector3d::Zero().eval(),
      "azimuth/elevation binning with the farthest-point rule");

  m.def(
      "umeyama",
      [](const Eigen::MatrixXd& src, const Eigen::MatrixXd& dst, bool with_scale) {
        const Similarity sim =
            umeyama(to_points(src, "src"), to_points(dst, "dst"), with_scale);
        return py::make_tuple(sim.scale, sim.R, sim.t);
      },
      py::arg("src"), py::arg("dst"), py::arg("with_scale") = true,
      "closed-form least-squares alignment; returns (scale, R, t)");

  py::class_<CanonicalTemplate>(m, "CanonicalTemplate")
      .def_property_readonly(
          "points", [](const CanonicalTemplate& t) { return from_points(t.cloud.cloud.points); })
      .def_property_readonly(
          "normals", [](const CanonicalTemplate& t) { return from_points(t.cloud.normals); })
      .def_property_readonly(
          "features", [](const CanonicalTemplate& t) { return t.features.features; })
      .def_property_readonly("size", [](const CanonicalTemplate& t) { return t.size; })
      .def_property_readonly(
          "cuts", [](const CanonicalTemplate& t) { return t.features.spec.cuts; });

  m.def(
      "build_template",
      [](const Eigen::MatrixXd& points, const std::vector<int>& cuts, int k) {
        OrientedPointCloud raw;
        raw.cloud.points = to_points(points, "points");
        const PanelSpec spec =
            cuts.empty() ? PanelSpec::defaults(raw.size()) : PanelSpec(cuts);
        return build_template(raw, spec, k);
      },
      py::arg("points"), py::arg("cuts") = std::vector<int>{}, py::arg("k") = 10,
      "canonical template: centered, largest extent 1, features attached");

  m.def(
      "estimate_pose",
      [](const Eigen::MatrixXd& query, const CanonicalTemplate& tmpl,
         std::uint64_t seed, int iterations, double epsilon, int min_inliers,
         double ratio, int k, std::optional<Eigen::Vector3d> gt_t,
         std::optional<Eigen::Vector3d> gt_s) {
        PointCloud cloud;
        cloud.points = to_points(query, "query");
        RansacConfig config;
        config.iterations = iterations;
        config.epsilon = epsilon;
        config.min_inliers = min_inliers;
        config.match_ratio = ratio;
        config.seed = seed;
        const PoseEstimate est = estimate_pose(cloud, tmpl, config, k, gt_t, gt_s);
        py::dict out;
        out["R"] = est.pose.R;
        out["t"] = est.pose.t;
        out["s"] = est.pose.s;
        out["scale"] = est.scale;
        out["inliers"] = est.inliers;
        out["matches"] = est.matches;
        return out;
      },
      py::arg("query"), py::arg("template"), py::arg("seed") = 0,
      py::arg("iterations") = 1000, py::arg("epsilon") = 0.02,
      py::arg("min_inliers") = 10, py::arg("ratio") = 0.8, py::arg("k") = 10,
      py::arg("gt_t") = std::nullopt, py::arg("gt_s") = std::nullopt,
      "full 9DoF recovery against a canonical template");

  m.def(
      "rotation_error_deg",
      [](const Eigen::Matrix3d& R_pred, const Eigen::Matrix3d& R_gt,
         const std::string& symmetry) {
        return rotation_error_deg(R_pred, R_gt, symmetry_from_string(symmetry));
      },
      py::arg("R_pred"), py::arg("R_gt"), py::arg("symmetry") = "none",
      "geodesic rotation error in degrees");

  m.def(
      "iou3d",
      [](const Eigen::Matrix3d& R_a, const Eigen::Vector3d& t_a,
         const Eigen::Vector3d& s_a, const Eigen::Matrix3d& R_b,
         const Eigen::Vector3d& t_b, const Eigen::Vector3d& s_b) {
        return iou3d(Pose9{R_a, t_a, s_a}, Pose9{R_b, t_b, s_b});
      },
      py::arg("R_a"), py::arg("t_a"), py::arg("s_a"), py::arg("R_b"),
      py::arg("t_b"), py::arg("s_b"),
      "exact oriented-box intersection over union");

  m.def(
      "evaluate_records",
      [](const std::vector<double>& rot_deg, const std::vector<double>& trans_m,
         const std::vector<double>& iou, const std::vector<std::string>& category,
         const std::vector<double>& rot_thresholds,
         const std::vector<double>& trans_thresholds,
         const std::vector<double>& iou_thresholds) {
        const std::size_t n = rot_deg.size();
        if (trans_m.size() != n || iou.size() != n || category.size() != n) {
          throw input_error("record columns must have equal lengths");
        }
        std::vector<PoseErrorRecord> records(n);
        for (std::size_t i = 0; i < n; ++i) {
          records[i].rot_deg = rot_deg[i];
          records[i].trans_m = trans_m[i];
          records[i].iou = iou[i];
          records[i].category = category[i];
        }
        const MetricsReport rep = evaluate_records(records, rot_thresholds,
                                                   trans_thresholds, iou_thresholds);
        py::dict out;
        out["map"] = rep.map_at;
        out["map_micro"] = rep.map_at_micro;
        out["iou"] = rep.iou_at;
        out["iou_micro"] = rep.iou_at_micro;
        out["records"] = rep.records;
        out["categories"] = rep.categories;
        out["skipped_records"] = rep.skipped_records;
        return out;
      },
      py::arg("rot_deg"), py::arg("trans_m"), py::arg("iou"), py::arg("category"),
      py::arg("rot_thresholds") = std::vector<double>{5, 10},
      py::arg("trans_thresholds") = std::vector<double>{0.02, 0.05},
      py::arg("iou_thresholds") = std::vector<double>{0.75},
      "threshold-fraction pose metrics over parallel record columns");

  m.def(
      "loss_ts",
      [](const Eigen::Vector3d& t_pred, const Eigen::Vector3d& t_gt,
         const Eigen::Vector3d& s_pred, const Eigen::Vector3d& s_gt,
         double lambda_t, double lambda_s) {
        return loss_ts(t_pred, t_gt, s_pred, s_gt, lambda_t, lambda_s);
      },
      py::arg("t_pred"), py::arg("t_gt"), py::arg("s_pred"), py::arg("s_gt"),
      py::arg("lambda_t") = 1.0, py::arg("lambda_s") = 1.0);

  m.def("loss_r", &loss_r, py::arg("R_pred"), py::arg("R_gt"));

  m.def("random_rotation_matrix", &random_rotation_matrix, py::arg("max_deg"),
        py::arg("seed") = 0);

  m.def(
      "jitter",
      [](const Eigen::MatrixXd& points, double s, std::uint64_t seed) {
        PointCloud cloud;
        cloud.points = to_points(points, "points");
        return from_points(jitter(cloud, s, seed).points);
      },
      py::arg("points"), py::arg("s"), py::arg("seed") = 0,
      "uniform per-coordinate noise scaled by the mean centroid distance");

  m.def(
      "occlude_indices",
      [](const Eigen::MatrixXd& points, int n, std::uint64_t seed) {
        PointCloud cloud;
        cloud.points = to_points(points, "points");
        return occlude_indices(cloud, n, seed);
      },
      py::arg("points"), py::arg("n"), py::arg("seed") = 0,
      "indices surviving a 1/n rectangular image-plane mask");
}
