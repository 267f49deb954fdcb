#include <CLI11.hpp>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hpppf/errors.hpp"
#include "hpppf/estimator.hpp"
#include "hpppf/fusion.hpp"
#include "hpppf/geomfeat.hpp"
#include "hpppf/io.hpp"
#include "hpppf/metrics.hpp"
#include "hpppf/parallel.hpp"
#include "hpppf/pointcloud.hpp"
#include "hpppf/rng.hpp"
#include "hpppf/robustness.hpp"
#include "hpppf/semfeat.hpp"
#include "hpppf/version.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace hpppf;

std::vector<int> parse_ints(const std::string& csv, const char* what) {
  std::vector<int> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw input_error(std::string(what) + ": bad integer '" + tok + "'");
    }
  }
  if (out.empty()) throw input_error(std::string(what) + ": empty list");
  return out;
}

std::vector<double> parse_doubles(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw input_error(std::string(what) + ": bad number '" + tok + "'");
    }
  }
  if (out.empty()) throw input_error(std::string(what) + ": empty list");
  return out;
}

std::vector<std::string> split_tokens(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

Eigen::Vector3d parse_vec3(const std::string& csv, const char* what) {
  const auto v = parse_doubles(csv, what);
  if (v.size() != 3) throw input_error(std::string(what) + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw input_error("write failed for " + path);
}

void emit_report(const std::string& path, const json& j) {
  if (path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json_file(path, j);
  }
}

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat3_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  }
  return rows;
}

void write_feature_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "csv") {
    write_matrix_csv(path, m);
  } else {
    write_matrix_bin(path, m);
  }
}

struct CommonOpts {
  std::uint64_t seed = 0;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "master random seed (stage seeds derive from it)")
      ->capture_default_str();
  cmd->add_option("--threads", opts.threads,
                  "worker cap; 0 = HPPPF_THREADS or hardware")
      ->capture_default_str();
}

json common_json(const CommonOpts& opts) {
  return json{{"seed", opts.seed}, {"threads", opts.threads}};
}

// two-stage seeded subsample; returns the surviving source-row indices
std::vector<int> staged_sample(PointCloud& cloud, int n1, int n2, std::uint64_t seed) {
  std::vector<int> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto stage = [&](int target, const char* tag) {
    const int n = static_cast<int>(idx.size());
    if (target <= 0 || n <= target) return;
    const auto pick = sample_indices(n, target, CounterRng::derive(seed, tag));
    std::vector<int> next;
    next.reserve(pick.size());
    for (int p : pick) next.push_back(idx[p]);
    idx = std::move(next);
  };
  stage(n1, "sample1");
  stage(n2, "sample2");
  cloud = select(cloud, idx);
  return idx;
}

// ---------------------------------------------------------------- synth ----

struct SynthOpts {
  CommonOpts common;
  std::string kind = "box";
  int n = 2048;
  std::string out;
  std::string report;
};

void cmd_synth(const SynthOpts& o) {
  set_thread_count(o.common.threads);
  const OrientedPointCloud shape =
      make_shape(shape_kind_from_string(o.kind), o.n, o.common.seed);
  const auto dot = o.out.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : o.out.substr(dot + 1);
  if (ext == "csv") {
    write_cloud_csv(o.out, shape.cloud);
  } else {
    write_cloud_ply(o.out, shape.cloud, shape.normals);
  }
  if (!o.report.empty()) {
    json j;
    j["command"] = "synth";
    j["version"] = kVersion;
    j["config"] = common_json(o.common);
    j["config"]["kind"] = o.kind;
    j["config"]["n"] = o.n;
    j["config"]["out"] = o.out;
    j["points"] = shape.size();
    write_json_file(o.report, j);
  }
  std::cout << "synth: wrote " << shape.size() << " points to " << o.out << "\n";
}

// -------------------------------------------------------------- extract ----

struct ExtractOpts {
  CommonOpts common;
  std::string in;
  std::string out;
  std::string cuts = "0,10,60,299";
  int n1 = 2048;
  int n2 = 300;
  int k = 10;
  std::string viewpoint = "0,0,0";
  std::string semantic;
  std::string map_out;
  int W = 32;
  int H = 32;
  std::string report;
};

void cmd_extract(const ExtractOpts& o) {
  set_thread_count(o.common.threads);
  LoadedCloud loaded = read_cloud(o.in);
  const int points_in = loaded.cloud.size();

  std::optional<SemanticFeatureTable> semantic;
  if (!o.semantic.empty()) semantic = load_features(o.semantic, points_in);

  PointCloud cloud = loaded.cloud;
  const std::vector<int> kept = staged_sample(cloud, o.n1, o.n2, o.common.seed);
  if (semantic) {
    Eigen::MatrixXd rows(kept.size(), semantic->dim());
    for (std::size_t r = 0; r < kept.size(); ++r) {
      rows.row(r) = semantic->features.row(kept[r]);
    }
    semantic->features = std::move(rows);
  }

  const Eigen::Vector3d viewpoint = parse_vec3(o.viewpoint, "--viewpoint");
  const OrientedPointCloud oriented = estimate_normals(cloud, o.k, viewpoint);
  const PanelSpec spec = PanelSpec(parse_ints(o.cuts, "--cuts")).adapt(cloud.size());
  const HpPpfMatrix feats = hp_ppf(oriented, spec);
  write_feature_matrix(o.out, feats.features);

  json map_info;
  if (!o.map_out.empty()) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : cloud.points) centroid += p;
    centroid /= cloud.size();

    const auto geo = spherical_project(cloud.points, feats.features, o.W, o.H, centroid);
    Eigen::MatrixXd sem_rows(cloud.size(), semantic ? semantic->dim() : 0);
    if (semantic) sem_rows = semantic->features;
    const auto sem = spherical_project(cloud.points, sem_rows, o.W, o.H, centroid);
    Eigen::MatrixXd color_rows(cloud.size(), cloud.has_colors() ? 3 : 0);
    if (cloud.has_colors()) {
      for (int i = 0; i < cloud.size(); ++i) color_rows.row(i) = cloud.colors[i];
    }
    const auto color = spherical_project(cloud.points, color_rows, o.W, o.H, centroid);
    const FusedFeatureMap fused = fuse(geo, sem, color);
    write_map_bin(o.map_out, fused.map);

    int occupied = 0;
    for (auto b : fused.map.occupancy) occupied += b;
    map_info = {{"path", o.map_out},
                {"W", o.W},
                {"H", o.H},
                {"channels", fused.map.channels()},
                {"dim_geo", fused.dim_geo},
                {"dim_sem", fused.dim_sem},
                {"dim_color", fused.dim_color},
                {"occupied_bins", occupied},
                {"skipped_at_center", fused.map.skipped_at_center}};
  }

  if (!o.report.empty()) {
    json j;
    j["command"] = "extract";
    j["version"] = kVersion;
    j["config"] = common_json(o.common);
    j["config"]["in"] = o.in;
    j["config"]["out"] = o.out;
    j["config"]["cuts"] = o.cuts;
    j["config"]["n1"] = o.n1;
    j["config"]["n2"] = o.n2;
    j["config"]["k"] = o.k;
    j["config"]["viewpoint"] = o.viewpoint;
    j["config"]["semantic"] = o.semantic;
    j["config"]["map"] = o.map_out;
    j["config"]["W"] = o.W;
    j["config"]["H"] = o.H;
    j["points_in"] = points_in;
    j["points_used"] = cloud.size();
    j["degenerate_normals"] = oriented.degenerate_normals;
    j["feature_rows"] = feats.rows();
    j["feature_cols"] = feats.cols();
    if (!map_info.is_null()) j["map"] = map_info;
    write_json_file(o.report, j);
  }
  std::cout << "extract: " << feats.rows() << "x" << feats.cols()
            << " features to " << o.out << "\n";
}

// ----------------------------------------------------------- invariance ----

struct InvarianceOpts {
  CommonOpts common;
  std::string in;
  std::string kind;
  int shape_n = 2048;
  int n = 300;
  int trials = 20;
  double max_deg = 180;
  std::string cuts = "0,10,60,299";
  int k = 10;
  std::vector<std::string> semantic;
  std::string out;
};

void cmd_invariance(const InvarianceOpts& o) {
  set_thread_count(o.common.threads);
  if (o.in.empty() == o.kind.empty()) {
    throw input_error("give exactly one of --in or --kind");
  }
  PointCloud cloud;
  if (!o.in.empty()) {
    cloud = read_cloud(o.in).cloud;
  } else {
    cloud = make_shape(shape_kind_from_string(o.kind), o.shape_n,
                       CounterRng::derive(o.common.seed, "shape"))
                .cloud;
  }
  staged_sample(cloud, 0, o.n, o.common.seed);

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= cloud.size();

  const PanelSpec spec = PanelSpec(parse_ints(o.cuts, "--cuts")).adapt(cloud.size());
  const OrientedPointCloud base = estimate_normals(cloud, o.k, centroid);
  const HpPpfMatrix base_feats = hp_ppf(base, spec);

  const std::uint64_t rot_seed = CounterRng::derive(o.common.seed, "rotate");
  std::vector<double> dev_rigid, dev_recomputed;
  for (int trial = 0; trial < o.trials; ++trial) {
    const Eigen::Matrix3d R =
        random_rotation_matrix(o.max_deg, CounterRng::value_at(rot_seed, trial + 1));
    const OrientedPointCloud rotated =
        apply_rigid(base, R, Eigen::Vector3d::Zero(), centroid);
    const HpPpfMatrix rigid = hp_ppf(rotated, spec);
    dev_rigid.push_back(
        (rigid.features - base_feats.features).cwiseAbs().maxCoeff());

    const OrientedPointCloud fresh =
        estimate_normals(rotated.cloud, o.k, rotated.viewpoint);
    const HpPpfMatrix recomputed = hp_ppf(fresh, spec);
    dev_recomputed.push_back(
        (recomputed.features - base_feats.features).cwiseAbs().maxCoeff());
  }

  json j;
  j["command"] = "invariance";
  j["version"] = kVersion;
  j["config"] = common_json(o.common);
  j["config"]["in"] = o.in;
  j["config"]["kind"] = o.kind;
  j["config"]["shape_n"] = o.shape_n;
  j["config"]["n"] = o.n;
  j["config"]["trials"] = o.trials;
  j["config"]["max_deg"] = o.max_deg;
  j["config"]["cuts"] = o.cuts;
  j["config"]["k"] = o.k;
  j["points"] = cloud.size();
  j["trials"] = o.trials;
  j["max_dev_rigid"] =
      dev_rigid.empty() ? 0.0 : *std::max_element(dev_rigid.begin(), dev_rigid.end());
  j["max_dev_recomputed"] =
      dev_recomputed.empty()
          ? 0.0
          : *std::max_element(dev_recomputed.begin(), dev_recomputed.end());
  j["dev_rigid"] = dev_rigid;
  j["dev_recomputed"] = dev_recomputed;

  if (o.semantic.size() >= 2) {
    std::vector<SemanticFeatureTable> tables;
    for (const auto& path : o.semantic) tables.push_back(load_features(path, -1));
    const ConsistencyReport rep = rotational_consistency(tables);
    j["semantic_consistency"] = {{"tables", o.semantic},
                                 {"cosine_mean", rep.mean},
                                 {"cosine_median", rep.median},
                                 {"cosine_p05", rep.p05},
                                 {"pairs", rep.cosines},
                                 {"zero_rows_excluded", rep.zero_rows_excluded}};
  } else if (o.semantic.size() == 1) {
    throw input_error("semantic consistency needs at least two feature tables");
  }
  emit_report(o.out, j);
}

// ------------------------------------------------------------- estimate ----

struct EstimateOpts {
  CommonOpts common;
  std::string template_path;
  std::string query_path;
  std::string out;
  std::string report;
  std::string cuts = "0,10,60,299";
  int n1 = 2048;
  int n2 = 300;
  int k = 10;
  int iterations = 1000;
  double epsilon = 0.02;
  int min_inliers = 10;
  double ratio = 0.8;
  std::string gt_t;
  std::string gt_s;
};

void write_pose_csv(const std::string& path, double scale, const Eigen::Matrix3d& R,
                    const Eigen::Vector3d& t) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot open " + path + " for writing");
  out << "scale,r00,r01,r02,r10,r11,r12,r20,r21,r22,t0,t1,t2\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << scale;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out << "," << R(r, c);
  }
  for (int a = 0; a < 3; ++a) out << "," << t(a);
  out << "\n";
  if (!out) throw input_error("write failed for " + path);
}

void cmd_estimate(const EstimateOpts& o) {
  set_thread_count(o.common.threads);
  const PanelSpec cuts(parse_ints(o.cuts, "--cuts"));

  PointCloud tmpl_cloud = read_cloud(o.template_path).cloud;
  if (tmpl_cloud.size() > o.n2) {
    tmpl_cloud = sample(tmpl_cloud, o.n2, CounterRng::derive(o.common.seed, "template"));
  }
  OrientedPointCloud tmpl_raw;
  tmpl_raw.cloud = tmpl_cloud;
  const CanonicalTemplate tmpl = build_template(tmpl_raw, cuts, o.k);

  PointCloud query = read_cloud(o.query_path).cloud;
  staged_sample(query, o.n1, o.n2, o.common.seed);

  RansacConfig config;
  config.iterations = o.iterations;
  config.epsilon = o.epsilon;
  config.min_inliers = o.min_inliers;
  config.match_ratio = o.ratio;
  config.seed = CounterRng::derive(o.common.seed, "ransac");

  std::optional<Eigen::Vector3d> gt_t, gt_s;
  if (!o.gt_t.empty()) gt_t = parse_vec3(o.gt_t, "--gt-t");
  if (!o.gt_s.empty()) gt_s = parse_vec3(o.gt_s, "--gt-s");

  const PoseEstimate est = estimate_pose(query, tmpl, config, o.k, gt_t, gt_s);

  if (!o.out.empty()) write_pose_csv(o.out, est.scale, est.pose.R, est.pose.t);
  if (!o.report.empty()) {
    json j;
    j["command"] = "estimate";
    j["version"] = kVersion;
    j["config"] = common_json(o.common);
    j["config"]["template"] = o.template_path;
    j["config"]["query"] = o.query_path;
    j["config"]["out"] = o.out;
    j["config"]["cuts"] = o.cuts;
    j["config"]["n1"] = o.n1;
    j["config"]["n2"] = o.n2;
    j["config"]["k"] = o.k;
    j["config"]["iterations"] = o.iterations;
    j["config"]["epsilon"] = o.epsilon;
    j["config"]["min_inliers"] = o.min_inliers;
    j["config"]["ratio"] = o.ratio;
    j["config"]["gt_t"] = o.gt_t;
    j["config"]["gt_s"] = o.gt_s;
    j["pose"] = {{"R", mat3_json(est.pose.R)},
                 {"t", vec3_json(est.pose.t)},
                 {"s", vec3_json(est.pose.s)}};
    j["scale"] = est.scale;
    j["inliers"] = est.inliers;
    j["matches"] = est.matches;
    write_json_file(o.report, j);
  }
  std::cout << "estimate: " << est.inliers << "/" << est.matches
            << " inliers/matches" << (o.out.empty() ? "" : ", pose to " + o.out)
            << "\n";
}

// ----------------------------------------------------------------- eval ----

struct EvalOpts {
  CommonOpts common;
  std::string in;
  std::string out;
  std::string rot = "5,10";
  std::string trans = "0.02,0.05";
  std::string iou = "0.75";
  std::string symmetry_file;
  double lambda_t = 1.0;
  double lambda_s = 1.0;
};

void cmd_eval(const EvalOpts& o) {
  set_thread_count(o.common.threads);

  std::map<std::string, Symmetry> symmetry;
  if (!o.symmetry_file.empty()) {
    std::ifstream in(o.symmetry_file);
    if (!in) throw input_error("cannot open " + o.symmetry_file);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw input_error(o.symmetry_file + ": " + e.what());
    }
    for (const auto& [cat, val] : j.items()) {
      const std::string s = val.get<std::string>();
      if (s == "none") {
        symmetry[cat] = Symmetry::none;
      } else if (s == "axis_y") {
        symmetry[cat] = Symmetry::axis_y;
      } else {
        throw input_error(o.symmetry_file + ": unknown symmetry '" + s + "'");
      }
    }
  }

  std::ifstream in(o.in);
  if (!in) throw input_error("cannot open " + o.in);
  std::string line;
  if (!std::getline(in, line)) throw input_error(o.in + ": empty file");

  std::vector<PoseErrorRecord> records;
  double total_loss_ts = 0, total_loss_r = 0;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tok = split_tokens(line);
    if (tok.size() != 31) {
      throw input_error(o.in + " row " + std::to_string(row_no) +
                        ": expected category plus 30 numbers");
    }
    std::vector<double> v;
    v.reserve(30);
    for (std::size_t i = 1; i < tok.size(); ++i) {
      try {
        v.push_back(std::stod(tok[i]));
      } catch (const std::exception&) {
        throw input_error(o.in + " row " + std::to_string(row_no) +
                          ": bad number '" + tok[i] + "'");
      }
    }
    auto mat = [&](int off) {
      Eigen::Matrix3d m;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m(r, c) = v[off + 3 * r + c];
      }
      return m;
    };
    auto vec = [&](int off) { return Eigen::Vector3d(v[off], v[off + 1], v[off + 2]); };

    Pose9 pred{mat(0), vec(9), vec(12)};
    Pose9 gt{mat(15), vec(24), vec(27)};
    const auto sym_it = symmetry.find(tok[0]);
    const Symmetry sym = sym_it == symmetry.end() ? Symmetry::none : sym_it->second;

    PoseErrorRecord rec;
    rec.category = tok[0];
    rec.symmetry = sym;
    rec.rot_deg = rotation_error_deg(pred.R, gt.R, sym);
    rec.trans_m = (pred.t - gt.t).norm();
    rec.iou = iou3d(pred, gt);
    records.push_back(rec);

    total_loss_ts += loss_ts(pred.t, gt.t, pred.s, gt.s, o.lambda_t, o.lambda_s);
    total_loss_r += loss_r(pred.R, gt.R);
  }
  if (records.empty()) throw input_error(o.in + ": no records");

  const auto rot_thr = parse_doubles(o.rot, "--rot");
  const auto trans_thr = parse_doubles(o.trans, "--trans");
  const auto iou_thr = parse_doubles(o.iou, "--iou");
  const MetricsReport rep = evaluate_records(records, rot_thr, trans_thr, iou_thr);

  json j;
  j["command"] = "eval";
  j["version"] = kVersion;
  j["config"] = common_json(o.common);
  j["config"]["in"] = o.in;
  j["config"]["rot"] = o.rot;
  j["config"]["trans"] = o.trans;
  j["config"]["iou"] = o.iou;
  j["config"]["symmetry"] = o.symmetry_file;
  j["config"]["lambda_t"] = o.lambda_t;
  j["config"]["lambda_s"] = o.lambda_s;
  j["records"] = rep.records;
  j["categories"] = rep.categories;
  j["skipped_records"] = rep.skipped_records;
  j["map"] = rep.map_at;
  j["map_micro"] = rep.map_at_micro;
  j["iou"] = rep.iou_at;
  j["iou_micro"] = rep.iou_at_micro;
  j["mean_loss_ts"] = total_loss_ts / records.size();
  j["mean_loss_r"] = total_loss_r / records.size();
  emit_report(o.out, j);
}

// ---------------------------------------------------------------- sweep ----

struct SweepOpts {
  CommonOpts common;
  std::string protocol;
  std::string values;
  int trials = 20;
  std::string kind = "lshape";
  int shape_n = 2048;
  int n2 = 300;
  int k = 10;
  std::string cuts = "0,10,60,299";
  int iterations = 1000;
  double epsilon = 0.02;
  int min_inliers = 10;
  double ratio = 0.8;
  bool estimate_normalization = false;
  std::string out;
  std::string report;
};

void cmd_sweep(const SweepOpts& o) {
  set_thread_count(o.common.threads);
  if (o.protocol != "E" && o.protocol != "F" && o.protocol != "G") {
    throw input_error("--protocol must be E (rotation), F (occlusion) or G (jitter)");
  }
  std::string values_csv = o.values;
  if (values_csv.empty()) {
    values_csv = o.protocol == "E"   ? "5,10,15,20"
                 : o.protocol == "F" ? "16,8,4"
                                     : "0.002,0.005,0.01";
  }
  const std::vector<std::string> labels = split_tokens(values_csv);
  const std::vector<double> values = parse_doubles(values_csv, "--values");
  if (o.protocol == "F") {
    for (double v : values) {
      if (v < 1 || v != std::floor(v)) {
        throw input_error("occlusion divisors must be integers >= 1");
      }
    }
  }
  if (o.trials < 1) throw input_error("--trials must be >= 1");

  const PanelSpec cuts(parse_ints(o.cuts, "--cuts"));
  PointCloud shape_cloud =
      make_shape(shape_kind_from_string(o.kind), o.shape_n,
                 CounterRng::derive(o.common.seed, "shape"))
          .cloud;
  if (shape_cloud.size() > o.n2) {
    shape_cloud = sample(shape_cloud, o.n2, CounterRng::derive(o.common.seed, "template"));
  }
  OrientedPointCloud raw;
  raw.cloud = shape_cloud;
  const CanonicalTemplate tmpl = build_template(raw, cuts, o.k);

  const Eigen::Vector3d t0(0, 0, 2);  // keeps z > 0 for the occlusion mask
  const std::uint64_t sweep_seed = CounterRng::derive(o.common.seed, "sweep");

  std::ofstream csv(o.out);
  if (!csv) throw input_error("cannot open " + o.out + " for writing");
  csv << "protocol,parameter,trial,rot_err_deg,trans_err_m,iou\n";
  csv << std::setprecision(std::numeric_limits<double>::max_digits10);

  json per_value = json::array();
  int failures_total = 0;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    std::vector<double> rot_errs;
    int failures = 0;
    for (int trial = 0; trial < o.trials; ++trial) {
      const std::uint64_t tseed =
          CounterRng::value_at(sweep_seed, vi * 100003ULL + trial + 1);
      const double max_deg = o.protocol == "E" ? values[vi] : 180.0;
      const Eigen::Matrix3d R_gt =
          random_rotation_matrix(max_deg, CounterRng::value_at(tseed, 1));

      PointCloud query;
      query.points.reserve(tmpl.cloud.size());
      for (const auto& p : tmpl.cloud.cloud.points) query.points.push_back(R_gt * p + t0);
      if (o.protocol == "F") {
        query = occlude(query, static_cast<int>(values[vi]),
                        CounterRng::value_at(tseed, 2));
      } else if (o.protocol == "G") {
        query = jitter(query, values[vi], CounterRng::value_at(tseed, 3));
      }

      const TranslationSize ts = estimate_translation_size(query);
      RansacConfig config;
      config.iterations = o.iterations;
      config.epsilon = o.epsilon;
      config.min_inliers = o.min_inliers;
      config.match_ratio = o.ratio;
      config.seed = CounterRng::value_at(tseed, 4);

      std::optional<Eigen::Vector3d> gt_t, gt_s;
      if (!o.estimate_normalization) {
        gt_t = t0;
        gt_s = tmpl.size;
      }
      Pose9 pred;
      pred.t = gt_t.value_or(ts.t);
      pred.s = gt_s.value_or(ts.s);
      try {
        pred = estimate_pose(query, tmpl, config, o.k, gt_t, gt_s).pose;
      } catch (const estimation_error& e) {
        pred.R = e.best_attempt.R;  // best attempt still scored below
        ++failures;
      }

      const double rot_err = rotation_error_deg(pred.R, R_gt);
      const double trans_err = (ts.t - t0).norm();
      const Pose9 gt{R_gt, t0, tmpl.size};
      const double iou = iou3d(pred, gt);

      csv << o.protocol << "," << labels[vi] << "," << trial << "," << rot_err
          << "," << trans_err << "," << iou << "\n";
      rot_errs.push_back(rot_err);
    }
    std::sort(rot_errs.begin(), rot_errs.end());
    const std::size_t m = rot_errs.size();
    const double median =
        m % 2 ? rot_errs[m / 2] : 0.5 * (rot_errs[m / 2 - 1] + rot_errs[m / 2]);
    per_value.push_back({{"parameter", labels[vi]},
                         {"median_rot_err_deg", median},
                         {"failures", failures}});
    failures_total += failures;
  }
  if (!csv) throw input_error("write failed for " + o.out);
  csv.close();

  if (!o.report.empty()) {
    json j;
    j["command"] = "sweep";
    j["version"] = kVersion;
    j["config"] = common_json(o.common);
    j["config"]["protocol"] = o.protocol;
    j["config"]["values"] = values_csv;
    j["config"]["trials"] = o.trials;
    j["config"]["kind"] = o.kind;
    j["config"]["shape_n"] = o.shape_n;
    j["config"]["n2"] = o.n2;
    j["config"]["k"] = o.k;
    j["config"]["cuts"] = o.cuts;
    j["config"]["iterations"] = o.iterations;
    j["config"]["epsilon"] = o.epsilon;
    j["config"]["min_inliers"] = o.min_inliers;
    j["config"]["ratio"] = o.ratio;
    j["config"]["estimate_normalization"] = o.estimate_normalization;
    j["config"]["out"] = o.out;
    j["per_value"] = per_value;
    j["failures"] = failures_total;
    write_json_file(o.report, j);
  }
  std::cout << "sweep: " << values.size() << " parameter groups x " << o.trials
            << " trials to " << o.out << " (" << failures_total << " failures)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical point-pair features and 9DoF pose tools"};
  app.set_version_flag("--version", hpppf::kVersion);
  app.require_subcommand(1);

  SynthOpts synth;
  auto* cmd_sy = app.add_subcommand("synth", "generate a synthetic shape cloud");
  add_common(cmd_sy, synth.common);
  cmd_sy->add_option("--kind", synth.kind, "box | lshape | cylinder | blob")
      ->capture_default_str();
  cmd_sy->add_option("--n", synth.n, "surface sample count")->capture_default_str();
  cmd_sy->add_option("--out", synth.out, "output cloud (.ply keeps normals, .csv)")
      ->required();
  cmd_sy->add_option("--report", synth.report, "JSON report path");
  cmd_sy->callback([&] { cmd_synth(synth); });

  ExtractOpts extract;
  auto* cmd_ex = app.add_subcommand("extract", "compute hierarchical pair features");
  add_common(cmd_ex, extract.common);
  cmd_ex->add_option("--in", extract.in, "input cloud (.ply or .csv)")->required();
  cmd_ex->add_option("--out", extract.out, "feature matrix (.bin or .csv)")->required();
  cmd_ex->add_option("--cuts", extract.cuts, "panel rank cuts")->capture_default_str();
  cmd_ex->add_option("--n1", extract.n1, "first-stage sample size")->capture_default_str();
  cmd_ex->add_option("--n2", extract.n2, "second-stage sample size")->capture_default_str();
  cmd_ex->add_option("--k", extract.k, "normal-estimation neighbors")->capture_default_str();
  cmd_ex->add_option("--viewpoint", extract.viewpoint, "normal orientation viewpoint x,y,z")
      ->capture_default_str();
  cmd_ex->add_option("--semantic", extract.semantic,
                     "per-point semantic feature table aligned with --in");
  cmd_ex->add_option("--map", extract.map_out, "fused spherical map output path");
  cmd_ex->add_option("--W", extract.W, "map azimuth bins")->capture_default_str();
  cmd_ex->add_option("--H", extract.H, "map elevation bins")->capture_default_str();
  cmd_ex->add_option("--report", extract.report, "JSON report path");
  cmd_ex->callback([&] { cmd_extract(extract); });

  InvarianceOpts invariance;
  auto* cmd_in = app.add_subcommand("invariance", "audit feature stability under rotation");
  add_common(cmd_in, invariance.common);
  cmd_in->add_option("--in", invariance.in, "input cloud");
  cmd_in->add_option("--kind", invariance.kind, "synthesize this shape instead of --in");
  cmd_in->add_option("--shape-n", invariance.shape_n, "synthetic surface sample count")
      ->capture_default_str();
  cmd_in->add_option("--n", invariance.n, "working sample size (0 = keep all)")
      ->capture_default_str();
  cmd_in->add_option("--trials", invariance.trials, "number of random rotations")
      ->capture_default_str();
  cmd_in->add_option("--max-deg", invariance.max_deg, "rotation angle bound")
      ->capture_default_str();
  cmd_in->add_option("--cuts", invariance.cuts, "panel rank cuts")->capture_default_str();
  cmd_in->add_option("--k", invariance.k, "normal-estimation neighbors")
      ->capture_default_str();
  cmd_in->add_option("--semantic", invariance.semantic,
                     "semantic tables of the same instance under different poses "
                     "(repeatable)");
  cmd_in->add_option("--out", invariance.out, "JSON report path (default stdout)");
  cmd_in->callback([&] { cmd_invariance(invariance); });

  EstimateOpts estimate;
  auto* cmd_es = app.add_subcommand("estimate", "estimate a 9DoF pose against a template");
  add_common(cmd_es, estimate.common);
  cmd_es->add_option("--template", estimate.template_path, "canonical model cloud")
      ->required();
  cmd_es->add_option("--query", estimate.query_path, "observed cloud")->required();
  cmd_es->add_option("--out", estimate.out, "pose CSV output");
  cmd_es->add_option("--report", estimate.report, "JSON report path");
  cmd_es->add_option("--cuts", estimate.cuts, "panel rank cuts")->capture_default_str();
  cmd_es->add_option("--n1", estimate.n1, "first-stage sample size")->capture_default_str();
  cmd_es->add_option("--n2", estimate.n2, "second-stage sample size")->capture_default_str();
  cmd_es->add_option("--k", estimate.k, "normal-estimation neighbors")->capture_default_str();
  cmd_es->add_option("--iters", estimate.iterations, "RANSAC iterations")
      ->capture_default_str();
  cmd_es->add_option("--epsilon", estimate.epsilon, "RANSAC inlier distance")
      ->capture_default_str();
  cmd_es->add_option("--min-inliers", estimate.min_inliers, "minimum inlier count")
      ->capture_default_str();
  cmd_es->add_option("--ratio", estimate.ratio, "match ratio threshold")
      ->capture_default_str();
  cmd_es->add_option("--gt-t", estimate.gt_t, "ground-truth translation x,y,z");
  cmd_es->add_option("--gt-s", estimate.gt_s, "ground-truth size x,y,z");
  cmd_es->callback([&] { cmd_estimate(estimate); });

  EvalOpts eval;
  auto* cmd_ev = app.add_subcommand("eval", "evaluate pose records against thresholds");
  add_common(cmd_ev, eval.common);
  cmd_ev->add_option("--in", eval.in,
                     "records CSV: category,R_pred[9],t_pred[3],s_pred[3],"
                     "R_gt[9],t_gt[3],s_gt[3]")
      ->required();
  cmd_ev->add_option("--out", eval.out, "JSON report path (default stdout)");
  cmd_ev->add_option("--rot", eval.rot, "rotation thresholds, degrees")
      ->capture_default_str();
  cmd_ev->add_option("--trans", eval.trans, "translation thresholds, meters")
      ->capture_default_str();
  cmd_ev->add_option("--iou", eval.iou, "IoU thresholds")->capture_default_str();
  cmd_ev->add_option("--symmetry", eval.symmetry_file,
                     "JSON of category -> none|axis_y");
  cmd_ev->add_option("--lambda-t", eval.lambda_t, "translation loss weight")
      ->capture_default_str();
  cmd_ev->add_option("--lambda-s", eval.lambda_s, "size loss weight")
      ->capture_default_str();
  cmd_ev->callback([&] { cmd_eval(eval); });

  SweepOpts sweep;
  auto* cmd_sw = app.add_subcommand("sweep", "run a robustness protocol sweep");
  add_common(cmd_sw, sweep.common);
  cmd_sw->add_option("--protocol", sweep.protocol,
                     "E = rotation bound, F = occlusion divisor, G = jitter scale")
      ->required();
  cmd_sw->add_option("--values", sweep.values,
                     "parameter list (defaults: E 5,10,15,20; F 16,8,4; "
                     "G 0.002,0.005,0.01)");
  cmd_sw->add_option("--trials", sweep.trials, "trials per parameter value")
      ->capture_default_str();
  cmd_sw->add_option("--kind", sweep.kind, "shape kind")->capture_default_str();
  cmd_sw->add_option("--shape-n", sweep.shape_n, "synthetic surface sample count")
      ->capture_default_str();
  cmd_sw->add_option("--n2", sweep.n2, "working sample size")->capture_default_str();
  cmd_sw->add_option("--k", sweep.k, "normal-estimation neighbors")->capture_default_str();
  cmd_sw->add_option("--cuts", sweep.cuts, "panel rank cuts")->capture_default_str();
  cmd_sw->add_option("--iters", sweep.iterations, "RANSAC iterations")
      ->capture_default_str();
  cmd_sw->add_option("--epsilon", sweep.epsilon, "RANSAC inlier distance")
      ->capture_default_str();
  cmd_sw->add_option("--min-inliers", sweep.min_inliers, "minimum inlier count")
      ->capture_default_str();
  cmd_sw->add_option("--ratio", sweep.ratio, "match ratio threshold")
      ->capture_default_str();
  cmd_sw->add_flag("--estimate-normalization", sweep.estimate_normalization,
                   "normalize with the estimated translation/size instead of "
                   "the ground truth");
  cmd_sw->add_option("--out", sweep.out, "sweep CSV output")->required();
  cmd_sw->add_option("--report", sweep.report, "JSON report path");
  cmd_sw->callback([&] { cmd_sweep(sweep); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const hpppf::estimation_error& e) {
    std::cerr << "estimation failed: " << e.what() << " (best attempt: "
              << e.best_attempt.inliers << " inliers of " << e.best_attempt.matches
              << " matches)\n";
    return 3;
  } catch (const hpppf::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const hpppf::internal_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
