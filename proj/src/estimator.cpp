#include "hpppf/estimator.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "hpppf/errors.hpp"
#include "hpppf/parallel.hpp"
#include "hpppf/rng.hpp"

namespace hpppf {

void Pose9::validate() const {
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw input_error("pose rotation is not orthonormal");
  }
  if (std::abs(R.determinant() - 1.0) > 1e-9) {
    throw input_error("pose rotation determinant is not +1");
  }
  if (!(s.array() > 0).all()) throw input_error("pose size must be positive");
  if (!t.allFinite() || !s.allFinite()) throw input_error("pose contains non-finite values");
}

TranslationSize estimate_translation_size(const PointCloud& cloud) {
  if (cloud.size() < 2) throw input_error("translation/size needs at least 2 points");
  Eigen::Vector3d lo = cloud.points.front();
  Eigen::Vector3d hi = cloud.points.front();
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    sum += p;
  }
  TranslationSize out;
  out.t = sum / cloud.size();
  out.s = hi - lo;
  for (int a = 0; a < 3; ++a) {
    if (out.s(a) < 1e-6) {
      out.s(a) = 1e-6;
      ++out.floored_axes;
    }
  }
  return out;
}

PointCloud normalize(const PointCloud& cloud, const Eigen::Vector3d& t,
                     const Eigen::Vector3d& s) {
  if (!(s.array() > 0).all()) throw input_error("normalization size must be positive");
  const double inv = 1.0 / s.norm();
  PointCloud out = cloud;
  for (auto& p : out.points) p = (p - t) * inv;
  return out;
}

Similarity umeyama(const std::vector<Eigen::Vector3d>& src,
                   const std::vector<Eigen::Vector3d>& dst, bool with_scale) {
  const int n = static_cast<int>(src.size());
  if (n < 3) throw input_error("umeyama needs at least 3 correspondences");
  if (dst.size() != src.size()) throw input_error("umeyama input lengths differ");

  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_d = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Eigen::Matrix3d sigma = Eigen::Matrix3d::Zero();
  double var_s = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d ps = src[i] - mu_s;
    const Eigen::Vector3d pd = dst[i] - mu_d;
    sigma += pd * ps.transpose();
    var_s += ps.squaredNorm();
  }
  sigma /= n;
  var_s /= n;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();  // decreasing
  if (d(0) == 0 || d(1) <= d(0) * 1e-12) {
    throw input_error("umeyama: rank-deficient (collinear or coincident) correspondences");
  }

  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S(2, 2) = -1;

  Similarity out;
  out.R = svd.matrixU() * S * svd.matrixV().transpose();
  out.scale = with_scale ? (d.dot(S.diagonal())) / var_s : 1.0;
  out.t = mu_d - out.scale * out.R * mu_s;
  return out;
}

ColumnStats column_stats(const Eigen::MatrixXd& m) {
  ColumnStats st;
  st.mean = m.colwise().mean();
  Eigen::MatrixXd centered = m.rowwise() - st.mean.transpose();
  st.stddev = (centered.array().square().colwise().mean()).sqrt();
  st.stddev = st.stddev.cwiseMax(1e-12);
  return st;
}

Eigen::MatrixXd column_standardize(const Eigen::MatrixXd& m, const ColumnStats& stats) {
  if (m.cols() != stats.mean.size()) throw input_error("column stats dimension mismatch");
  Eigen::MatrixXd out = m.rowwise() - stats.mean.transpose();
  out.array().rowwise() /= stats.stddev.transpose().array();
  return out;
}

std::vector<Correspondence> match_features(const Eigen::MatrixXd& query,
                                           const Eigen::MatrixXd& tmpl,
                                           double ratio) {
  if (query.cols() != tmpl.cols()) throw input_error("feature dimensions differ");
  if (ratio <= 0 || ratio > 1) throw input_error("match ratio must lie in (0, 1]");
  const int nq = static_cast<int>(query.rows());
  const int nt = static_cast<int>(tmpl.rows());
  if (nq == 0 || nt == 0) return {};

  // best + second best template row per query row
  std::vector<int> best_t(nq, -1);
  std::vector<double> best_d(nq), second_d(nq);
  parallel_for(nq, [&](std::size_t qi) {
    double b1 = std::numeric_limits<double>::infinity();
    double b2 = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int ti = 0; ti < nt; ++ti) {
      const double dd = (query.row(qi) - tmpl.row(ti)).squaredNorm();
      if (dd < b1) {
        b2 = b1;
        b1 = dd;
        arg = ti;
      } else if (dd < b2) {
        b2 = dd;
      }
    }
    best_t[qi] = arg;
    best_d[qi] = b1;
    second_d[qi] = b2;
  });

  std::vector<int> best_q(nt, -1);
  parallel_for(nt, [&](std::size_t ti) {
    double b1 = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int qi = 0; qi < nq; ++qi) {
      const double dd = (query.row(qi) - tmpl.row(ti)).squaredNorm();
      if (dd < b1) {
        b1 = dd;
        arg = qi;
      }
    }
    best_q[ti] = arg;
  });

  std::vector<Correspondence> out;
  for (int qi = 0; qi < nq; ++qi) {
    const int ti = best_t[qi];
    if (ti < 0 || best_q[ti] != qi) continue;  // not mutual
    if (nt > 1) {
      // ratio on distances, not squared distances
      const double b = std::sqrt(best_d[qi]);
      const double s = std::sqrt(second_d[qi]);
      if (s == 0.0 || b >= ratio * s) continue;  // ambiguous
    }
    out.push_back({qi, ti, std::sqrt(best_d[qi])});
  }
  return out;
}

std::vector<Eigen::Vector3d> CanonicalTemplate::normalized_points() const {
  const double inv = 1.0 / size.norm();
  std::vector<Eigen::Vector3d> out;
  out.reserve(cloud.cloud.points.size());
  for (const auto& p : cloud.cloud.points) out.push_back(p * inv);
  return out;
}

void CanonicalTemplate::validate() const {
  cloud.validate();
  Eigen::Vector3d lo = cloud.cloud.points.front();
  Eigen::Vector3d hi = lo;
  for (const auto& p : cloud.cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if ((lo + hi).cwiseAbs().maxCoeff() > 1e-6) {
    throw input_error("template is not bounding-box centered");
  }
  if (std::abs((hi - lo).maxCoeff() - 1.0) > 1e-6) {
    throw input_error("template largest extent is not 1");
  }
  if (features.rows() != cloud.size()) {
    throw input_error("template features do not match its point count");
  }
}

CanonicalTemplate build_template(const OrientedPointCloud& raw, const PanelSpec& cuts,
                                 int normal_k, bool use_input_normals) {
  if (raw.size() < 2) throw input_error("template needs at least 2 points");
  Eigen::Vector3d lo = raw.cloud.points.front();
  Eigen::Vector3d hi = lo;
  for (const auto& p : raw.cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const double max_extent = (hi - lo).maxCoeff();
  if (max_extent <= 0) throw input_error("template cloud has zero extent");

  CanonicalTemplate tpl;
  tpl.cloud.cloud = raw.cloud;
  for (auto& p : tpl.cloud.cloud.points) p = (p - center) / max_extent;
  tpl.size = (hi - lo) / max_extent;

  if (use_input_normals && raw.normals.size() == raw.cloud.points.size()) {
    tpl.cloud.normals = raw.normals;
    tpl.cloud.viewpoint = (raw.viewpoint - center) / max_extent;
  } else {
    const PointCloud norm_cloud =
        normalize(tpl.cloud.cloud, Eigen::Vector3d::Zero(), tpl.size);
    OrientedPointCloud oriented =
        estimate_normals(norm_cloud, normal_k, Eigen::Vector3d::Zero());
    tpl.cloud.normals = oriented.normals;
    tpl.cloud.viewpoint = Eigen::Vector3d::Zero();
    tpl.cloud.degenerate_normals = oriented.degenerate_normals;
  }

  OrientedPointCloud match_frame;
  match_frame.cloud = normalize(tpl.cloud.cloud, Eigen::Vector3d::Zero(), tpl.size);
  match_frame.normals = tpl.cloud.normals;
  tpl.features = hp_ppf(match_frame, cuts.adapt(raw.size()));
  return tpl;
}

namespace {

struct RansacModel {
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
  int inliers = 0;
  bool valid = false;
};

int count_inliers(const std::vector<Eigen::Vector3d>& qpts,
                  const std::vector<Eigen::Vector3d>& tpts,
                  const std::vector<Correspondence>& corr,
                  const Eigen::Matrix3d& R, const Eigen::Vector3d& t,
                  double eps, std::vector<int>* members = nullptr) {
  int count = 0;
  for (std::size_t c = 0; c < corr.size(); ++c) {
    const double err = (qpts[corr[c].query] - (R * tpts[corr[c].tmpl] + t)).norm();
    if (err <= eps) {
      ++count;
      if (members) members->push_back(static_cast<int>(c));
    }
  }
  return count;
}

}  // namespace

RotationEstimate estimate_rotation(const OrientedPointCloud& query,
                                   const Eigen::MatrixXd& query_features,
                                   const CanonicalTemplate& tmpl,
                                   const RansacConfig& config) {
  if (query.size() != query_features.rows()) {
    throw input_error("query features do not match query point count");
  }
  if (query_features.cols() != tmpl.features.cols()) {
    throw input_error("query and template feature dimensions differ (check panel cuts)");
  }

  const ColumnStats stats = column_stats(tmpl.features.features);
  const Eigen::MatrixXd qf = column_standardize(query_features, stats);
  const Eigen::MatrixXd tf = column_standardize(tmpl.features.features, stats);
  const std::vector<Correspondence> corr = match_features(qf, tf, config.match_ratio);

  RotationEstimate best;
  best.matches = static_cast<int>(corr.size());
  if (corr.size() < 3) {
    throw estimation_error("too few feature matches (" + std::to_string(corr.size()) + ")",
                           best);
  }

  const std::vector<Eigen::Vector3d> tpts = tmpl.normalized_points();
  const std::vector<Eigen::Vector3d>& qpts = query.cloud.points;
  const int nc = static_cast<int>(corr.size());

  // per-iteration seeds keep the search schedule-independent
  std::vector<int> scores(config.iterations, -1);
  std::vector<Eigen::Matrix3d> rots(config.iterations);
  std::vector<Eigen::Vector3d> shifts(config.iterations);
  parallel_for(config.iterations, [&](std::size_t it) {
    CounterRng rng(CounterRng::value_at(config.seed, it + 1));
    int a = static_cast<int>(rng.next_index(nc));
    int b = static_cast<int>(rng.next_index(nc));
    int c = static_cast<int>(rng.next_index(nc));
    if (a == b || a == c || b == c) return;  // skip degenerate draw
    std::vector<Eigen::Vector3d> src{tpts[corr[a].tmpl], tpts[corr[b].tmpl], tpts[corr[c].tmpl]};
    std::vector<Eigen::Vector3d> dst{qpts[corr[a].query], qpts[corr[b].query], qpts[corr[c].query]};
    Similarity model;
    try {
      model = umeyama(src, dst, false);
    } catch (const input_error&) {
      return;  // collinear minimal sample
    }
    scores[it] = count_inliers(qpts, tpts, corr, model.R, model.t, config.epsilon);
    rots[it] = model.R;
    shifts[it] = model.t;
  });

  int best_iter = -1;
  for (int it = 0; it < config.iterations; ++it) {
    if (scores[it] > (best_iter < 0 ? -1 : scores[best_iter])) best_iter = it;
  }
  if (best_iter < 0) {
    throw estimation_error("RANSAC found no valid minimal sample", best);
  }
  best.R = rots[best_iter];
  best.t = shifts[best_iter];
  best.inliers = scores[best_iter];

  // refine on the inlier set; two fixed rounds keep the result deterministic
  for (int round = 0; round < 2; ++round) {
    std::vector<int> members;
    count_inliers(qpts, tpts, corr, best.R, best.t, config.epsilon, &members);
    if (members.size() < 3) break;
    std::vector<Eigen::Vector3d> src, dst;
    src.reserve(members.size());
    dst.reserve(members.size());
    for (int c : members) {
      src.push_back(tpts[corr[c].tmpl]);
      dst.push_back(qpts[corr[c].query]);
    }
    Similarity refined;
    try {
      refined = umeyama(src, dst, false);
    } catch (const input_error&) {
      break;
    }
    best.R = refined.R;
    best.t = refined.t;
    best.inliers = count_inliers(qpts, tpts, corr, best.R, best.t, config.epsilon);
  }

  if (best.inliers < config.min_inliers) {
    throw estimation_error("only " + std::to_string(best.inliers) +
                               " inliers, need " + std::to_string(config.min_inliers),
                           best);
  }
  return best;
}

PoseEstimate estimate_pose(const PointCloud& query, const CanonicalTemplate& tmpl,
                           const RansacConfig& config, int normal_k,
                           const std::optional<Eigen::Vector3d>& gt_t,
                           const std::optional<Eigen::Vector3d>& gt_s) {
  const TranslationSize ts = estimate_translation_size(query);
  const Eigen::Vector3d t = gt_t.value_or(ts.t);
  const Eigen::Vector3d s = gt_s.value_or(ts.s);

  // orient normals from the same physical point as the template (its
  // canonical origin is the bounding-box center); with ground truth given
  // that point is t itself
  Eigen::Vector3d origin_proxy = t;
  if (!gt_t) {
    Eigen::Vector3d lo = query.points.front(), hi = query.points.front();
    for (const auto& p : query.points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    origin_proxy = 0.5 * (lo + hi);
  }
  const PointCloud norm = normalize(query, t, s);
  const OrientedPointCloud oriented =
      estimate_normals(norm, normal_k, (origin_proxy - t) / s.norm());
  const HpPpfMatrix feats = hp_ppf(oriented, tmpl.features.spec.adapt(oriented.size()));

  const RotationEstimate rot = estimate_rotation(oriented, feats.features, tmpl, config);

  PoseEstimate out;
  out.pose.R = rot.R;
  out.pose.t = t;
  out.pose.s = s;
  out.scale = 1.0;
  out.inliers = rot.inliers;
  out.matches = rot.matches;
  return out;
}

}  // namespace hpppf
