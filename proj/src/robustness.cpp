#include "hpppf/robustness.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include "hpppf/errors.hpp"
#include "hpppf/rng.hpp"

namespace hpppf {

Eigen::Matrix3d random_rotation_matrix(double max_deg, std::uint64_t seed) {
  if (max_deg < 0 || max_deg > 180) {
    throw input_error("rotation bound must lie in [0, 180] degrees");
  }
  CounterRng rng(seed);
  // axis uniform on the sphere via z in [-1,1), azimuth in [0,2pi)
  const double z = 1.0 - 2.0 * rng.next_double();
  const double phi = 2.0 * M_PI * rng.next_double();
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Eigen::Vector3d axis(rho * std::cos(phi), rho * std::sin(phi), z);
  const double angle = rng.next_double() * max_deg * M_PI / 180.0;
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

std::pair<PointCloud, Eigen::Matrix3d> random_rotate(const PointCloud& cloud,
                                                     double max_deg,
                                                     std::uint64_t seed,
                                                     bool about_origin) {
  const Eigen::Matrix3d R = random_rotation_matrix(max_deg, seed);
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  if (!about_origin) {
    for (const auto& p : cloud.points) center += p;
    if (!cloud.points.empty()) center /= cloud.size();
  }
  PointCloud out = cloud;
  for (auto& p : out.points) p = R * (p - center) + center;
  return {std::move(out), R};
}

std::vector<int> occlude_indices(const PointCloud& cloud, int n, std::uint64_t seed) {
  if (n < 1) throw input_error("occlusion divisor must be >= 1");
  if (cloud.size() == 0) throw input_error("cannot occlude an empty cloud");
  for (const auto& p : cloud.points) {
    if (p.z() <= 0) throw input_error("occlusion needs z > 0 for image-plane projection");
  }

  // project to the image plane and take the silhouette bounding box
  std::vector<Eigen::Vector2d> proj(cloud.size());
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (int i = 0; i < cloud.size(); ++i) {
    proj[i] = {cloud.points[i].x() / cloud.points[i].z(),
               cloud.points[i].y() / cloud.points[i].z()};
    lo = lo.cwiseMin(proj[i]);
    hi = hi.cwiseMax(proj[i]);
  }
  const Eigen::Vector2d half = (hi - lo) / (2.0 * n);

  CounterRng rng(seed);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const Eigen::Vector2d center = proj[rng.next_index(cloud.size())];
    std::vector<int> kept;
    kept.reserve(cloud.size());
    for (int i = 0; i < cloud.size(); ++i) {
      const Eigen::Vector2d d = (proj[i] - center).cwiseAbs();
      if (d.x() <= half.x() && d.y() <= half.y()) continue;  // masked out
      kept.push_back(i);
    }
    if (kept.size() * 10 >= static_cast<std::size_t>(cloud.size())) return kept;
  }
  throw input_error("occlusion mask would remove more than 90% of points (10 retries)");
}

PointCloud occlude(const PointCloud& cloud, int n, std::uint64_t seed) {
  return select(cloud, occlude_indices(cloud, n, seed));
}

PointCloud jitter(const PointCloud& cloud, double s, std::uint64_t seed) {
  if (s < 0) throw input_error("jitter scale must be >= 0");
  if (s == 0) return cloud;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) centroid += p;
  if (!cloud.points.empty()) centroid /= cloud.size();
  double r = 0;
  for (const auto& p : cloud.points) r += (p - centroid).norm();
  r /= cloud.size();

  const double bound = 0.5 * s * r;
  CounterRng rng(seed);
  PointCloud out = cloud;
  for (auto& p : out.points) {
    for (int a = 0; a < 3; ++a) p(a) += rng.next_range(-bound, bound);
  }
  return out;
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "box") return ShapeKind::box;
  if (name == "lshape") return ShapeKind::lshape;
  if (name == "cylinder") return ShapeKind::cylinder;
  if (name == "blob") return ShapeKind::blob;
  throw input_error("unknown shape kind: " + name);
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::box: return "box";
    case ShapeKind::lshape: return "lshape";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::blob: return "blob";
  }
  return "?";
}

namespace {

struct Surface {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;
};

struct Face {
  Eigen::Vector3d origin;  // one corner
  Eigen::Vector3d edge_u, edge_v;
  Eigen::Vector3d normal;
  double area() const { return edge_u.cross(edge_v).norm(); }
};

std::vector<Face> cuboid_faces(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  const Eigen::Vector3d e = hi - lo;
  const Eigen::Vector3d ex(e.x(), 0, 0), ey(0, e.y(), 0), ez(0, 0, e.z());
  return {
      {lo + ex, ey, ez, Eigen::Vector3d::UnitX()},
      {lo, ez, ey, -Eigen::Vector3d::UnitX()},
      {lo + ey, ez, ex, Eigen::Vector3d::UnitY()},
      {lo, ex, ez, -Eigen::Vector3d::UnitY()},
      {lo + ez, ex, ey, Eigen::Vector3d::UnitZ()},
      {lo, ey, ex, -Eigen::Vector3d::UnitZ()},
  };
}

// largest-remainder split of n samples proportional to weights
std::vector<int> allocate_counts(const std::vector<double>& weights, int n) {
  double total = 0;
  for (double w : weights) total += w;
  std::vector<int> counts(weights.size(), 0);
  std::vector<std::pair<double, int>> rema;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = n * weights[i] / total;
    counts[i] = static_cast<int>(exact);
    assigned += counts[i];
    rema.emplace_back(-(exact - counts[i]), static_cast<int>(i));
  }
  std::sort(rema.begin(), rema.end());
  for (int i = 0; assigned < n; ++i, ++assigned) counts[rema[i % rema.size()].second] += 1;
  return counts;
}

Surface sample_faces(const std::vector<Face>& faces, int n, CounterRng& rng,
                     const std::function<bool(const Eigen::Vector3d&)>& reject = {}) {
  std::vector<double> areas;
  for (const auto& f : faces) areas.push_back(f.area());
  const std::vector<int> counts = allocate_counts(areas, n);
  Surface out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const Face& f = faces[fi];
    int placed = 0;
    int guard = 0;
    while (placed < counts[fi] && guard < counts[fi] * 100 + 1000) {
      ++guard;
      const Eigen::Vector3d p = f.origin + rng.next_double() * f.edge_u +
                                rng.next_double() * f.edge_v;
      if (reject && reject(p)) continue;
      out.points.push_back(p);
      out.normals.push_back(f.normal);
      ++placed;
    }
  }
  return out;
}

Surface make_box_surface(int n, CounterRng& rng) {
  // face proportions chosen so a cube face split stays exact for n % 6 == 0
  return sample_faces(cuboid_faces({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}), n, rng);
}

Surface make_lshape_surface(int n, CounterRng& rng) {
  // three axis-aligned arms with distinct lengths; no rotational or mirror
  // symmetry, and every face plane well away from the bbox center
  const Eigen::Vector3d lo1(0, 0, 0), hi1(1.0, 0.30, 0.52);    // arm along x
  const Eigen::Vector3d lo2(0, 0, 0), hi2(0.30, 0.80, 0.52);   // arm along y
  const Eigen::Vector3d lo3(0, 0, 0), hi3(0.30, 0.30, 0.70);   // stub along z
  auto inside = [](const Eigen::Vector3d& p, const Eigen::Vector3d& lo,
                   const Eigen::Vector3d& hi) {
    const double eps = 1e-9;
    return p.x() > lo.x() + eps && p.x() < hi.x() - eps && p.y() > lo.y() + eps &&
           p.y() < hi.y() - eps && p.z() > lo.z() + eps && p.z() < hi.z() - eps;
  };
  std::vector<Face> faces;
  for (const auto& f : cuboid_faces(lo1, hi1)) faces.push_back(f);
  for (const auto& f : cuboid_faces(lo2, hi2)) faces.push_back(f);
  for (const auto& f : cuboid_faces(lo3, hi3)) faces.push_back(f);
  auto reject = [&](const Eigen::Vector3d& p) {
    return inside(p, lo1, hi1) || inside(p, lo2, hi2) || inside(p, lo3, hi3);
  };
  return sample_faces(faces, n, rng, reject);
}

Surface make_cylinder_surface(int n, CounterRng& rng) {
  const double radius = 0.35, height = 1.0;
  const double barrel_area = 2 * M_PI * radius * height;
  const double cap_area = M_PI * radius * radius;
  const std::vector<int> counts = allocate_counts({barrel_area, cap_area, cap_area}, n);
  Surface out;
  for (int i = 0; i < counts[0]; ++i) {
    const double phi = 2.0 * M_PI * rng.next_double();
    const double z = (rng.next_double() - 0.5) * height;
    out.points.emplace_back(radius * std::cos(phi), radius * std::sin(phi), z);
    out.normals.emplace_back(std::cos(phi), std::sin(phi), 0.0);
  }
  for (int cap = 0; cap < 2; ++cap) {
    const double zc = (cap == 0 ? 0.5 : -0.5) * height;
    const Eigen::Vector3d nc(0, 0, cap == 0 ? 1.0 : -1.0);
    for (int i = 0; i < counts[1 + cap]; ++i) {
      const double rr = radius * std::sqrt(rng.next_double());
      const double phi = 2.0 * M_PI * rng.next_double();
      out.points.emplace_back(rr * std::cos(phi), rr * std::sin(phi), zc);
      out.normals.push_back(nc);
    }
  }
  return out;
}

// star-shaped surface r(u) = 1 + sum_k a_k sin(w_k . u + c_k); the normal is
// the gradient of F(p) = |p| - r(p/|p|)
Surface make_blob_surface(int n, CounterRng& rng) {
  constexpr int kWaves = 4;
  std::array<Eigen::Vector3d, kWaves> w;
  std::array<double, kWaves> a, c;
  for (int k = 0; k < kWaves; ++k) {
    const double z = 1.0 - 2.0 * rng.next_double();
    const double phi = 2.0 * M_PI * rng.next_double();
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    w[k] = Eigen::Vector3d(rho * std::cos(phi), rho * std::sin(phi), z) *
           (1.5 + 2.0 * rng.next_double());
    a[k] = 0.03 + 0.05 * rng.next_double();
    c[k] = 2.0 * M_PI * rng.next_double();
  }
  auto radius_at = [&](const Eigen::Vector3d& u) {
    double r = 1.0;
    for (int k = 0; k < kWaves; ++k) r += a[k] * std::sin(w[k].dot(u) + c[k]);
    return r;
  };
  auto grad_radius = [&](const Eigen::Vector3d& u) {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (int k = 0; k < kWaves; ++k) g += a[k] * std::cos(w[k].dot(u) + c[k]) * w[k];
    return g;
  };

  Surface out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * rng.next_double();
    const double phi = 2.0 * M_PI * rng.next_double();
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d u(rho * std::cos(phi), rho * std::sin(phi), z);
    const double r = radius_at(u);
    out.points.push_back(r * u);
    // grad F = u - (I - u u^T) grad_r / r, evaluated on the surface
    const Eigen::Vector3d g = grad_radius(u);
    const Eigen::Vector3d tangential = g - u * u.dot(g);
    out.normals.push_back((u - tangential / r).normalized());
  }
  return out;
}

}  // namespace

OrientedPointCloud make_shape(ShapeKind kind, int n, std::uint64_t seed) {
  if (n < 30) throw input_error("shape sampling needs n >= 30");
  CounterRng rng(seed);
  Surface surf;
  switch (kind) {
    case ShapeKind::box: surf = make_box_surface(n, rng); break;
    case ShapeKind::lshape: surf = make_lshape_surface(n, rng); break;
    case ShapeKind::cylinder: surf = make_cylinder_surface(n, rng); break;
    case ShapeKind::blob: surf = make_blob_surface(n, rng); break;
  }

  // bbox-center and scale the largest extent to 1; directions are unchanged
  Eigen::Vector3d lo = surf.points.front(), hi = surf.points.front();
  for (const auto& p : surf.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const double scale = (hi - lo).maxCoeff();

  OrientedPointCloud out;
  out.cloud.points.reserve(surf.points.size());
  for (const auto& p : surf.points) out.cloud.points.push_back((p - center) / scale);
  out.normals = std::move(surf.normals);
  out.viewpoint = Eigen::Vector3d::Zero();
  return out;
}

}  // namespace hpppf
