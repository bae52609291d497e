#include "copa/part_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace copa::parts {

namespace {

using Eigen::Vector2d;

double cross2(const Vector2d& o, const Vector2d& a, const Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew monotone chain; returns the hull counter-clockwise without
// collinear points.
std::vector<Vector2d> convex_hull(std::vector<Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vector2d& a, const Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vector2d& a, const Vector2d& b) { return a == b; }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;

  std::vector<Vector2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<Vector2d> mask_pixel_centers(const img::Mask& mask) {
  std::vector<Vector2d> out;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) out.emplace_back(double(x), double(y));
    }
  }
  return out;
}

}  // namespace

geom::Vec3 GeometricElement::axis() const {
  if (const auto* v = std::get_if<VectorElement>(&shape)) return v->direction.vec();
  return std::get<SurfaceElement>(shape).normal.vec();
}

RotatedRect min_area_rect(const img::Mask& mask) {
  // One pixel is a unit cell; its four corners bound the filled region.
  std::vector<Vector2d> corners;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      corners.emplace_back(double(x), double(y));
      corners.emplace_back(double(x + 1), double(y));
      corners.emplace_back(double(x), double(y + 1));
      corners.emplace_back(double(x + 1), double(y + 1));
    }
  }
  if (corners.empty()) {
    throw Error(ErrorCode::DegenerateMask, "mask has no pixels");
  }

  const std::vector<Vector2d> hull = convex_hull(std::move(corners));

  // The minimum-area box has one side collinear with a hull edge; scan them.
  double best_area = std::numeric_limits<double>::infinity();
  RotatedRect best;
  const size_t n = hull.size();
  for (size_t i = 0; i < n; ++i) {
    const Vector2d edge = hull[(i + 1) % n] - hull[i];
    const double len = edge.norm();
    if (len < 1e-12) continue;
    const Vector2d d = edge / len;
    const Vector2d perp(-d.y(), d.x());
    double lo_d = std::numeric_limits<double>::infinity(), hi_d = -lo_d;
    double lo_p = lo_d, hi_p = -lo_d;
    for (const Vector2d& p : hull) {
      const double a = p.dot(d);
      const double b = p.dot(perp);
      lo_d = std::min(lo_d, a);
      hi_d = std::max(hi_d, a);
      lo_p = std::min(lo_p, b);
      hi_p = std::max(hi_p, b);
    }
    const double w = hi_d - lo_d;
    const double h = hi_p - lo_p;
    const double area = w * h;
    if (area < best_area) {
      best_area = area;
      const double cd = 0.5 * (lo_d + hi_d);
      const double cp = 0.5 * (lo_p + hi_p);
      best.center = cd * d + cp * perp;
      if (w >= h) {
        best.long_side = w;
        best.short_side = h;
        best.angle = std::atan2(d.y(), d.x());
      } else {
        best.long_side = h;
        best.short_side = w;
        best.angle = std::atan2(perp.y(), perp.x());
      }
    }
  }
  return best;
}

PartKind classify_part(const PartMask& part, double aspect_threshold) {
  if (part.mask.count() < PartMask::kMinPixels) {
    throw Error(ErrorCode::DegenerateMask,
                "part " + std::to_string(part.id) + " has fewer than 20 pixels");
  }
  const RotatedRect rect = min_area_rect(part.mask);
  if (rect.short_side < 2.0) {
    throw Error(ErrorCode::DegenerateMask,
                "part " + std::to_string(part.id) + " is under 2 px wide");
  }
  return rect.aspect() > aspect_threshold ? PartKind::Slender : PartKind::Surface;
}

namespace {

// Median valid depth in the 5x5 neighborhood of (px, py); lower median for
// even counts.
std::optional<double> neighborhood_median_depth(const geom::DepthImage& depth, int px, int py) {
  std::vector<float> vals;
  vals.reserve(25);
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      const int x = px + dx, y = py + dy;
      if (!depth.in_bounds(x, y)) continue;
      const float d = depth.at(x, y);
      if (geom::DepthImage::valid(d)) vals.push_back(d);
    }
  }
  if (vals.empty()) return std::nullopt;
  const size_t mid = (vals.size() - 1) / 2;
  std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
  return double(vals[mid]);
}

}  // namespace

VectorElement fit_vector(const PartMask& part, const geom::DepthImage& depth,
                         const geom::CameraModel& cam, const geom::Vec3& arm_ref) {
  const std::vector<Vector2d> pixels = mask_pixel_centers(part.mask);
  if (pixels.size() < 2) {
    throw Error(ErrorCode::DegenerateMask,
                "part " + std::to_string(part.id) + " has fewer than 2 pixels to fit a line");
  }

  size_t valid_overlap = 0;
  for (const Vector2d& p : pixels) {
    if (geom::DepthImage::valid(depth.at(int(p.x()), int(p.y())))) ++valid_overlap;
  }
  if (valid_overlap < 10) {
    throw Error(ErrorCode::NoDepth,
                "part " + std::to_string(part.id) + " overlaps fewer than 10 valid-depth pixels");
  }

  // Total least squares via the principal axis of the pixel scatter.
  Vector2d centroid = Vector2d::Zero();
  for (const Vector2d& p : pixels) centroid += p;
  centroid /= double(pixels.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Vector2d& p : pixels) {
    const Vector2d d = p - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Vector2d dir = eig.eigenvectors().col(1);  // largest eigenvalue

  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -t_min;
  for (const Vector2d& p : pixels) {
    const double t = (p - centroid).dot(dir);
    t_min = std::min(t_min, t);
    t_max = std::max(t_max, t);
  }
  const Vector2d end_a = centroid + t_min * dir;
  const Vector2d end_b = centroid + t_max * dir;

  auto lift = [&](const Vector2d& px) -> geom::Vec3 {
    const int ix = int(std::lround(px.x()));
    const int iy = int(std::lround(px.y()));
    const auto median = neighborhood_median_depth(depth, ix, iy);
    if (!median) {
      throw Error(ErrorCode::NoDepth, "no valid depth around endpoint of part " +
                                          std::to_string(part.id));
    }
    return cam.back_project_pixel(px.x(), px.y(), *median);
  };

  const geom::Vec3 a3 = lift(end_a);
  const geom::Vec3 b3 = lift(end_b);
  if ((b3 - a3).norm() <= 1e-4) {
    throw Error(ErrorCode::DegenerateMask,
                "part " + std::to_string(part.id) + " collapses to a point in 3D");
  }

  VectorElement elem;
  const bool b_is_far = (b3 - arm_ref).norm() >= (a3 - arm_ref).norm();
  elem.endpoint_near = b_is_far ? a3 : b3;
  elem.endpoint_far = b_is_far ? b3 : a3;
  elem.anchor_point = elem.endpoint_far;
  elem.direction = geom::UnitVec3(elem.endpoint_far - elem.endpoint_near);
  return elem;
}

namespace {

struct PlaneModel {
  geom::Vec3 normal;  // unit
  double offset;      // plane: normal . p + offset = 0

  double distance(const geom::Vec3& p) const { return std::abs(normal.dot(p) + offset); }
};

// Sample index triples up front so the threaded and serial scans score the
// exact same models.
std::vector<std::array<int, 3>> ransac_samples(int n, int iterations, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<std::array<int, 3>> out(static_cast<size_t>(iterations));
  for (auto& s : out) {
    s[0] = pick(rng);
    do { s[1] = pick(rng); } while (s[1] == s[0]);
    do { s[2] = pick(rng); } while (s[2] == s[0] || s[2] == s[1]);
  }
  return out;
}

std::optional<PlaneModel> plane_from_triple(const std::vector<geom::Vec3>& pts,
                                            const std::array<int, 3>& idx) {
  const geom::Vec3 n = (pts[idx[1]] - pts[idx[0]]).cross(pts[idx[2]] - pts[idx[0]]);
  const double len = n.norm();
  if (len < 1e-12) return std::nullopt;
  PlaneModel m;
  m.normal = n / len;
  m.offset = -m.normal.dot(pts[idx[0]]);
  return m;
}

int count_inliers(const std::vector<geom::Vec3>& pts, const PlaneModel& m, double tol) {
  int count = 0;
  for (const geom::Vec3& p : pts) {
    if (m.distance(p) <= tol) ++count;
  }
  return count;
}

PlaneFit finish_fit(const std::vector<geom::Vec3>& pts, const RansacParams& params,
                    const std::vector<int>& scores, int best_iter,
                    const std::vector<std::array<int, 3>>& samples) {
  const int n = int(pts.size());
  if (best_iter < 0 || double(scores[best_iter]) < params.min_inlier_ratio * n) {
    throw Error(ErrorCode::NoConsensus, "best plane explains under half of the points");
  }
  const PlaneModel model = *plane_from_triple(pts, samples[best_iter]);

  PlaneFit fit;
  fit.best_iteration = best_iter;
  for (int i = 0; i < n; ++i) {
    if (model.distance(pts[i]) <= params.inlier_distance) fit.inliers.push_back(i);
  }

  // Least-squares refit on the consensus set.
  geom::Vec3 centroid = geom::Vec3::Zero();
  for (int i : fit.inliers) centroid += pts[i];
  centroid /= double(fit.inliers.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (int i : fit.inliers) {
    const geom::Vec3 d = pts[i] - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  fit.centroid = centroid;
  fit.normal = geom::UnitVec3(eig.eigenvectors().col(0));
  return fit;
}

}  // namespace

PlaneFit ransac_plane_serial(const std::vector<geom::Vec3>& points, const RansacParams& params) {
  const int n = int(points.size());
  if (n < params.min_points) {
    throw Error(ErrorCode::TooFewPoints, "plane fit needs at least " +
                                             std::to_string(params.min_points) + " points, got " +
                                             std::to_string(n));
  }
  const auto samples = ransac_samples(n, params.iterations, params.seed);
  std::vector<int> scores(samples.size(), -1);
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto model = plane_from_triple(points, samples[i]);
    if (model) scores[i] = count_inliers(points, *model, params.inlier_distance);
  }
  int best = -1;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (best < 0 || scores[i] > scores[best]) best = int(i);
  }
  return finish_fit(points, params, scores, best, samples);
}

PlaneFit ransac_plane(const std::vector<geom::Vec3>& points, const RansacParams& params) {
  const int n = int(points.size());
  if (n < params.min_points) {
    throw Error(ErrorCode::TooFewPoints, "plane fit needs at least " +
                                             std::to_string(params.min_points) + " points, got " +
                                             std::to_string(n));
  }
  const auto samples = ransac_samples(n, params.iterations, params.seed);
  std::vector<int> scores(samples.size(), -1);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < int(samples.size()); ++i) {
    const auto model = plane_from_triple(points, samples[i]);
    if (model) scores[i] = count_inliers(points, *model, params.inlier_distance);
  }
  // Selection stays a serial scan so ties resolve by iteration order no
  // matter how the loop was scheduled.
  int best = -1;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (best < 0 || scores[i] > scores[best]) best = int(i);
  }
  return finish_fit(points, params, scores, best, samples);
}

SurfaceElement fit_surface(const PartMask& part, const geom::DepthImage& depth,
                           const geom::CameraModel& cam, const geom::UnitVec3& view_dir,
                           const RansacParams& params) {
  std::vector<geom::Vec3> cloud;
  for (int y = 0; y < part.mask.height; ++y) {
    for (int x = 0; x < part.mask.width; ++x) {
      if (!part.mask.at(x, y)) continue;
      const float d = depth.at(x, y);
      if (!geom::DepthImage::valid(d)) continue;
      cloud.push_back(cam.back_project_pixel(double(x), double(y), double(d)));
    }
  }
  if (int(cloud.size()) < params.min_points) {
    throw Error(ErrorCode::TooFewPoints,
                "part " + std::to_string(part.id) + " has too few valid-depth pixels");
  }

  const PlaneFit fit = ransac_plane(cloud, params);

  SurfaceElement elem;
  elem.center = fit.centroid;
  elem.inlier_count = int(fit.inliers.size());
  elem.normal = fit.normal.vec().dot(view_dir.vec()) < 0 ? fit.normal : fit.normal.flipped();
  return elem;
}

std::vector<PartMask> filter_arm_masks(const std::vector<PartMask>& masks, const img::Mask& arm) {
  std::vector<PartMask> kept;
  for (const PartMask& part : masks) {
    if (part.mask.width != arm.width || part.mask.height != arm.height) {
      throw Error(ErrorCode::InvalidScene, "arm mask resolution differs from part masks");
    }
    size_t own = 0, overlap = 0;
    for (size_t i = 0; i < part.mask.data.size(); ++i) {
      if (!part.mask.data[i]) continue;
      ++own;
      if (arm.data[i]) ++overlap;
    }
    if (own == 0 || double(overlap) <= 0.5 * double(own)) {
      kept.push_back(part);
    }
  }
  return kept;
}

AnnotationDocument annotate(const std::vector<GeometricElement>& elements,
                            const geom::CameraModel& cam) {
  constexpr double kNormalDrawLength = 0.05;  // meters
  const Eigen::Vector2d label_offset(6.0, -6.0);

  AnnotationDocument doc;
  for (const GeometricElement& e : elements) {
    auto project = [&](const geom::Vec3& p) -> Eigen::Vector2d {
      const auto px = cam.project(p);
      if (!px) {
        throw Error(ErrorCode::BehindCamera,
                    "element " + std::to_string(e.id) + " does not project into the image");
      }
      return *px;
    };

    ElementAnnotation ann;
    ann.id = e.id;
    ann.name = e.name;
    if (const auto* v = std::get_if<VectorElement>(&e.shape)) {
      VectorAnnotation va;
      va.endpoint_a = project(v->endpoint_near);
      va.endpoint_b = project(v->endpoint_far);
      va.label = va.endpoint_b + label_offset;
      ann.shape = va;
    } else {
      const auto& s = std::get<SurfaceElement>(e.shape);
      SurfaceAnnotation sa;
      sa.center = project(s.center);
      sa.normal_tip = project(s.center + kNormalDrawLength * s.normal.vec());
      sa.label = sa.center + label_offset;
      ann.shape = sa;
    }
    doc.elements.push_back(std::move(ann));
  }
  return doc;
}

}  // namespace copa::parts
