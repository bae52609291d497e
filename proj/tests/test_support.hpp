#pragma once

// Shared generators and independent reference implementations used as test
// oracles. Everything here stays independent of the library code paths it
// checks.

#include <random>
#include <vector>

#include "copa/geometry.hpp"
#include "copa/image.hpp"

namespace copa::testing {

inline geom::Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  return geom::Rotation::from_quaternion(q.normalized());
}

inline geom::RigidTransform random_transform(std::mt19937_64& rng, double translation_range = 0.5) {
  std::uniform_real_distribution<double> uni(-translation_range, translation_range);
  geom::RigidTransform t;
  t.rotation = random_rotation(rng);
  t.translation = geom::Vec3(uni(rng), uni(rng), uni(rng));
  return t;
}

inline geom::Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  geom::Vec3 v(gauss(rng), gauss(rng), gauss(rng));
  while (v.norm() < 1e-6) v = geom::Vec3(gauss(rng), gauss(rng), gauss(rng));
  return v.normalized();
}

inline geom::Vec3 random_point(std::mt19937_64& rng, double range = 0.5) {
  std::uniform_real_distribution<double> uni(-range, range);
  return geom::Vec3(uni(rng), uni(rng), uni(rng));
}

/// Smallest bounding-rectangle area over a dense sweep of directions;
/// independent check for the hull-edge scan. Points are the mask's pixel
/// corners.
struct SweepRect {
  double area = 0;
  double long_side = 0;
  double short_side = 0;
};

inline SweepRect min_rect_by_angle_sweep(const img::Mask& mask, int angles = 3600) {
  std::vector<Eigen::Vector2d> pts;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      pts.emplace_back(x, y);
      pts.emplace_back(x + 1, y);
      pts.emplace_back(x, y + 1);
      pts.emplace_back(x + 1, y + 1);
    }
  }
  SweepRect best;
  best.area = std::numeric_limits<double>::infinity();
  for (int k = 0; k < angles; ++k) {
    const double theta = M_PI * k / angles;
    const Eigen::Vector2d d(std::cos(theta), std::sin(theta));
    const Eigen::Vector2d n(-d.y(), d.x());
    double lo_d = 1e300, hi_d = -1e300, lo_n = 1e300, hi_n = -1e300;
    for (const auto& p : pts) {
      const double a = p.dot(d), b = p.dot(n);
      lo_d = std::min(lo_d, a);
      hi_d = std::max(hi_d, a);
      lo_n = std::min(lo_n, b);
      hi_n = std::max(hi_n, b);
    }
    const double w = hi_d - lo_d, h = hi_n - lo_n;
    if (w * h < best.area) {
      best.area = w * h;
      best.long_side = std::max(w, h);
      best.short_side = std::min(w, h);
    }
  }
  return best;
}

/// Least-squares plane through points (no robustness); reference for RANSAC
/// on clean data.
struct LsPlane {
  geom::Vec3 centroid;
  geom::Vec3 normal;
};

inline LsPlane least_squares_plane(const std::vector<geom::Vec3>& pts) {
  geom::Vec3 c = geom::Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= double(pts.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const geom::Vec3 d = p - c;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  return {c, eig.eigenvectors().col(0).normalized()};
}

inline double angle_between_lines_deg(const geom::Vec3& a, const geom::Vec3& b) {
  const double c = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
  return std::acos(c) * 180.0 / M_PI;
}

inline double point_segment_distance(const geom::Vec3& p, const geom::Vec3& a,
                                     const geom::Vec3& b) {
  const geom::Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace copa::testing
