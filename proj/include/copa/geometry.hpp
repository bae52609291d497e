#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <optional>
#include <vector>

#include "copa/error.hpp"

namespace copa::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Direction with unit Euclidean norm. Construction normalizes and rejects
/// near-zero input.
class UnitVec3 {
 public:
  UnitVec3() : v_(0, 0, 1) {}
  explicit UnitVec3(const Vec3& v);

  const Vec3& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  UnitVec3 flipped() const;

 private:
  Vec3 v_;
};

/// Element of SO(3). Stored as a unit quaternion; matrix and quaternion views
/// are exposed and any constructor re-orthonormalizes.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}

  static Rotation identity() { return Rotation(); }
  static Rotation from_quaternion(double x, double y, double z, double w);
  static Rotation from_quaternion(const Eigen::Quaterniond& q);
  static Rotation from_matrix(const Mat3& m);
  /// Exponential map: |w| is the angle, w/|w| the axis.
  static Rotation from_axis_angle(const Vec3& w);

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }
  /// Log map, angle in [0, pi].
  Vec3 axis_angle() const;

  Vec3 operator*(const Vec3& v) const { return q_ * v; }
  Rotation operator*(const Rotation& o) const { return Rotation((q_ * o.q_).normalized(), 0); }
  Rotation inverse() const { return Rotation(q_.conjugate(), 0); }

  /// Geodesic distance to another rotation, radians in [0, pi].
  double angle_to(const Rotation& o) const;

 private:
  Rotation(const Eigen::Quaterniond& q, int) : q_(q) {}
  Eigen::Quaterniond q_;
};

/// Element of SE(3): rotation plus translation, applied as p -> R p + t.
struct RigidTransform {
  Rotation rotation;
  Vec3 translation{0, 0, 0};

  static RigidTransform identity() { return {}; }

  Vec3 apply_to_point(const Vec3& p) const { return rotation * p + translation; }
  /// Directions ignore translation.
  Vec3 apply_to_vector(const Vec3& v) const { return rotation * v; }

  RigidTransform compose(const RigidTransform& other) const;
  RigidTransform inverse() const;
};

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return a.compose(b);
}

/// End-effector (or any rigid body) frame expressed in world coordinates.
struct Pose {
  Vec3 position{0, 0, 0};
  Rotation orientation;
};

/// Row-major single-channel depth map in meters; 0 or non-finite marks an
/// invalid pixel.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DepthImage() = default;
  DepthImage(int w, int h, float fill = 0.f) : width(w), height(h), data(size_t(w) * h, fill) {}

  float& at(int x, int y) { return data[size_t(y) * width + x]; }
  float at(int x, int y) const { return data[size_t(y) * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  static bool valid(float d) { return d > 0.f && std::isfinite(d); }
};

struct PointCloud {
  std::vector<Vec3> points;
  /// Source pixel per point when produced by back-projection; empty otherwise.
  std::vector<Eigen::Vector2i> pixels;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Pinhole camera. `extrinsics` maps world coordinates into the camera frame
/// (optical axis +z, x right, y down).
struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  RigidTransform extrinsics;

  void validate() const;

  RigidTransform world_from_camera() const { return extrinsics.inverse(); }

  /// World point for pixel (u,v) at camera-frame depth d.
  Vec3 back_project_pixel(double u, double v, double d) const;

  /// Pixel coordinates of a world point, or nullopt when the point lies at or
  /// behind the camera plane (camera-frame z <= 1e-6).
  std::optional<Eigen::Vector2d> project(const Vec3& world_point) const;
};

/// Back-projects every valid pixel into a world-frame cloud. Points appear in
/// row-major pixel order. Throws EmptyCloud when no pixel is valid.
PointCloud back_project(const DepthImage& depth, const CameraModel& cam);

/// Reference implementation of back_project; identical output, no threading.
PointCloud back_project_serial(const DepthImage& depth, const CameraModel& cam);

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace copa::geom
