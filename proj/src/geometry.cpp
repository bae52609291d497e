#include "copa/geometry.hpp"

#include <cmath>

namespace copa {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::NoDepth: return "NoDepth";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::UnrecognizedTemplate: return "UnrecognizedTemplate";
    case ErrorCode::BadUnit: return "BadUnit";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::UnresolvedReference: return "UnresolvedReference";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::NoCandidateInMask: return "NoCandidateInMask";
    case ErrorCode::ScriptMiss: return "ScriptMiss";
    case ErrorCode::InvalidSelection: return "InvalidSelection";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidScene: return "InvalidScene";
    case ErrorCode::GraspFailure: return "GraspFailure";
    case ErrorCode::ConstraintParseFailure: return "ConstraintParseFailure";
    case ErrorCode::SolveFailure: return "SolveFailure";
  }
  return "UnknownError";
}

}  // namespace copa

namespace copa::geom {

UnitVec3::UnitVec3(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw Error(ErrorCode::DegenerateInput, "cannot normalize a near-zero vector");
  }
  v_ = v / n;
}

UnitVec3 UnitVec3::flipped() const {
  UnitVec3 u;
  u.v_ = -v_;
  return u;
}

Rotation Rotation::from_quaternion(double x, double y, double z, double w) {
  return from_quaternion(Eigen::Quaterniond(w, x, y, z));
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw Error(ErrorCode::DegenerateInput, "cannot normalize a near-zero quaternion");
  }
  return Rotation(Eigen::Quaterniond(q.coeffs() / n), 0);
}

Rotation Rotation::from_matrix(const Mat3& m) {
  // Quaternion extraction followed by normalization projects slightly
  // perturbed matrices back onto SO(3).
  Eigen::Quaterniond q(m);
  return from_quaternion(q);
}

Rotation Rotation::from_axis_angle(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-14) {
    return Rotation();
  }
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle)), 0);
}

Vec3 Rotation::axis_angle() const {
  Eigen::AngleAxisd aa(q_);
  return aa.angle() * aa.axis();
}

double Rotation::angle_to(const Rotation& o) const {
  const Eigen::Quaterniond rel = q_.conjugate() * o.q_;
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.inverse();
  out.translation = -(out.rotation * translation);
  return out;
}

void CameraModel::validate() const {
  if (!(fx > 0) || !(fy > 0)) {
    throw Error(ErrorCode::SchemaError, "camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::SchemaError, "camera resolution must be positive");
  }
  if (cx < 0 || cx >= width || cy < 0 || cy >= height) {
    throw Error(ErrorCode::SchemaError, "camera principal point outside the image");
  }
}

Vec3 CameraModel::back_project_pixel(double u, double v, double d) const {
  const Vec3 cam_point((u - cx) * d / fx, (v - cy) * d / fy, d);
  return world_from_camera().apply_to_point(cam_point);
}

std::optional<Eigen::Vector2d> CameraModel::project(const Vec3& world_point) const {
  const Vec3 p = extrinsics.apply_to_point(world_point);
  if (p.z() <= 1e-6) {
    return std::nullopt;
  }
  return Eigen::Vector2d(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

PointCloud back_project_serial(const DepthImage& depth, const CameraModel& cam) {
  PointCloud cloud;
  const RigidTransform w_from_c = cam.world_from_camera();
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const float d = depth.at(x, y);
      if (!DepthImage::valid(d)) continue;
      const Vec3 cam_point((x - cam.cx) * double(d) / cam.fx, (y - cam.cy) * double(d) / cam.fy,
                           double(d));
      cloud.points.push_back(w_from_c.apply_to_point(cam_point));
      cloud.pixels.emplace_back(x, y);
    }
  }
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "depth image has no valid pixels");
  }
  return cloud;
}

PointCloud back_project(const DepthImage& depth, const CameraModel& cam) {
  const RigidTransform w_from_c = cam.world_from_camera();
  const int h = depth.height;

  // Row counts first so the parallel fill can write at stable offsets and the
  // output stays in row-major pixel order.
  std::vector<size_t> row_start(size_t(h) + 1, 0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    size_t count = 0;
    for (int x = 0; x < depth.width; ++x) {
      if (DepthImage::valid(depth.at(x, y))) ++count;
    }
    row_start[size_t(y) + 1] = count;
  }
  for (int y = 0; y < h; ++y) row_start[size_t(y) + 1] += row_start[y];

  const size_t total = row_start[h];
  if (total == 0) {
    throw Error(ErrorCode::EmptyCloud, "depth image has no valid pixels");
  }

  PointCloud cloud;
  cloud.points.resize(total);
  cloud.pixels.resize(total);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    size_t k = row_start[y];
    for (int x = 0; x < depth.width; ++x) {
      const float d = depth.at(x, y);
      if (!DepthImage::valid(d)) continue;
      const Vec3 cam_point((x - cam.cx) * double(d) / cam.fx, (y - cam.cy) * double(d) / cam.fy,
                           double(d));
      cloud.points[k] = w_from_c.apply_to_point(cam_point);
      cloud.pixels[k] = Eigen::Vector2i(x, y);
      ++k;
    }
  }
  return cloud;
}

}  // namespace copa::geom
