#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "copa/geometry.hpp"
#include "copa/image.hpp"

namespace copa::parts {

/// Labeled binary part mask in a named camera's image. Masks with fewer than
/// 20 true pixels are rejected as degenerate.
struct PartMask {
  int id = 0;
  std::string name;
  img::Mask mask;
  int camera = 0;

  static constexpr size_t kMinPixels = 20;
};

enum class PartKind { Slender, Surface };

/// Directed 3D segment for a slender part. `anchor_point` is the endpoint
/// farther from the robot arm and equals `endpoint_far`; `direction` points
/// from near to far.
struct VectorElement {
  geom::Vec3 endpoint_near;
  geom::Vec3 endpoint_far;
  geom::Vec3 anchor_point;
  geom::UnitVec3 direction;
};

/// Oriented planar patch: inlier centroid plus a unit normal facing the
/// camera.
struct SurfaceElement {
  geom::Vec3 center;
  geom::UnitVec3 normal;
  int inlier_count = 0;
};

struct GeometricElement {
  int id = 0;
  std::string name;
  std::variant<VectorElement, SurfaceElement> shape;

  PartKind kind() const {
    return std::holds_alternative<VectorElement>(shape) ? PartKind::Slender : PartKind::Surface;
  }
  bool is_vector() const { return kind() == PartKind::Slender; }
  /// Direction for slender parts, surface normal otherwise.
  geom::Vec3 axis() const;
};

/// Minimum-area rotated rectangle over the mask's pixel cells (each true
/// pixel contributes its four corners), so an axis-aligned W x H block of
/// pixels measures exactly W x H.
struct RotatedRect {
  Eigen::Vector2d center;
  double long_side = 0;
  double short_side = 0;
  double angle = 0;  // radians, direction of the long side

  double aspect() const { return long_side / short_side; }
};

RotatedRect min_area_rect(const img::Mask& mask);

/// Slender iff the min-area rectangle's aspect ratio exceeds the threshold.
/// Throws DegenerateMask for masks under PartMask::kMinPixels pixels or with a
/// short side under 2 px.
PartKind classify_part(const PartMask& part, double aspect_threshold = 3.0);

/// Fits a total-least-squares line to the mask pixels, lifts the extreme
/// intersection points to 3D using the median valid depth in a 5x5
/// neighborhood, and orients the result away from `arm_ref`.
VectorElement fit_vector(const PartMask& part, const geom::DepthImage& depth,
                         const geom::CameraModel& cam, const geom::Vec3& arm_ref);

struct RansacParams {
  double inlier_distance = 0.005;  // meters
  int iterations = 500;
  int min_points = 30;
  double min_inlier_ratio = 0.5;
  uint64_t seed = 0xC0FA;
};

struct PlaneFit {
  geom::Vec3 centroid;
  geom::UnitVec3 normal;
  std::vector<int> inliers;
  int best_iteration = -1;
};

/// RANSAC plane fit with least-squares refit on the winning consensus set.
/// Deterministic for a fixed seed. Throws TooFewPoints / NoConsensus.
PlaneFit ransac_plane(const std::vector<geom::Vec3>& points, const RansacParams& params = {});

/// Reference implementation; identical result, no threading.
PlaneFit ransac_plane_serial(const std::vector<geom::Vec3>& points,
                             const RansacParams& params = {});

/// Back-projects the masked pixels, fits a plane with RANSAC, and orients the
/// normal toward the camera (normal . view_dir < 0).
SurfaceElement fit_surface(const PartMask& part, const geom::DepthImage& depth,
                           const geom::CameraModel& cam, const geom::UnitVec3& view_dir,
                           const RansacParams& params = {});

/// Drops every mask whose overlap with the arm mask exceeds half of its own
/// area. Order-preserving.
std::vector<PartMask> filter_arm_masks(const std::vector<PartMask>& masks, const img::Mask& arm);

struct VectorAnnotation {
  Eigen::Vector2d endpoint_a;  // near endpoint
  Eigen::Vector2d endpoint_b;  // far endpoint (anchor)
  Eigen::Vector2d label;
};

struct SurfaceAnnotation {
  Eigen::Vector2d center;
  Eigen::Vector2d normal_tip;  // projection of center + 0.05 m * normal
  Eigen::Vector2d label;
};

struct ElementAnnotation {
  int id = 0;
  std::string name;
  std::variant<VectorAnnotation, SurfaceAnnotation> shape;
};

struct AnnotationDocument {
  std::vector<ElementAnnotation> elements;
};

/// Projects each element into the image for labeling. Throws BehindCamera if
/// any required point does not project.
AnnotationDocument annotate(const std::vector<GeometricElement>& elements,
                            const geom::CameraModel& cam);

}  // namespace copa::parts
