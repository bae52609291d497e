#pragma once

// Independent evaluation of the constraint losses, written directly from the
// loss table against raw vectors and a homogeneous matrix. Deliberately
// separate from the solver's code path so the two can be checked against each
// other.

#include <Eigen/Dense>

#include "copa/constraint_lang.hpp"
#include "copa/solver.hpp"

namespace copa::testing {

struct RawConstraint {
  enum class Form { Collinear, TargetAlong, Parallel, Height, Perpendicular, Downward };
  Form form = Form::Collinear;
  geom::Vec3 pA = geom::Vec3::Zero();
  geom::Vec3 VA = geom::Vec3::UnitZ();
  bool a_movable = true;
  geom::Vec3 pB = geom::Vec3::Zero();
  geom::Vec3 VB = geom::Vec3::UnitZ();
  bool b_movable = false;
  geom::Vec3 pC = geom::Vec3::Zero();
  geom::Vec3 VC = geom::Vec3::UnitZ();
  bool c_movable = false;
  double x = 0;
  geom::Vec3 table_p = geom::Vec3(0.5, 0, 0.07);
  geom::Vec3 table_n = geom::Vec3(0, 0, 1);

  // |.| and ||.|| argument magnitudes land in `args` when given (kink checks).
  double eval(const Eigen::Matrix4d& T, std::vector<double>* args = nullptr) const {
    const Eigen::Matrix3d R = T.block<3, 3>(0, 0);
    const geom::Vec3 t = T.block<3, 1>(0, 3);
    const geom::Vec3 qa = a_movable ? geom::Vec3(R * pA + t) : pA;
    const geom::Vec3 ua = (a_movable ? geom::Vec3(R * VA) : VA).normalized();
    const geom::Vec3 qb = b_movable ? geom::Vec3(R * pB + t) : pB;
    const geom::Vec3 ub = (b_movable ? geom::Vec3(R * VB) : VB).normalized();
    const geom::Vec3 qc = c_movable ? geom::Vec3(R * pC + t) : pC;
    const geom::Vec3 n = table_n.normalized();

    auto push = [&](double v) {
      if (args) args->push_back(std::abs(v));
      return v;
    };

    switch (form) {
      case Form::Collinear:
        return std::abs(push(ua.cross(ub).norm())) +
               std::abs(push((qa - qb).cross(ub).norm())) + std::abs(push((ua + ub).norm()));
      case Form::TargetAlong:
        return std::abs(push((qa - qc).dot(ub) - x)) + std::abs(push((qa - qc).cross(ub).norm()));
      case Form::Parallel:
        return std::abs(push(ua.dot(n)));
      case Form::Height:
        return std::abs(push((qa - table_p).dot(n) - x));
      case Form::Perpendicular:
        return std::abs(push(ua.cross(n).norm()));
      case Form::Downward:
        return -ua.dot(geom::Vec3(0, 0, -1));
    }
    return 0;
  }
};

inline parts::GeometricElement make_vector_element(int id, const geom::Vec3& near,
                                                   const geom::Vec3& far) {
  parts::GeometricElement e;
  e.id = id;
  parts::VectorElement v;
  v.endpoint_near = near;
  v.endpoint_far = far;
  v.anchor_point = far;
  v.direction = geom::UnitVec3(far - near);
  e.shape = v;
  return e;
}

inline parts::GeometricElement make_surface_element(int id, const geom::Vec3& center,
                                                    const geom::Vec3& normal) {
  parts::GeometricElement e;
  e.id = id;
  e.shape = parts::SurfaceElement{center, geom::UnitVec3(normal), 100};
  return e;
}

inline lang::ResolvedConstraint resolved_from(const lang::Constraint& ir,
                                              const std::vector<parts::GeometricElement>& els) {
  lang::ResolvedConstraint rc;
  rc.ir = ir;
  for (const auto& e : els) {
    rc.slots.push_back({lang::PartRef{e.id, e.is_vector() ? lang::RefKind::Vector
                                                          : lang::RefKind::Surface},
                        e});
  }
  return rc;
}

/// Builds the matching RawConstraint for a resolved one (same numbers,
/// different code path).
inline RawConstraint raw_from_resolved(const lang::ResolvedConstraint& rc,
                                       const std::set<int>& movable,
                                       const solver::TableFrame& table) {
  RawConstraint raw;
  raw.table_p = table.point;
  raw.table_n = table.normal.vec();

  auto fill = [&](size_t idx, geom::Vec3& p, geom::Vec3& V, bool& mov) {
    const auto& slot = rc.slots.at(idx);
    p = solver::associated_point(slot.element);
    V = slot.element.axis();
    mov = movable.count(slot.element.id) > 0;
  };

  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, lang::CollinearOpposite>) {
          raw.form = RawConstraint::Form::Collinear;
          fill(0, raw.pA, raw.VA, raw.a_movable);
          fill(1, raw.pB, raw.VB, raw.b_movable);
        } else if constexpr (std::is_same_v<T, lang::TargetAlong>) {
          raw.form = RawConstraint::Form::TargetAlong;
          fill(0, raw.pA, raw.VA, raw.a_movable);
          fill(1, raw.pB, raw.VB, raw.b_movable);
          fill(2, raw.pC, raw.VC, raw.c_movable);
          raw.x = v.distance_m;
        } else if constexpr (std::is_same_v<T, lang::ParallelToTable>) {
          raw.form = RawConstraint::Form::Parallel;
          fill(0, raw.pA, raw.VA, raw.a_movable);
        } else if constexpr (std::is_same_v<T, lang::HeightAboveTable>) {
          raw.form = RawConstraint::Form::Height;
          fill(0, raw.pA, raw.VA, raw.a_movable);
          raw.x = v.height_m;
        } else if constexpr (std::is_same_v<T, lang::PerpendicularToTable>) {
          raw.form = RawConstraint::Form::Perpendicular;
          fill(0, raw.pA, raw.VA, raw.a_movable);
        } else {
          raw.form = RawConstraint::Form::Downward;
          fill(0, raw.pA, raw.VA, raw.a_movable);
        }
      },
      rc.ir);
  return raw;
}

inline Eigen::Matrix4d homogeneous(const geom::RigidTransform& t) {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.block<3, 3>(0, 0) = t.rotation.matrix();
  T.block<3, 1>(0, 3) = t.translation;
  return T;
}

}  // namespace copa::testing
