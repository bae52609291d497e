#pragma once

#include <set>
#include <vector>

#include "copa/constraint_lang.hpp"
#include "copa/geometry.hpp"

namespace copa::solver {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Tabletop reference frame used by the table-relative constraint forms.
struct TableFrame {
  geom::Vec3 point{0.5, 0.0, 0.07};
  geom::UnitVec3 normal{geom::Vec3(0, 0, 1)};
};

/// One pose-solve instance: resolved constraints, the ids rigidly attached to
/// the gripper (transformed by the unknown T), and the table frame.
struct SolveProblem {
  std::vector<lang::ResolvedConstraint> constraints;
  std::set<int> movable_ids;
  TableFrame table;
};

struct SolveOptions {
  uint64_t seed = 0xC0FA5EED;
  int random_restarts = 8;  // plus the identity start
  int max_iterations = 300;
  double tolerance = 1e-3;
  bool parallel = true;
};

struct RestartStats {
  double initial_loss = 0;
  double final_loss = 0;
  int iterations = 0;
};

struct SolveResult {
  geom::RigidTransform transform;
  double residual = 0;
  std::vector<double> per_constraint;
  int iterations = 0;
  int restarts_used = 0;
  int best_start = 0;
  bool converged = false;
  std::vector<RestartStats> restarts;
};

/// The point a constraint sentence means when it says "Point k": the surface
/// center, or a slender part's anchor endpoint (the one farther from the arm).
geom::Vec3 associated_point(const parts::GeometricElement& e);

/// Loss of one resolved constraint under candidate transform `t`. Slots whose
/// element id is movable are transformed; all directions are unit.
double constraint_loss(const lang::ResolvedConstraint& c, const std::set<int>& movable_ids,
                       const TableFrame& table, const geom::RigidTransform& t);

double total_loss(const SolveProblem& p, const geom::RigidTransform& t);

/// Packs (axis-angle, translation) into the 6-vector the optimizer works in.
geom::RigidTransform transform_from_params(const Vector6d& params);
Vector6d params_from_transform(const geom::RigidTransform& t);

/// Analytic gradient of total_loss at `params`, with the subgradient taken as
/// zero wherever a |.| or ||.|| argument vanishes.
Vector6d total_loss_gradient(const SolveProblem& p, const Vector6d& params);

/// Multi-start quasi-Newton minimization of the summed constraint losses.
/// Success means the non-PointsDownward losses sum below `tolerance` and each
/// PointsDownward term is within `tolerance` of its optimum -1. The best
/// transform is returned even when no start converges.
SolveResult solve(const SolveProblem& p, const SolveOptions& options = {});

/// Applies a solved transform to the end-effector: position moves as a point,
/// orientation is left-composed.
geom::Pose pose_from_transform(const geom::Pose& grasp_pose, const geom::RigidTransform& t);

}  // namespace copa::solver
