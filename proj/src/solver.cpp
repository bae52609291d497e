#include "copa/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace copa::solver {

namespace {

using geom::Mat3;
using geom::Vec3;

constexpr double kKinkEps = 1e-12;

// --- compiled constraint form ------------------------------------------------

enum class Form { Collinear, TargetAlong, Parallel, Height, Perpendicular, Downward };

struct Slot {
  Vec3 point = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();  // unit
  bool movable = false;
};

struct Compiled {
  Form form;
  Slot a, b, c;
  double x = 0;  // meters, for TargetAlong / Height
};

Slot make_slot(const lang::ResolvedSlot& rs, const std::set<int>& movable_ids) {
  Slot s;
  s.point = associated_point(rs.element);
  s.dir = rs.element.axis().normalized();
  s.movable = movable_ids.count(rs.element.id) > 0;
  return s;
}

Slot table_slot(const TableFrame& table) {
  Slot s;
  s.point = table.point;
  s.dir = table.normal.vec();
  s.movable = false;
  return s;
}

Compiled compile_constraint(const lang::ResolvedConstraint& rc, const std::set<int>& movable_ids,
                            const TableFrame& table) {
  Compiled out;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, lang::CollinearOpposite>) {
          out.form = Form::Collinear;
          out.a = make_slot(rc.slots.at(0), movable_ids);
          out.b = make_slot(rc.slots.at(1), movable_ids);
        } else if constexpr (std::is_same_v<T, lang::TargetAlong>) {
          out.form = Form::TargetAlong;
          out.a = make_slot(rc.slots.at(0), movable_ids);
          out.b = make_slot(rc.slots.at(1), movable_ids);
          out.c = make_slot(rc.slots.at(2), movable_ids);
          out.x = v.distance_m;
        } else if constexpr (std::is_same_v<T, lang::ParallelToTable>) {
          out.form = Form::Parallel;
          out.a = make_slot(rc.slots.at(0), movable_ids);
          out.b = table_slot(table);
        } else if constexpr (std::is_same_v<T, lang::HeightAboveTable>) {
          out.form = Form::Height;
          out.a = make_slot(rc.slots.at(0), movable_ids);
          out.b = table_slot(table);
          out.x = v.height_m;
        } else if constexpr (std::is_same_v<T, lang::PerpendicularToTable>) {
          out.form = Form::Perpendicular;
          out.a = make_slot(rc.slots.at(0), movable_ids);
          out.b = table_slot(table);
        } else {
          out.form = Form::Downward;
          out.a = make_slot(rc.slots.at(0), movable_ids);
        }
      },
      rc.ir);
  if (rc.slots.empty()) {
    throw Error(ErrorCode::UnresolvedReference, "constraint has no bound elements");
  }
  return out;
}

std::vector<Compiled> compile_problem(const SolveProblem& p) {
  std::vector<Compiled> out;
  out.reserve(p.constraints.size());
  for (const auto& rc : p.constraints) {
    out.push_back(compile_constraint(rc, p.movable_ids, p.table));
  }
  return out;
}

// --- loss evaluation ----------------------------------------------------------

struct SlotState {
  Vec3 q;  // transformed point
  Vec3 u;  // transformed direction
};

SlotState transform_slot(const Slot& s, const Mat3& R, const Vec3& t) {
  if (!s.movable) return {s.point, s.dir};
  return {R * s.point + t, R * s.dir};
}

double exact_loss_one(const Compiled& c, const Mat3& R, const Vec3& t) {
  const SlotState a = transform_slot(c.a, R, t);
  switch (c.form) {
    case Form::Collinear: {
      const SlotState b = transform_slot(c.b, R, t);
      return a.u.cross(b.u).norm() + (a.q - b.q).cross(b.u).norm() + (a.u + b.u).norm();
    }
    case Form::TargetAlong: {
      const SlotState b = transform_slot(c.b, R, t);
      const SlotState cc = transform_slot(c.c, R, t);
      const Vec3 d = a.q - cc.q;
      return std::abs(d.dot(b.u) - c.x) + d.cross(b.u).norm();
    }
    case Form::Parallel:
      return std::abs(a.u.dot(c.b.dir));
    case Form::Height:
      return std::abs((a.q - c.b.point).dot(c.b.dir) - c.x);
    case Form::Perpendicular:
      return a.u.cross(c.b.dir).norm();
    case Form::Downward:
      // -T(V) . (0,0,-1); minimal value -1 when the direction points straight
      // down.
      return a.u.z();
  }
  return 0;
}

// Right Jacobian of SO(3): exp((w + d)^) ~= exp(w^) exp((Jr(w) d)^).
Mat3 right_jacobian(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 W = geom::skew(w);
  double c1, c2;
  if (theta2 < 1e-8) {
    c1 = 0.5 - theta2 / 24.0;
    c2 = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    c1 = (1.0 - std::cos(theta)) / theta2;
    c2 = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() - c1 * W + c2 * W * W;
}

// Accumulates d(term)/d(params) for gradients flowing into a slot's point and
// direction. dRp/dw = -R [p]x Jr, dRv/dw = -R [v]x Jr, dq/dt = I.
struct GradSink {
  const Mat3& R;
  const Mat3& Jr;
  Vector6d& grad;

  void point(const Slot& s, const Vec3& dL_dq) const {
    if (!s.movable) return;
    grad.head<3>() += Jr.transpose() * (geom::skew(s.point) * (R.transpose() * dL_dq));
    grad.tail<3>() += dL_dq;
  }
  void dir(const Slot& s, const Vec3& dL_du) const {
    if (!s.movable) return;
    grad.head<3>() += Jr.transpose() * (geom::skew(s.dir) * (R.transpose() * dL_du));
  }
};

// Exact loss and (sub)gradient of one constraint; gradient contributions are
// zero at kinks.
double exact_loss_grad_one(const Compiled& c, const Mat3& R, const Vec3& t, const GradSink& sink) {
  const SlotState a = transform_slot(c.a, R, t);
  switch (c.form) {
    case Form::Collinear: {
      const SlotState b = transform_slot(c.b, R, t);
      double value = 0;
      const Vec3 c1 = a.u.cross(b.u);
      const double n1 = c1.norm();
      value += n1;
      if (n1 > kKinkEps) {
        const Vec3 c1n = c1 / n1;
        sink.dir(c.a, b.u.cross(c1n));
        sink.dir(c.b, c1n.cross(a.u));
      }
      const Vec3 d = a.q - b.q;
      const Vec3 c2 = d.cross(b.u);
      const double n2 = c2.norm();
      value += n2;
      if (n2 > kKinkEps) {
        const Vec3 c2n = c2 / n2;
        sink.point(c.a, b.u.cross(c2n));
        sink.point(c.b, -(b.u.cross(c2n)));
        sink.dir(c.b, c2n.cross(d));
      }
      const Vec3 s = a.u + b.u;
      const double n3 = s.norm();
      value += n3;
      if (n3 > kKinkEps) {
        const Vec3 sn = s / n3;
        sink.dir(c.a, sn);
        sink.dir(c.b, sn);
      }
      return value;
    }
    case Form::TargetAlong: {
      const SlotState b = transform_slot(c.b, R, t);
      const SlotState cc = transform_slot(c.c, R, t);
      const Vec3 d = a.q - cc.q;
      double value = 0;
      const double s = d.dot(b.u) - c.x;
      value += std::abs(s);
      if (std::abs(s) > kKinkEps) {
        const double sg = s > 0 ? 1.0 : -1.0;
        sink.point(c.a, sg * b.u);
        sink.point(c.c, -sg * b.u);
        sink.dir(c.b, sg * d);
      }
      const Vec3 cr = d.cross(b.u);
      const double n = cr.norm();
      value += n;
      if (n > kKinkEps) {
        const Vec3 crn = cr / n;
        sink.point(c.a, b.u.cross(crn));
        sink.point(c.c, -(b.u.cross(crn)));
        sink.dir(c.b, crn.cross(d));
      }
      return value;
    }
    case Form::Parallel: {
      const double s = a.u.dot(c.b.dir);
      if (std::abs(s) > kKinkEps) {
        sink.dir(c.a, (s > 0 ? 1.0 : -1.0) * c.b.dir);
      }
      return std::abs(s);
    }
    case Form::Height: {
      const double s = (a.q - c.b.point).dot(c.b.dir) - c.x;
      if (std::abs(s) > kKinkEps) {
        sink.point(c.a, (s > 0 ? 1.0 : -1.0) * c.b.dir);
      }
      return std::abs(s);
    }
    case Form::Perpendicular: {
      const Vec3 cr = a.u.cross(c.b.dir);
      const double n = cr.norm();
      if (n > kKinkEps) {
        sink.dir(c.a, c.b.dir.cross(cr / n));
      }
      return n;
    }
    case Form::Downward: {
      sink.dir(c.a, Vec3::UnitZ());
      return a.u.z();
    }
  }
  return 0;
}

// Smooth surrogate: every |.| / ||.|| argument squared; PointsDownward pulls
// the transformed direction to (0,0,-1). Shares minimizers with the exact
// loss whenever the constraints are satisfiable.
double surrogate_loss_grad_one(const Compiled& c, const Mat3& R, const Vec3& t,
                               const GradSink* sink) {
  const SlotState a = transform_slot(c.a, R, t);
  switch (c.form) {
    case Form::Collinear: {
      const SlotState b = transform_slot(c.b, R, t);
      const Vec3 c1 = a.u.cross(b.u);
      const Vec3 d = a.q - b.q;
      const Vec3 c2 = d.cross(b.u);
      const Vec3 s = a.u + b.u;
      if (sink) {
        sink->dir(c.a, 2.0 * b.u.cross(c1));
        sink->dir(c.b, 2.0 * c1.cross(a.u));
        sink->point(c.a, 2.0 * b.u.cross(c2));
        sink->point(c.b, -2.0 * b.u.cross(c2));
        sink->dir(c.b, 2.0 * c2.cross(d));
        sink->dir(c.a, 2.0 * s);
        sink->dir(c.b, 2.0 * s);
      }
      return c1.squaredNorm() + c2.squaredNorm() + s.squaredNorm();
    }
    case Form::TargetAlong: {
      const SlotState b = transform_slot(c.b, R, t);
      const SlotState cc = transform_slot(c.c, R, t);
      const Vec3 d = a.q - cc.q;
      const double s = d.dot(b.u) - c.x;
      const Vec3 cr = d.cross(b.u);
      if (sink) {
        sink->point(c.a, 2.0 * s * b.u);
        sink->point(c.c, -2.0 * s * b.u);
        sink->dir(c.b, 2.0 * s * d);
        sink->point(c.a, 2.0 * b.u.cross(cr));
        sink->point(c.c, -2.0 * b.u.cross(cr));
        sink->dir(c.b, 2.0 * cr.cross(d));
      }
      return s * s + cr.squaredNorm();
    }
    case Form::Parallel: {
      const double s = a.u.dot(c.b.dir);
      if (sink) sink->dir(c.a, 2.0 * s * c.b.dir);
      return s * s;
    }
    case Form::Height: {
      const double s = (a.q - c.b.point).dot(c.b.dir) - c.x;
      if (sink) sink->point(c.a, 2.0 * s * c.b.dir);
      return s * s;
    }
    case Form::Perpendicular: {
      const Vec3 cr = a.u.cross(c.b.dir);
      if (sink) sink->dir(c.a, 2.0 * c.b.dir.cross(cr));
      return cr.squaredNorm();
    }
    case Form::Downward: {
      const Vec3 r = a.u - Vec3(0, 0, -1);
      if (sink) sink->dir(c.a, 2.0 * r);
      return r.squaredNorm();
    }
  }
  return 0;
}

// --- quasi-Newton core ---------------------------------------------------------

using Objective = std::function<double(const Vector6d&, Vector6d*)>;

struct MinimizeResult {
  Vector6d x;
  double f = 0;
  int iterations = 0;
};

// BFGS with backtracking line search; curvature-violating updates are
// skipped and the inverse Hessian resets when the direction turns uphill.
MinimizeResult minimize_bfgs(const Objective& obj, const Vector6d& x0, int max_iterations,
                             double gtol) {
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  MinimizeResult res;
  res.x = x0;
  Vector6d g;
  double f = obj(res.x, &g);
  Mat6 H = Mat6::Identity();

  for (int iter = 0; iter < max_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < gtol || f < 1e-18) break;

    Vector6d d = -(H * g);
    double gd = g.dot(d);
    if (!(gd < 0)) {
      H = Mat6::Identity();
      d = -g;
      gd = g.dot(d);
      if (!(gd < 0)) break;
    }

    double alpha = 1.0;
    double f_new = 0;
    Vector6d g_new;
    Vector6d x_new;
    bool accepted = false;
    for (int ls = 0; ls < 48; ++ls) {
      x_new = res.x + alpha * d;
      f_new = obj(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * gd) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    const Vector6d s = x_new - res.x;
    const Vector6d y = g_new - g;
    res.x = x_new;
    f = f_new;
    g = g_new;
    ++res.iterations;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Mat6 I = Mat6::Identity();
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    if (s.lpNorm<Eigen::Infinity>() < 1e-15) break;
  }
  res.f = f;
  return res;
}

// Translation start that sends the first derivable movable point onto its
// constrained target under the start rotation.
Vec3 initial_translation(const std::vector<Compiled>& compiled, const Mat3& R0) {
  for (const Compiled& c : compiled) {
    if (!c.a.movable) continue;
    switch (c.form) {
      case Form::TargetAlong:
        if (!c.b.movable && !c.c.movable) {
          return c.c.point + c.x * c.b.dir - R0 * c.a.point;
        }
        break;
      case Form::Collinear:
        if (!c.b.movable) {
          return c.b.point - R0 * c.a.point;
        }
        break;
      case Form::Height: {
        const Vec3 n = c.b.dir;
        const double want = c.x + (c.b.point - R0 * c.a.point).dot(n);
        return want * n;
      }
      default:
        break;
    }
  }
  return Vec3::Zero();
}

struct StartPoint {
  Mat3 R;
  Vector6d params;
};

std::vector<StartPoint> make_starts(const std::vector<Compiled>& compiled,
                                    const SolveOptions& options) {
  std::vector<StartPoint> starts;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto add_start = [&](const geom::Rotation& rot) {
    StartPoint sp;
    sp.R = rot.matrix();
    sp.params.head<3>() = rot.axis_angle();
    sp.params.tail<3>() = initial_translation(compiled, sp.R);
    starts.push_back(sp);
  };

  add_start(geom::Rotation::identity());
  for (int i = 0; i < options.random_restarts; ++i) {
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    add_start(geom::Rotation::from_quaternion(q.normalized()));
  }
  return starts;
}

struct SuccessSplit {
  double non_down_sum = 0;
  bool downs_ok = true;
};

SuccessSplit split_losses(const std::vector<Compiled>& compiled,
                          const std::vector<double>& losses, double tolerance) {
  SuccessSplit s;
  for (size_t i = 0; i < compiled.size(); ++i) {
    if (compiled[i].form == Form::Downward) {
      if (losses[i] > -1.0 + tolerance) s.downs_ok = false;
    } else {
      s.non_down_sum += losses[i];
    }
  }
  return s;
}

}  // namespace

geom::Vec3 associated_point(const parts::GeometricElement& e) {
  if (const auto* v = std::get_if<parts::VectorElement>(&e.shape)) {
    return v->anchor_point;
  }
  return std::get<parts::SurfaceElement>(e.shape).center;
}

double constraint_loss(const lang::ResolvedConstraint& c, const std::set<int>& movable_ids,
                       const TableFrame& table, const geom::RigidTransform& t) {
  const Compiled compiled = compile_constraint(c, movable_ids, table);
  return exact_loss_one(compiled, t.rotation.matrix(), t.translation);
}

double total_loss(const SolveProblem& p, const geom::RigidTransform& t) {
  const auto compiled = compile_problem(p);
  const Mat3 R = t.rotation.matrix();
  double sum = 0;
  for (const Compiled& c : compiled) sum += exact_loss_one(c, R, t.translation);
  return sum;
}

geom::RigidTransform transform_from_params(const Vector6d& params) {
  geom::RigidTransform t;
  t.rotation = geom::Rotation::from_axis_angle(params.head<3>());
  t.translation = params.tail<3>();
  return t;
}

Vector6d params_from_transform(const geom::RigidTransform& t) {
  Vector6d p;
  p.head<3>() = t.rotation.axis_angle();
  p.tail<3>() = t.translation;
  return p;
}

Vector6d total_loss_gradient(const SolveProblem& p, const Vector6d& params) {
  const auto compiled = compile_problem(p);
  const Vec3 w = params.head<3>();
  const Vec3 t = params.tail<3>();
  const Mat3 R = geom::Rotation::from_axis_angle(w).matrix();
  const Mat3 Jr = right_jacobian(w);
  Vector6d grad = Vector6d::Zero();
  const GradSink sink{R, Jr, grad};
  for (const Compiled& c : compiled) {
    exact_loss_grad_one(c, R, t, sink);
  }
  return grad;
}

SolveResult solve(const SolveProblem& p, const SolveOptions& options) {
  if (p.constraints.empty()) {
    throw Error(ErrorCode::UnresolvedReference, "solve needs at least one constraint");
  }
  const auto compiled = compile_problem(p);

  const auto exact_obj = [&](const Vector6d& x, Vector6d* grad) -> double {
    const Vec3 w = x.head<3>();
    const Vec3 t = x.tail<3>();
    const Mat3 R = geom::Rotation::from_axis_angle(w).matrix();
    double value = 0;
    if (grad) {
      grad->setZero();
      const Mat3 Jr = right_jacobian(w);
      const GradSink sink{R, Jr, *grad};
      for (const Compiled& c : compiled) value += exact_loss_grad_one(c, R, t, sink);
    } else {
      for (const Compiled& c : compiled) value += exact_loss_one(c, R, t);
    }
    return value;
  };

  const auto surrogate_obj = [&](const Vector6d& x, Vector6d* grad) -> double {
    const Vec3 w = x.head<3>();
    const Vec3 t = x.tail<3>();
    const Mat3 R = geom::Rotation::from_axis_angle(w).matrix();
    double value = 0;
    if (grad) {
      grad->setZero();
      const Mat3 Jr = right_jacobian(w);
      const GradSink sink{R, Jr, *grad};
      for (const Compiled& c : compiled) value += surrogate_loss_grad_one(c, R, t, &sink);
    } else {
      for (const Compiled& c : compiled) value += surrogate_loss_grad_one(c, R, t, nullptr);
    }
    return value;
  };

  const std::vector<StartPoint> starts = make_starts(compiled, options);
  const int n_starts = int(starts.size());

  struct RestartOutcome {
    Vector6d x;
    double residual = 0;
    bool success = false;
    RestartStats stats;
  };
  std::vector<RestartOutcome> outcomes(n_starts);

  // Each restart is independent and internally deterministic, so running them
  // across threads cannot change any result, only the wall time.
#pragma omp parallel for schedule(dynamic) if (options.parallel)
  for (int i = 0; i < n_starts; ++i) {
    RestartOutcome out;
    out.stats.initial_loss = exact_obj(starts[i].params, nullptr);

    // Smooth descent first, then polish on the exact objective.
    MinimizeResult smooth =
        minimize_bfgs(surrogate_obj, starts[i].params, options.max_iterations, 1e-12);
    MinimizeResult exact =
        minimize_bfgs(exact_obj, smooth.x, std::max(20, options.max_iterations / 2), 1e-10);

    out.x = exact.f <= exact_obj(smooth.x, nullptr) ? exact.x : smooth.x;
    out.residual = exact_obj(out.x, nullptr);
    out.stats.final_loss = out.residual;
    out.stats.iterations = smooth.iterations + exact.iterations;

    std::vector<double> losses(compiled.size());
    {
      const geom::RigidTransform t = transform_from_params(out.x);
      const Mat3 R = t.rotation.matrix();
      for (size_t k = 0; k < compiled.size(); ++k) {
        losses[k] = exact_loss_one(compiled[k], R, t.translation);
      }
    }
    const SuccessSplit split = split_losses(compiled, losses, options.tolerance);
    out.success = split.downs_ok && split.non_down_sum <= options.tolerance;
    outcomes[i] = out;
  }

  // Deterministic selection: prefer success, then lowest residual; residuals
  // within 1e-9 of the best count as ties and resolve to the lowest index.
  int best = 0;
  for (int i = 1; i < n_starts; ++i) {
    if (outcomes[i].success != outcomes[best].success) {
      if (outcomes[i].success) best = i;
      continue;
    }
    if (outcomes[i].residual < outcomes[best].residual) best = i;
  }
  for (int i = 0; i < best; ++i) {
    if (outcomes[i].success == outcomes[best].success &&
        outcomes[i].residual <= outcomes[best].residual + 1e-9) {
      best = i;
      break;
    }
  }

  SolveResult result;
  result.transform = transform_from_params(outcomes[best].x);
  result.per_constraint.resize(compiled.size());
  {
    const Mat3 R = result.transform.rotation.matrix();
    for (size_t k = 0; k < compiled.size(); ++k) {
      result.per_constraint[k] = exact_loss_one(compiled[k], R, result.transform.translation);
    }
  }
  result.residual = 0;
  for (double v : result.per_constraint) result.residual += v;
  result.iterations = outcomes[best].stats.iterations;
  result.restarts_used = n_starts;
  result.best_start = best;
  result.converged = outcomes[best].success;
  result.restarts.reserve(n_starts);
  for (const auto& o : outcomes) result.restarts.push_back(o.stats);
  return result;
}

geom::Pose pose_from_transform(const geom::Pose& grasp_pose, const geom::RigidTransform& t) {
  geom::Pose out;
  out.position = t.apply_to_point(grasp_pose.position);
  out.orientation = t.rotation * grasp_pose.orientation;
  return out;
}

}  // namespace copa::solver
