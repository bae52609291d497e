#include "copa/post_grasp.hpp"

#include <cctype>
#include <cmath>

namespace copa::plan {

namespace {

geom::Vec3 approach_axis(const geom::Pose& pose) {
  return pose.orientation * geom::Vec3::UnitZ();
}

std::string normalize_instruction(std::string_view text) {
  std::string out;
  bool last_space = true;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!last_space) {
        out.push_back(' ');
        last_space = true;
      }
    } else {
      out.push_back(char(std::tolower(c)));
      last_space = false;
    }
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == '.')) out.pop_back();
  return out;
}

constexpr double kHoverAbove = 0.05;   // "Move ... to 5 cm above ..."
constexpr double kStrikeDown = 0.06;   // "Move vertically down 6 cm."
constexpr double kPullBack = 0.10;     // "Move backward 10 cm."

}  // namespace

PoseStep apply_action(const geom::Pose& current, const lang::SubsequentAction& action) {
  PoseStep step;
  step.pose = current;
  step.gripper = Gripper::Hold;
  step.provenance = {Provenance::Kind::Action, lang::format(action)};

  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, lang::MoveVerticallyDown>) {
          step.pose.position.z() -= a.distance_m;
        } else if constexpr (std::is_same_v<T, lang::MoveForward>) {
          step.pose.position += a.distance_m * approach_axis(current);
        } else if constexpr (std::is_same_v<T, lang::OpenGripper>) {
          step.gripper = Gripper::Open;
        } else {
          static_assert(std::is_same_v<T, lang::RotateEndEffector180>);
          step.pose.orientation =
              current.orientation *
              geom::Rotation::from_axis_angle(geom::Vec3(0, 0, M_PI));
        }
      },
      action);
  return step;
}

std::vector<PoseStep> plan_post_grasp(const geom::Pose& p1,
                                      const std::vector<lang::SubsequentAction>& actions) {
  std::vector<PoseStep> steps;
  steps.reserve(actions.size() + 1);
  steps.push_back({p1, Gripper::Hold, {Provenance::Kind::Solved, ""}});
  for (const auto& action : actions) {
    steps.push_back(apply_action(steps.back().pose, action));
  }
  return steps;
}

std::optional<RuleTask> parse_rule_instruction(std::string_view instruction) {
  const std::string s = normalize_instruction(instruction);
  auto starts = [&](const char* prefix) { return s.rfind(prefix, 0) == 0; };

  RuleTask task;
  if (starts("hammer ")) {
    task.kind = RuleKind::Hammer;
    task.slot_a = s.substr(7);
    return task;
  }
  if (starts("press ")) {
    const size_t with = s.rfind(" with ");
    if (with == std::string::npos || with <= 6) return std::nullopt;
    task.kind = RuleKind::Press;
    task.slot_a = s.substr(6, with - 6);
    task.slot_b = s.substr(with + 6);
    return task;
  }
  if (starts("open ")) {
    task.kind = RuleKind::Open;
    task.slot_a = s.substr(5);
    return task;
  }
  if (starts("pour water from ")) {
    const size_t to = s.rfind(" to ");
    if (to == std::string::npos || to <= 16) return std::nullopt;
    task.kind = RuleKind::Pour;
    task.slot_a = s.substr(16, to - 16);
    task.slot_b = s.substr(to + 4);
    return task;
  }
  if (starts("put ")) {
    const size_t into = s.rfind(" into ");
    if (into == std::string::npos || into <= 4) return std::nullopt;
    task.kind = RuleKind::PutInto;
    task.slot_a = s.substr(4, into - 4);
    task.slot_b = s.substr(into + 6);
    return task;
  }
  return std::nullopt;
}

std::optional<std::string> rule_target_slot(const RuleTask& task) {
  switch (task.kind) {
    case RuleKind::Hammer:
    case RuleKind::Press:
      return task.slot_a;
    case RuleKind::Pour:
    case RuleKind::PutInto:
      return task.slot_b;
    case RuleKind::Open:
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<PoseStep> plan_rule_based(const RuleTask& task, const geom::Pose& grasp_pose) {
  auto rule_step = [](const geom::Pose& pose, Gripper gripper, std::string text) {
    return PoseStep{pose, gripper, {Provenance::Kind::Rule, std::move(text)}};
  };
  auto hover_pose = [&](const geom::Vec3& target) {
    geom::Pose pose = grasp_pose;
    pose.position = geom::Vec3(target.x(), target.y(), target.z() + kHoverAbove);
    return pose;
  };
  auto require_target = [&]() -> const geom::Vec3& {
    if (!task.target) {
      throw Error(ErrorCode::UnresolvedReference, "rule task has no resolved target position");
    }
    return *task.target;
  };

  std::vector<PoseStep> steps;
  switch (task.kind) {
    case RuleKind::Hammer: {
      const geom::Pose above = hover_pose(require_target());
      steps.push_back(rule_step(above, Gripper::Hold, "Move hammer to 5 cm above A."));
      geom::Pose down = above;
      down.position.z() -= kStrikeDown;
      steps.push_back(rule_step(down, Gripper::Hold, "Move vertically down 6 cm."));
      break;
    }
    case RuleKind::Press: {
      const geom::Pose above = hover_pose(require_target());
      steps.push_back(rule_step(above, Gripper::Hold, "Move B to 5 cm above A."));
      geom::Pose down = above;
      down.position.z() -= kStrikeDown;
      steps.push_back(rule_step(down, Gripper::Hold, "Move vertically down 6 cm."));
      break;
    }
    case RuleKind::Open: {
      geom::Pose back = grasp_pose;
      back.position -= kPullBack * approach_axis(grasp_pose);
      steps.push_back(rule_step(back, Gripper::Hold, "Move backward 10 cm."));
      break;
    }
    case RuleKind::Pour: {
      const geom::Pose above = hover_pose(require_target());
      steps.push_back(rule_step(above, Gripper::Hold, "Move A to 5 cm above B."));
      geom::Pose rotated = above;
      rotated.orientation =
          above.orientation * geom::Rotation::from_axis_angle(geom::Vec3(0, 0, M_PI));
      steps.push_back(rule_step(rotated, Gripper::Hold, "End-effector rotates 180 degrees."));
      break;
    }
    case RuleKind::PutInto: {
      const geom::Pose above = hover_pose(require_target());
      steps.push_back(rule_step(above, Gripper::Hold, "Move A to 5 cm above B."));
      steps.push_back(rule_step(above, Gripper::Open, "Open the gripper."));
      break;
    }
  }
  return steps;
}

std::vector<geom::Pose> interpolate(const std::vector<PoseStep>& steps, double max_step) {
  if (!(max_step > 0)) {
    throw Error(ErrorCode::SchemaError, "max_step must be positive");
  }
  std::vector<geom::Pose> waypoints;
  if (steps.empty()) return waypoints;
  waypoints.push_back(steps.front().pose);
  for (size_t i = 1; i < steps.size(); ++i) {
    const geom::Pose& a = steps[i - 1].pose;
    const geom::Pose& b = steps[i].pose;
    const double dist = (b.position - a.position).norm();
    const int segments = dist > 0 ? int(std::ceil(dist / max_step)) : 1;
    const Eigen::Quaterniond qa = a.orientation.quaternion();
    const Eigen::Quaterniond qb = b.orientation.quaternion();
    for (int k = 1; k < segments; ++k) {
      const double t = double(k) / segments;
      geom::Pose mid;
      mid.position = (1.0 - t) * a.position + t * b.position;
      mid.orientation = geom::Rotation::from_quaternion(qa.slerp(t, qb));
      waypoints.push_back(mid);
    }
    waypoints.push_back(b);
  }
  return waypoints;
}

}  // namespace copa::plan
