#pragma once

#include <optional>
#include <string>
#include <vector>

#include "copa/constraint_lang.hpp"
#include "copa/geometry.hpp"

namespace copa::plan {

enum class Gripper { Hold, Open };

struct Provenance {
  enum class Kind { Grasp, Solved, Action, Rule };
  Kind kind = Kind::Solved;
  std::string text;  // action / rule-step sentence where applicable
};

struct PoseStep {
  geom::Pose pose;
  Gripper gripper = Gripper::Hold;
  Provenance provenance;
};

/// One pose edit. The gripper approach direction is the end-effector frame's
/// +z axis; "forward" moves along it in world coordinates.
PoseStep apply_action(const geom::Pose& current, const lang::SubsequentAction& action);

/// P1 followed by one step per action; length is 1 + actions.size().
std::vector<PoseStep> plan_post_grasp(const geom::Pose& p1,
                                      const std::vector<lang::SubsequentAction>& actions);

enum class RuleKind { Hammer, Press, Open, Pour, PutInto };

/// Rule-based instruction, slots as free text plus the resolved target
/// position where the rule needs one.
struct RuleTask {
  RuleKind kind = RuleKind::Hammer;
  std::string slot_a;
  std::string slot_b;
  std::optional<geom::Vec3> target;
};

/// Matches the five rule instruction formats ("Hammer A.", "Press A with B.",
/// "Open A.", "Pour water from A to B.", "Put A into B."); nullopt when the
/// text fits none of them.
std::optional<RuleTask> parse_rule_instruction(std::string_view instruction);

/// Which slot names the target whose position the rule needs (A for
/// Hammer/Press, B for Pour/PutInto, none for Open).
std::optional<std::string> rule_target_slot(const RuleTask& task);

/// Fixed step table per rule kind; throws when a required target is missing.
std::vector<PoseStep> plan_rule_based(const RuleTask& task, const geom::Pose& grasp_pose);

/// Densifies a step sequence: linear position interpolation plus spherical
/// orientation interpolation so consecutive waypoints are at most `max_step`
/// apart. Original poses appear exactly.
std::vector<geom::Pose> interpolate(const std::vector<PoseStep>& steps, double max_step);

}  // namespace copa::plan
