#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "copa/post_grasp.hpp"
#include "doctest.h"

using namespace copa;
using geom::Vec3;
using plan::Gripper;

namespace {

geom::Pose pose_at(double x, double y, double z) {
  geom::Pose p;
  p.position = Vec3(x, y, z);
  return p;
}

geom::Pose tilted_pose() {
  geom::Pose p;
  p.position = Vec3(0.4, -0.1, 0.3);
  p.orientation = geom::Rotation::from_axis_angle(Vec3(0.2, 0.5, -0.1));
  return p;
}

}  // namespace

TEST_CASE("moving vertically down only changes z") {
  const auto before = tilted_pose();
  const auto step = plan::apply_action(before, lang::MoveVerticallyDown{0.07});
  CHECK(step.pose.position.z() == before.position.z() - 0.07);
  CHECK(step.pose.position.x() == before.position.x());
  CHECK(step.pose.position.y() == before.position.y());
  CHECK(step.pose.orientation.quaternion().coeffs() ==
        before.orientation.quaternion().coeffs());
  CHECK(step.gripper == Gripper::Hold);
}

TEST_CASE("moving forward follows the approach axis") {
  geom::Pose straight = pose_at(0.2, 0.2, 0.3);  // identity orientation: approach +z
  const auto step = plan::apply_action(straight, lang::MoveForward{0.10});
  CHECK((step.pose.position - Vec3(0.2, 0.2, 0.4)).norm() < 1e-12);

  const auto before = tilted_pose();
  const auto tilted_step = plan::apply_action(before, lang::MoveForward{0.10});
  const Vec3 approach = before.orientation * Vec3::UnitZ();
  CHECK((tilted_step.pose.position - (before.position + 0.10 * approach)).norm() < 1e-12);
  CHECK(tilted_step.pose.orientation.quaternion().coeffs() ==
        before.orientation.quaternion().coeffs());
}

TEST_CASE("opening the gripper leaves the pose alone") {
  const auto before = tilted_pose();
  const auto step = plan::apply_action(before, lang::OpenGripper{});
  CHECK(step.pose.position == before.position);
  CHECK(step.gripper == Gripper::Open);
}

TEST_CASE("the 180-degree wrist flip is an involution") {
  const auto before = tilted_pose();
  const auto once = plan::apply_action(before, lang::RotateEndEffector180{});
  CHECK(once.pose.orientation.angle_to(before.orientation) > 3.0);
  const auto twice = plan::apply_action(once.pose, lang::RotateEndEffector180{});
  CHECK(twice.pose.orientation.angle_to(before.orientation) < 1e-9);
  // the approach axis itself is unchanged by a rotation about it
  const Vec3 a0 = before.orientation * Vec3::UnitZ();
  const Vec3 a1 = once.pose.orientation * Vec3::UnitZ();
  CHECK((a0 - a1).norm() < 1e-12);
}

TEST_CASE("plan_post_grasp folds actions in order") {
  const auto p1 = pose_at(0.5, 0, 0.30);

  const auto empty = plan::plan_post_grasp(p1, {});
  REQUIRE(empty.size() == 1);
  CHECK(empty[0].provenance.kind == plan::Provenance::Kind::Solved);

  const std::vector<lang::SubsequentAction> actions = {lang::MoveVerticallyDown{0.07},
                                                       lang::OpenGripper{}};
  const auto steps = plan::plan_post_grasp(p1, actions);
  REQUIRE(steps.size() == 3);
  CHECK(steps[1].pose.position.z() == doctest::Approx(0.23));
  CHECK(steps[2].gripper == Gripper::Open);
  CHECK(steps[2].pose.position == steps[1].pose.position);
  CHECK(steps[1].provenance.kind == plan::Provenance::Kind::Action);
  CHECK(steps[1].provenance.text == "Move vertically down 7 cm.");

  const auto twice = plan::plan_post_grasp(
      p1, {lang::MoveVerticallyDown{0.05}, lang::MoveVerticallyDown{0.05}});
  CHECK(twice.back().pose.position.z() == doctest::Approx(0.20));
}

TEST_CASE("rule instructions parse into tasks") {
  auto hammer = plan::parse_rule_instruction("Hammer the nail.");
  REQUIRE(hammer.has_value());
  CHECK(hammer->kind == plan::RuleKind::Hammer);
  CHECK(hammer->slot_a == "the nail");

  auto press = plan::parse_rule_instruction("Press the button with the stick.");
  REQUIRE(press.has_value());
  CHECK(press->kind == plan::RuleKind::Press);
  CHECK(press->slot_a == "the button");
  CHECK(press->slot_b == "the stick");

  auto pour = plan::parse_rule_instruction("Pour water from kettle to funnel.");
  REQUIRE(pour.has_value());
  CHECK(pour->kind == plan::RuleKind::Pour);
  CHECK(pour->slot_b == "funnel");

  auto put = plan::parse_rule_instruction("Put eraser into the drawer.");
  REQUIRE(put.has_value());
  CHECK(put->kind == plan::RuleKind::PutInto);

  CHECK(plan::parse_rule_instruction("Open the drawer.").has_value());
  CHECK(!plan::parse_rule_instruction("Wave hello.").has_value());
}

TEST_CASE("rule plans emit the fixed step tables") {
  geom::Pose grasp = pose_at(0.5, 0.1, 0.25);

  plan::RuleTask hammer{plan::RuleKind::Hammer, "the nail", "", Vec3(0.4, 0.1, 0.10)};
  const auto hammer_steps = plan::plan_rule_based(hammer, grasp);
  REQUIRE(hammer_steps.size() == 2);
  CHECK((hammer_steps[0].pose.position - Vec3(0.4, 0.1, 0.15)).norm() < 1e-12);
  CHECK(hammer_steps[1].pose.position.z() == doctest::Approx(0.09));
  CHECK(hammer_steps[0].provenance.kind == plan::Provenance::Kind::Rule);

  plan::RuleTask press{plan::RuleKind::Press, "the button", "the stick", Vec3(0.6, 0, 0.12)};
  const auto press_steps = plan::plan_rule_based(press, grasp);
  REQUIRE(press_steps.size() == 2);
  CHECK((press_steps[0].pose.position - Vec3(0.6, 0, 0.17)).norm() < 1e-12);
  CHECK(press_steps[1].pose.position.z() == doctest::Approx(0.11));

  // identity orientation: approach is +z, so backward is straight down here
  plan::RuleTask open{plan::RuleKind::Open, "the drawer", "", std::nullopt};
  const auto open_steps = plan::plan_rule_based(open, grasp);
  REQUIRE(open_steps.size() == 1);
  CHECK((open_steps[0].pose.position - (grasp.position - Vec3(0, 0, 0.10))).norm() < 1e-12);
  CHECK(open_steps[0].pose.orientation.angle_to(grasp.orientation) < 1e-12);

  plan::RuleTask pour{plan::RuleKind::Pour, "kettle", "cup", Vec3(0.5, -0.2, 0.12)};
  const auto pour_steps = plan::plan_rule_based(pour, grasp);
  REQUIRE(pour_steps.size() == 2);
  CHECK((pour_steps[0].pose.position - Vec3(0.5, -0.2, 0.17)).norm() < 1e-12);
  CHECK(pour_steps[1].pose.orientation.angle_to(grasp.orientation) > 3.0);

  plan::RuleTask put{plan::RuleKind::PutInto, "eraser", "drawer", Vec3(0.5, -0.2, 0.12)};
  const auto put_steps = plan::plan_rule_based(put, grasp);
  REQUIRE(put_steps.size() == 2);
  CHECK((put_steps[0].pose.position - Vec3(0.5, -0.2, 0.17)).norm() < 1e-12);
  CHECK(put_steps[1].gripper == Gripper::Open);
  CHECK(put_steps[1].pose.position == put_steps[0].pose.position);

  plan::RuleTask missing{plan::RuleKind::Hammer, "the nail", "", std::nullopt};
  CHECK_THROWS_AS(plan::plan_rule_based(missing, grasp), Error);
}

TEST_CASE("interpolation keeps the spacing bound and the original poses") {
  std::vector<plan::PoseStep> steps;
  steps.push_back({pose_at(0, 0, 0.3), Gripper::Hold, {}});
  steps.push_back({pose_at(0.10, 0, 0.3), Gripper::Hold, {}});

  const auto waypoints = plan::interpolate(steps, 0.02);
  CHECK(waypoints.size() >= 6);
  CHECK(waypoints.front().position == steps[0].pose.position);
  CHECK(waypoints.back().position == steps[1].pose.position);
  for (size_t i = 1; i < waypoints.size(); ++i) {
    CHECK((waypoints[i].position - waypoints[i - 1].position).norm() <= 0.02 + 1e-12);
  }

  const auto single = plan::interpolate({steps[0]}, 0.02);
  REQUIRE(single.size() == 1);
  CHECK(single[0].position == steps[0].pose.position);

  std::vector<plan::PoseStep> coincident = {steps[0], steps[0]};
  CHECK(plan::interpolate(coincident, 0.02).size() == 2);

  CHECK_THROWS_AS(plan::interpolate(steps, 0.0), Error);
}

TEST_CASE("interpolation slerps the orientation") {
  std::vector<plan::PoseStep> steps;
  geom::Pose a = pose_at(0, 0, 0.3);
  geom::Pose b = pose_at(0.1, 0, 0.3);
  b.orientation = geom::Rotation::from_axis_angle(Vec3(0, 0, M_PI / 2));
  steps.push_back({a, Gripper::Hold, {}});
  steps.push_back({b, Gripper::Hold, {}});
  const auto waypoints = plan::interpolate(steps, 0.025);
  REQUIRE(waypoints.size() == 5);
  // halfway along the segment the rotation is half done
  CHECK(waypoints[2].orientation.angle_to(geom::Rotation::identity()) ==
        doctest::Approx(M_PI / 4).epsilon(1e-9));
}
