#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "copa/fixtures.hpp"
#include "copa/pipeline.hpp"
#include "copa/render.hpp"
#include "doctest.h"

using namespace copa;
using geom::Vec3;
namespace fs = std::filesystem;

namespace {

struct FixtureDir {
  fs::path dir;
  fixtures::FixtureInfo info;
};

FixtureDir make_fixture(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "copa_pipeline_tests" / name;
  fs::remove_all(dir);
  const auto info = fixtures::generate(name, dir);
  return {dir, info};
}

pipeline::TaskSpec task_for(const FixtureDir& fx, pipeline::Mode mode) {
  pipeline::TaskSpec task;
  task.instruction = fx.info.instruction;
  task.mode = mode;
  task.oracle = oracle::make_oracle((fx.dir / "oracle.json").string());
  return task;
}

}  // namespace

TEST_CASE("the grasp phase picks the best handle candidate") {
  const auto fx = make_fixture("hammer-nail");
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  pipeline::RunReport report;
  const auto result = pipeline::run_grasp_phase(scene, task_for(fx, pipeline::Mode::Full), {},
                                                report);

  CHECK(result.part_id == 2);
  CHECK(result.object_id == 10);
  REQUIRE(report.selection.has_value());

  // brute force over the shipped candidate file
  const auto cands = grasp::load_candidates(fx.dir / "candidates.json");
  const auto& part = scene.parts.at(2);
  const auto& cam = scene.cameras[0].model;
  int want = -1;
  for (size_t i = 0; i < cands.size(); ++i) {
    const auto px = cam.project(cands[i].grasp_point);
    if (!px) continue;
    const int u = int(std::lround(px->x())), v = int(std::lround(px->y()));
    if (!part.mask.in_bounds(u, v) || !part.mask.at(u, v)) continue;
    if (want < 0 || cands[i].score > cands[want].score) want = int(i);
  }
  CHECK(report.selection->chosen_index == want);
  CHECK(report.selection->in_mask_count == 2);
  CHECK(report.counters.grounding_calls_grasp == 2);
}

TEST_CASE("a part with no in-mask candidates is a grasp failure") {
  const auto fx = make_fixture("hammer-nail");
  // point the manifest at a candidate file that misses the handle entirely
  {
    auto doc = json_io::load_json_file(fx.dir / "manifest.json");
    doc["grasp_candidates"] = "bad_candidates.json";
    json_io::save_json_file(fx.dir / "manifest.json", json_io::ojson(doc));
    std::ofstream out(fx.dir / "bad_candidates.json");
    out << R"([{"pose": {"position": [0.2, 0.3, 0.2], "orientation_xyzw": [0, 0, 0, 1]},
                "grasp_point": [0.2, 0.3, 0.07],
                "width": 0.04, "height": 0.02, "depth": 0.03, "score": 0.9}])";
  }
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  pipeline::RunReport report;
  try {
    pipeline::run_grasp_phase(scene, task_for(fx, pipeline::Mode::Full), {}, report);
    FAIL("expected GraspFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GraspFailure);
  }
}

TEST_CASE("the full hammer run solves and plans the strike") {
  const auto fx = make_fixture("hammer-nail");
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  const auto report = pipeline::run(scene, task_for(fx, pipeline::Mode::Full), {});

  // P0 + solved pose + two actions
  REQUIRE(report.pose_sequence.size() == 4);
  CHECK(report.pose_sequence[0].provenance.kind == plan::Provenance::Kind::Grasp);
  CHECK(report.pose_sequence[1].provenance.kind == plan::Provenance::Kind::Solved);
  CHECK(report.pose_sequence[3].gripper == plan::Gripper::Open);

  REQUIRE(report.solve.has_value());
  CHECK(report.solve->converged);
  CHECK(report.solve->residual <= 1e-3);

  // four task-relevant elements were modeled
  CHECK(report.elements.size() == 4);
  CHECK(report.elements.at(2).kind() == parts::PartKind::Slender);
  CHECK(report.elements.at(3).kind() == parts::PartKind::Surface);

  // the strike surface normal was flipped onto the nail axis
  const Vec3 flipped = report.solve->transform.apply_to_vector(
      report.elements.at(1).axis());
  CHECK(flipped.z() < -0.999);

  // audit log covers every oracle call
  CHECK(report.audit.size() == 5);
  CHECK(report.counters.grounding_calls_grasp == 2);
  CHECK(report.counters.grounding_calls_motion == 2);
  CHECK(report.counters.solve_calls == 1);

  // waypoint spacing honors the default max step
  for (size_t i = 1; i < report.waypoints.size(); ++i) {
    CHECK((report.waypoints[i].position - report.waypoints[i - 1].position).norm() <=
          0.02 + 1e-9);
  }
}

TEST_CASE("repeated runs are byte-identical") {
  const auto fx = make_fixture("hammer-nail");
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  const auto a = pipeline::run(scene, task_for(fx, pipeline::Mode::Full), {});
  const auto b = pipeline::run(scene, task_for(fx, pipeline::Mode::Full), {});
  CHECK(a.trajectory_json().dump() == b.trajectory_json().dump());
  CHECK(a.to_json(false).dump() == b.to_json(false).dump());
}

TEST_CASE("replaying the audit log reproduces the trajectory") {
  const auto fx = make_fixture("press-button");
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  const auto report = pipeline::run(scene, task_for(fx, pipeline::Mode::Full), {});

  const auto log = nlohmann::json::parse(report.to_json(false).dump())["oracle_log"];
  pipeline::TaskSpec replay_task;
  replay_task.instruction = fx.info.instruction;
  replay_task.mode = pipeline::Mode::Full;
  replay_task.oracle = std::make_shared<oracle::ReplayOracle>(log);
  const auto replayed = pipeline::run(scene, replay_task, {});

  CHECK(replayed.trajectory_json().dump() == report.trajectory_json().dump());
}

TEST_CASE("no-c2f mode makes exactly one grounding call per phase") {
  const auto fx = make_fixture("hammer-nail");
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  const auto report = pipeline::run(scene, task_for(fx, pipeline::Mode::NoCoarseToFine), {});
  CHECK(report.counters.grounding_calls_grasp == 1);
  CHECK(report.counters.grounding_calls_motion == 1);
  // the plan itself is unchanged
  REQUIRE(report.solve.has_value());
  CHECK(report.solve->residual <= 1e-3);
}

TEST_CASE("rule mode plans without any solve call") {
  const auto fx = make_fixture("open-drawer");
  REQUIRE(fx.info.default_mode == pipeline::Mode::RuleBased);
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  const auto report = pipeline::run(scene, task_for(fx, pipeline::Mode::RuleBased), {});

  CHECK(report.counters.solve_calls == 0);
  CHECK(!report.solve.has_value());
  REQUIRE(report.pose_sequence.size() == 2);  // grasp + single backward pull

  const auto& grasp_pose = report.pose_sequence[0].pose;
  const auto& pulled = report.pose_sequence[1].pose;
  const Vec3 approach = grasp_pose.orientation * Vec3::UnitZ();
  CHECK((pulled.position - (grasp_pose.position - 0.10 * approach)).norm() < 1e-9);
  CHECK(pulled.orientation.angle_to(grasp_pose.orientation) < 1e-12);
}

TEST_CASE("rule mode resolves named targets from the scene") {
  const auto fx = make_fixture("hammer-nail");
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  const auto report = pipeline::run(scene, task_for(fx, pipeline::Mode::RuleBased), {});
  CHECK(report.counters.solve_calls == 0);
  REQUIRE(report.pose_sequence.size() == 3);  // grasp + above-nail + strike
  // first rule step hovers 5 cm above the nail top
  const Vec3 above = report.pose_sequence[1].pose.position;
  CHECK(std::abs(above.z() - 0.17) < 0.002);
  CHECK(std::abs(above.x() - 0.3993) < 0.002);
}

TEST_CASE("the motion phase runs without any candidate source") {
  // phase isolation: motion planning must not touch grasp candidates
  const auto fx = make_fixture("press-button");
  auto doc = json_io::load_json_file(fx.dir / "manifest.json");
  doc.erase("grasp_candidates");
  json_io::save_json_file(fx.dir / "manifest.json", json_io::ojson(doc));
  const auto scene = scene::load_scene(fx.dir / "manifest.json");

  geom::Pose p0;
  p0.position = Vec3(0.25, 0.07, 0.12);
  pipeline::RunReport report;
  const auto steps = pipeline::run_motion_phase(scene, task_for(fx, pipeline::Mode::Full), p0,
                                                1, {}, report);
  CHECK(steps.size() == 2);
  CHECK(report.counters.solve_calls == 1);
}

TEST_CASE("unparseable oracle sentences fail with the offending strings") {
  const auto fx = make_fixture("press-button");
  auto script = json_io::load_json_file(fx.dir / "oracle.json");
  for (auto& entry : script["entries"]) {
    if (entry["phase"] == "constraints") {
      entry["response"]["constraints"] = {"Vector 1 waves at Vector 2."};
    }
  }
  json_io::save_json_file(fx.dir / "oracle.json", json_io::ojson(script));

  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  try {
    pipeline::run(scene, task_for(fx, pipeline::Mode::Full), {});
    FAIL("expected ConstraintParseFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstraintParseFailure);
    CHECK(std::string(e.what()).find("waves at") != std::string::npos);
  }
}

TEST_CASE("missing scene files fail cleanly") {
  CHECK_THROWS_AS(scene::load_scene("/nonexistent/manifest.json"), Error);
}

TEST_CASE("scene validation rejects bad manifests") {
  const auto fx = make_fixture("spoon-into-cup");
  auto doc = json_io::load_json_file(fx.dir / "manifest.json");
  doc["cameras"] = nlohmann::json::array();
  json_io::save_json_file(fx.dir / "bad.json", json_io::ojson(doc));
  CHECK_THROWS_AS(scene::load_scene(fx.dir / "bad.json"), Error);
}

TEST_CASE("render_scene writes one overlay per camera") {
  const auto fx = make_fixture("insert-flower");
  const auto scene = scene::load_scene(fx.dir / "manifest.json");
  const auto report = pipeline::run(scene, task_for(fx, pipeline::Mode::Full), {});

  const auto out = fx.dir / "render";
  const auto files = render::render_scene(scene, report, out);
  REQUIRE(files.size() == 1);
  CHECK(fs::exists(files[0]));
  const auto png = img::read_png(files[0]);
  CHECK(png.width == 640);

  pipeline::RunReport empty;
  CHECK_THROWS_AS(render::render_scene(scene, empty, out), Error);
}

TEST_CASE("COPA_SEED parses from the environment") {
  ::setenv("COPA_SEED", "12345", 1);
  CHECK(pipeline::seed_from_env() == uint64_t(12345));
  ::setenv("COPA_SEED", "abc", 1);
  CHECK_THROWS_AS(pipeline::seed_from_env(), Error);
  ::unsetenv("COPA_SEED");
  CHECK(!pipeline::seed_from_env().has_value());
}

TEST_CASE("run_to_files writes the report and trajectory") {
  const auto fx = make_fixture("spoon-into-cup");
  const auto out = fx.dir / "out";
  const auto report = pipeline::run_to_files(fx.dir / "manifest.json",
                                             task_for(fx, pipeline::Mode::Full), {}, out);
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "trajectory.json"));
  CHECK(report.pose_sequence.size() == 4);  // grasp, solved, down, open
  CHECK(report.pose_sequence.back().gripper == plan::Gripper::Open);

  const auto traj = json_io::load_json_file(out / "trajectory.json");
  CHECK(traj.at("steps").size() == report.pose_sequence.size());
}
