#include <iostream>

#include "CLI11.hpp"
#include "copa/fixtures.hpp"
#include "copa/grasp.hpp"
#include "copa/json_io.hpp"
#include "copa/pipeline.hpp"
#include "copa/render.hpp"
#include "copa/scene.hpp"
#include "copa/solver.hpp"

namespace {

using namespace copa;

// exit codes: 0 success, 2 grasp failure, 3 constraint/solve failure, 4 input error
int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::GraspFailure:
    case ErrorCode::NoCandidateInMask:
    case ErrorCode::EmptyCandidates:
      return 2;
    case ErrorCode::ConstraintParseFailure:
    case ErrorCode::SolveFailure:
      return 3;
    default:
      return 4;
  }
}

solver::SolveProblem problem_from_json(const nlohmann::json& doc) {
  lang::ElementTable table;
  for (const auto& je : doc.at("elements")) {
    parts::GeometricElement e = json_io::element_from_json(je);
    table.emplace(e.id, std::move(e));
  }

  lang::MotionPlan plan;
  for (const auto& js : doc.at("constraints")) {
    plan.constraints.push_back(lang::parse_constraint(js.get<std::string>()));
  }
  const lang::ResolvedPlan resolved = lang::resolve(plan, table);

  solver::SolveProblem problem;
  problem.constraints = resolved.constraints;
  for (const auto& id : doc.at("movable")) problem.movable_ids.insert(id.get<int>());
  if (doc.contains("table")) {
    problem.table.point = json_io::vec3_from_json(doc["table"].at("point"));
    problem.table.normal = geom::UnitVec3(json_io::vec3_from_json(doc["table"].at("normal")));
  }
  return problem;
}

int run_main(int argc, char** argv) {
  CLI::App app{"Part-constraint manipulation planner"};
  app.require_subcommand(1);

  // --- run
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline on a scene");
  std::string run_scene, run_instruction, run_oracle, run_mode = "full", run_out = "out";
  double run_max_step = 0.02;
  run_cmd->add_option("--scene", run_scene, "scene manifest.json")->required();
  run_cmd->add_option("--instruction", run_instruction, "task instruction")->required();
  run_cmd->add_option("--oracle", run_oracle, "oracle script path or http endpoint")->required();
  run_cmd->add_option("--mode", run_mode, "full|no-c2f|rule");
  run_cmd->add_option("--out", run_out, "output directory");
  run_cmd->add_option("--max-step", run_max_step, "waypoint spacing in meters");

  // --- solve
  auto* solve_cmd = app.add_subcommand("solve", "Solve a constraint problem from JSON");
  std::string solve_problem, solve_out;
  solve_cmd->add_option("--problem", solve_problem, "problem JSON file")->required();
  solve_cmd->add_option("--out", solve_out, "write the result here instead of stdout");

  // --- fit-parts
  auto* fit_cmd = app.add_subcommand("fit-parts", "Model every part mask in a scene");
  std::string fit_scene, fit_out;
  fit_cmd->add_option("--scene", fit_scene, "scene manifest.json")->required();
  fit_cmd->add_option("--out", fit_out, "output JSON file")->required();

  // --- grasp
  auto* grasp_cmd = app.add_subcommand("grasp", "Filter and select a grasp for one part");
  std::string grasp_scene;
  int grasp_part = -1;
  grasp_cmd->add_option("--scene", grasp_scene, "scene manifest.json")->required();
  grasp_cmd->add_option("--part", grasp_part, "part id to grasp")->required();

  // --- render
  auto* render_cmd = app.add_subcommand("render", "Render annotated overlays for a report");
  std::string render_scene_path, render_report, render_out = "out";
  render_cmd->add_option("--scene", render_scene_path, "scene manifest.json")->required();
  render_cmd->add_option("--report", render_report, "report.json from a run")->required();
  render_cmd->add_option("--out", render_out, "output directory");

  // --- gen-fixture
  auto* gen_cmd = app.add_subcommand("gen-fixture", "Write a bundled synthetic task scene");
  std::string gen_task, gen_out;
  gen_cmd->add_option("--task", gen_task, "one of: hammer-nail, spoon-into-cup, open-drawer, press-button, insert-flower")
      ->required();
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  const auto seed_override = pipeline::seed_from_env();

  if (*run_cmd) {
    pipeline::TaskSpec task;
    task.instruction = run_instruction;
    task.mode = pipeline::mode_from_name(run_mode);
    task.oracle = oracle::make_oracle(run_oracle);
    pipeline::RunOptions options;
    options.seed_override = seed_override;
    options.max_step = run_max_step;
    const auto report = pipeline::run_to_files(run_scene, task, options, run_out);
    std::cout << "poses: " << report.pose_sequence.size()
              << "  waypoints: " << report.waypoints.size();
    if (report.solve) std::cout << "  residual: " << report.solve->residual;
    std::cout << "\nwrote " << run_out << "/report.json and " << run_out
              << "/trajectory.json\n";
    return 0;
  }

  if (*solve_cmd) {
    const auto doc = json_io::load_json_file(solve_problem);
    solver::SolveProblem problem = problem_from_json(doc);
    solver::SolveOptions options;
    if (doc.contains("seed")) options.seed = doc["seed"].get<uint64_t>();
    if (seed_override) options.seed = *seed_override;
    const solver::SolveResult result = solver::solve(problem, options);

    json_io::ojson out;
    out["transform"] = json_io::transform_to_json(result.transform);
    out["residual"] = result.residual;
    json_io::ojson per = json_io::ojson::array();
    for (size_t i = 0; i < result.per_constraint.size(); ++i) {
      per.push_back(result.per_constraint[i]);
    }
    out["per_constraint"] = std::move(per);
    out["iterations"] = result.iterations;
    out["restarts_used"] = result.restarts_used;
    out["converged"] = result.converged;
    if (!solve_out.empty()) {
      json_io::save_json_file(solve_out, out);
    } else {
      std::cout << out.dump(2) << "\n";
    }
    return result.converged ? 0 : 3;
  }

  if (*fit_cmd) {
    const scene::Scene scn = scene::load_scene(fit_scene);
    json_io::ojson elements = json_io::ojson::array();
    std::vector<parts::GeometricElement> modeled;
    for (const auto& [id, part] : scn.parts) {
      const img::Mask& arm = scn.cameras[part.camera].arm_mask;
      if (parts::filter_arm_masks({part}, arm).empty()) continue;
      parts::GeometricElement e = pipeline::model_part(scn, id);
      elements.push_back(json_io::element_to_json(e));
      modeled.push_back(std::move(e));
    }
    json_io::ojson out;
    out["elements"] = std::move(elements);
    if (!modeled.empty()) {
      out["annotations"] =
          json_io::annotation_to_json(parts::annotate(modeled, scn.cameras[0].model));
    }
    json_io::save_json_file(fit_out, out);
    std::cout << "modeled " << modeled.size() << " parts -> " << fit_out << "\n";
    return 0;
  }

  if (*grasp_cmd) {
    const scene::Scene scn = scene::load_scene(grasp_scene);
    const auto it = scn.parts.find(grasp_part);
    if (it == scn.parts.end()) {
      throw Error(ErrorCode::UnknownLabel, "no part with id " + std::to_string(grasp_part));
    }
    pipeline::RunOptions options;
    options.seed_override = seed_override;
    const auto candidates = pipeline::obtain_candidates(scn, grasp_part, options);
    const auto selection =
        grasp::filter_and_select(candidates, it->second, scn.cameras[it->second.camera].model);
    json_io::ojson out;
    out["chosen_index"] = selection.chosen_index;
    out["in_mask_count"] = selection.in_mask_count;
    out["total_count"] = selection.total_count;
    out["pose"] = json_io::pose_to_json(selection.chosen.pose);
    out["grasp_point"] = json_io::vec3_to_json(selection.chosen.grasp_point);
    out["score"] = selection.chosen.score;
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  if (*render_cmd) {
    const scene::Scene scn = scene::load_scene(render_scene_path);
    const auto doc = json_io::load_json_file(render_report);
    pipeline::RunReport report;
    for (const auto& je : doc.at("elements")) {
      parts::GeometricElement e = json_io::element_from_json(je);
      report.elements.emplace(e.id, std::move(e));
    }
    if (doc.contains("pose_sequence")) {
      for (const auto& js : doc["pose_sequence"]) {
        plan::PoseStep step;
        step.pose = json_io::pose_from_json(js.at("pose"));
        report.pose_sequence.push_back(std::move(step));
      }
    }
    if (doc.contains("waypoints")) {
      for (const auto& jw : doc["waypoints"]) {
        report.waypoints.push_back(json_io::pose_from_json(jw));
      }
    }
    const auto files = render::render_scene(scn, report, render_out);
    for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
    return 0;
  }

  if (*gen_cmd) {
    const auto info = fixtures::generate(gen_task, gen_out);
    std::cout << "wrote scene to " << gen_out << "\n"
              << "run it with:\n"
              << "  copa run --scene " << gen_out << "/manifest.json --instruction \""
              << info.instruction << "\" --oracle " << gen_out << "/oracle.json --mode "
              << pipeline::mode_name(info.default_mode) << " --out " << gen_out << "/out\n";
    return 0;
  }

  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
