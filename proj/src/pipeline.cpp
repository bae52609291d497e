#include "copa/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <set>

namespace copa::pipeline {

namespace {

using json_io::ojson;

constexpr uint64_t kDefaultSeed = 0xC0FA5EED;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Oracle wrapper that records every exchange into the report and counts
// grounding calls per pipeline phase.
class AuditingOracle {
 public:
  AuditingOracle(oracle::Oracle& inner, RunReport& report) : inner_(inner), report_(report) {}

  void set_phase(const std::string& phase) { phase_ = phase; }

  oracle::GroundingResponse ground(const oracle::GroundingRequest& request) {
    const auto response = inner_.ground(request);
    oracle::AuditEntry entry;
    entry.pipeline_phase = phase_;
    entry.kind = "ground";
    entry.request = oracle::grounding_request_to_json(request);
    entry.response = oracle::grounding_response_to_json(response);
    report_.audit.push_back(std::move(entry));
    if (phase_ == "grasp") {
      ++report_.counters.grounding_calls_grasp;
    } else {
      ++report_.counters.grounding_calls_motion;
    }
    return response;
  }

  oracle::ConstraintResponse generate_constraints(const oracle::ConstraintRequest& request) {
    const auto response = inner_.generate_constraints(request);
    oracle::AuditEntry entry;
    entry.pipeline_phase = phase_;
    entry.kind = "constraints";
    entry.request = oracle::constraint_request_to_json(request);
    entry.response = oracle::constraint_response_to_json(response);
    report_.audit.push_back(std::move(entry));
    return response;
  }

 private:
  oracle::Oracle& inner_;
  RunReport& report_;
  std::string phase_ = "grasp";
};

[[noreturn]] void fail(ErrorCode code, const std::string& stage, const std::string& what) {
  throw Error(code, stage + ": " + what);
}

/// Part masks that survive the arm filter, in ascending id order.
std::vector<int> arm_filtered_part_ids(const scene::Scene& scene) {
  std::vector<int> out;
  for (const auto& [id, part] : scene.parts) {
    const img::Mask& arm = scene.cameras[part.camera].arm_mask;
    const auto kept = parts::filter_arm_masks({part}, arm);
    if (!kept.empty()) out.push_back(id);
  }
  return out;
}

std::vector<int> object_ids_with_parts(const scene::Scene& scene,
                                       const std::vector<int>& part_ids) {
  std::vector<int> out;
  for (const scene::SceneObject& obj : scene.objects) {
    const bool any = std::any_of(obj.part_ids.begin(), obj.part_ids.end(), [&](int id) {
      return std::find(part_ids.begin(), part_ids.end(), id) != part_ids.end();
    });
    if (any) out.push_back(obj.id);
  }
  return out;
}

std::vector<int> parts_of_objects(const scene::Scene& scene, const std::vector<int>& object_ids,
                                  const std::vector<int>& surviving) {
  std::vector<int> out;
  for (int oid : object_ids) {
    const scene::SceneObject* obj = scene.object_by_id(oid);
    if (!obj) continue;
    for (int pid : obj->part_ids) {
      if (std::find(surviving.begin(), surviving.end(), pid) != surviving.end()) {
        out.push_back(pid);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string image_ref_for(const scene::Scene&, int camera, const char* stage) {
  return std::string(stage) + ":cam" + std::to_string(camera);
}

std::string lower(std::string_view text) {
  std::string out;
  for (char c : text) out.push_back(char(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string strip_article(std::string text) {
  for (const char* article : {"the ", "a ", "an "}) {
    if (text.rfind(article, 0) == 0) return text.substr(std::string(article).size());
  }
  return text;
}

bool name_matches(const std::string& name, const std::string& slot) {
  if (name.empty() || slot.empty()) return false;
  const std::string n = strip_article(lower(name));
  const std::string s = strip_article(lower(slot));
  return n.find(s) != std::string::npos || s.find(n) != std::string::npos;
}

}  // namespace

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::Full: return "full";
    case Mode::NoCoarseToFine: return "no-c2f";
    case Mode::RuleBased: return "rule";
  }
  return "full";
}

Mode mode_from_name(const std::string& name) {
  if (name == "full") return Mode::Full;
  if (name == "no-c2f") return Mode::NoCoarseToFine;
  if (name == "rule") return Mode::RuleBased;
  throw Error(ErrorCode::SchemaError, "unknown mode '" + name + "' (full|no-c2f|rule)");
}

std::optional<uint64_t> seed_from_env() {
  const char* env = std::getenv("COPA_SEED");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') {
    throw Error(ErrorCode::SchemaError, "COPA_SEED must be an unsigned integer");
  }
  return uint64_t(v);
}

parts::GeometricElement model_part(const scene::Scene& scene, int part_id) {
  const auto it = scene.parts.find(part_id);
  if (it == scene.parts.end()) {
    throw Error(ErrorCode::UnknownLabel, "no part with id " + std::to_string(part_id));
  }
  const parts::PartMask& part = it->second;
  const geom::CameraModel& cam = scene.cameras[part.camera].model;
  const geom::DepthImage& depth = scene.cameras[part.camera].depth;

  parts::GeometricElement element;
  element.id = part.id;
  element.name = part.name;
  if (parts::classify_part(part) == parts::PartKind::Slender) {
    element.shape = parts::fit_vector(part, depth, cam, scene.arm_reference);
  } else {
    const geom::UnitVec3 view_dir(cam.world_from_camera().rotation * geom::Vec3::UnitZ());
    element.shape = parts::fit_surface(part, depth, cam, view_dir);
  }
  return element;
}

std::vector<grasp::GraspCandidate> obtain_candidates(const scene::Scene& scene, int part_id,
                                                     const RunOptions& options) {
  if (std::holds_alternative<std::filesystem::path>(scene.grasp_source)) {
    return grasp::load_candidates(std::get<std::filesystem::path>(scene.grasp_source));
  }
  if (std::holds_alternative<scene::SynthSpec>(scene.grasp_source)) {
    const auto& spec = std::get<scene::SynthSpec>(scene.grasp_source);
    const uint64_t seed = options.seed_override.value_or(spec.seed);
    return grasp::synth_candidates(model_part(scene, part_id), spec.n, seed);
  }
  throw Error(ErrorCode::EmptyCandidates, "scene declares no grasp candidate source");
}

GraspPhaseResult run_grasp_phase(const scene::Scene& scene, const TaskSpec& task,
                                 const RunOptions& options, RunReport& report) {
  if (!task.oracle) {
    throw Error(ErrorCode::InvalidScene, "task has no oracle");
  }
  AuditingOracle oracle(*task.oracle, report);
  oracle.set_phase("grasp");

  try {
    const std::vector<int> surviving = arm_filtered_part_ids(scene);
    if (surviving.empty()) {
      fail(ErrorCode::GraspFailure, "grasp phase", "no part masks survive the arm filter");
    }

    int part_id = -1;
    if (task.mode == Mode::NoCoarseToFine) {
      oracle::GroundingRequest req;
      req.phase = oracle::GroundPhase::FinePart;
      req.purpose = oracle::GroundPurpose::Grasping;
      req.instruction = task.instruction;
      req.image_ref = image_ref_for(scene, 0, "scene");
      req.candidates = surviving;
      const auto resp = oracle.ground(req);
      if (resp.selected.size() != 1) {
        fail(ErrorCode::GraspFailure, "grasp phase", "expected exactly one grasping part");
      }
      part_id = resp.selected.front();
    } else {
      oracle::GroundingRequest coarse;
      coarse.phase = oracle::GroundPhase::CoarseObject;
      coarse.purpose = oracle::GroundPurpose::Grasping;
      coarse.instruction = task.instruction;
      coarse.image_ref = image_ref_for(scene, 0, "scene");
      coarse.candidates = object_ids_with_parts(scene, surviving);
      const auto object_resp = oracle.ground(coarse);
      if (object_resp.selected.size() != 1) {
        fail(ErrorCode::GraspFailure, "grasp phase", "expected exactly one grasping object");
      }

      oracle::GroundingRequest fine;
      fine.phase = oracle::GroundPhase::FinePart;
      fine.purpose = oracle::GroundPurpose::Grasping;
      fine.instruction = task.instruction;
      fine.image_ref = image_ref_for(scene, 0, "crop");
      fine.candidates = parts_of_objects(scene, object_resp.selected, surviving);
      if (fine.candidates.empty()) {
        fail(ErrorCode::GraspFailure, "grasp phase", "selected object has no usable parts");
      }
      const auto part_resp = oracle.ground(fine);
      if (part_resp.selected.size() != 1) {
        fail(ErrorCode::GraspFailure, "grasp phase", "expected exactly one grasping part");
      }
      part_id = part_resp.selected.front();
    }

    const auto part_it = scene.parts.find(part_id);
    if (part_it == scene.parts.end()) {
      fail(ErrorCode::GraspFailure, "grasp phase", "grounded part is not in the scene");
    }

    const auto candidates = obtain_candidates(scene, part_id, options);
    const auto selection = grasp::filter_and_select(
        candidates, part_it->second, scene.cameras[part_it->second.camera].model);

    const scene::SceneObject* object = scene.object_of_part(part_id);
    GraspPhaseResult result;
    result.p0 = selection.chosen.pose;
    result.part_id = part_id;
    result.object_id = object ? object->id : -1;

    report.selection = selection;
    report.grasp_part_id = part_id;
    report.grasp_object_id = result.object_id;
    return result;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::GraspFailure) throw;
    throw Error(ErrorCode::GraspFailure, std::string("grasp phase: ") + e.what());
  }
}

namespace {

std::vector<int> ground_task_parts(const scene::Scene& scene, const TaskSpec& task,
                                   AuditingOracle& oracle) {
  const std::vector<int> surviving = arm_filtered_part_ids(scene);

  if (task.mode == Mode::NoCoarseToFine) {
    oracle::GroundingRequest req;
    req.phase = oracle::GroundPhase::FinePart;
    req.purpose = oracle::GroundPurpose::TaskRelevant;
    req.instruction = task.instruction;
    req.image_ref = image_ref_for(scene, 0, "scene");
    req.candidates = surviving;
    auto resp = oracle.ground(req);
    std::sort(resp.selected.begin(), resp.selected.end());
    return resp.selected;
  }

  oracle::GroundingRequest coarse;
  coarse.phase = oracle::GroundPhase::CoarseObject;
  coarse.purpose = oracle::GroundPurpose::TaskRelevant;
  coarse.instruction = task.instruction;
  coarse.image_ref = image_ref_for(scene, 0, "scene");
  coarse.candidates = object_ids_with_parts(scene, surviving);
  const auto object_resp = oracle.ground(coarse);
  if (object_resp.selected.empty()) {
    fail(ErrorCode::SolveFailure, "motion phase", "no task-relevant object selected");
  }

  oracle::GroundingRequest fine;
  fine.phase = oracle::GroundPhase::FinePart;
  fine.purpose = oracle::GroundPurpose::TaskRelevant;
  fine.instruction = task.instruction;
  fine.image_ref = image_ref_for(scene, 0, "crop");
  fine.candidates = parts_of_objects(scene, object_resp.selected, surviving);
  if (fine.candidates.empty()) {
    fail(ErrorCode::SolveFailure, "motion phase", "task-relevant objects have no usable parts");
  }
  auto resp = oracle.ground(fine);
  std::sort(resp.selected.begin(), resp.selected.end());
  return resp.selected;
}

std::vector<plan::PoseStep> rule_based_motion(const scene::Scene& scene, const TaskSpec& task,
                                              const geom::Pose& p0, int grasp_part_id,
                                              RunReport& report) {
  auto rule = plan::parse_rule_instruction(task.instruction);
  if (!rule) {
    throw Error(ErrorCode::SchemaError,
                "rule mode needs an instruction matching one of the rule formats");
  }

  const auto slot = plan::rule_target_slot(*rule);
  if (slot) {
    const scene::SceneObject* grasped = scene.object_of_part(grasp_part_id);
    int target_part = -1;
    // prefer part-name matches outside the grasped object, then object names
    for (const scene::SceneObject& obj : scene.objects) {
      if (grasped && obj.id == grasped->id) continue;
      for (int pid : obj.part_ids) {
        if (name_matches(scene.parts.at(pid).name, *slot)) {
          target_part = pid;
          break;
        }
      }
      if (target_part >= 0) break;
    }
    if (target_part < 0) {
      for (const scene::SceneObject& obj : scene.objects) {
        if (grasped && obj.id == grasped->id) continue;
        if (name_matches(obj.name, *slot) && !obj.part_ids.empty()) {
          target_part = obj.part_ids.front();
          break;
        }
      }
    }
    if (target_part < 0) {
      fail(ErrorCode::SolveFailure, "motion phase",
           "no scene part matches rule target '" + *slot + "'");
    }
    const parts::GeometricElement element = model_part(scene, target_part);
    report.elements.emplace(element.id, element);
    rule->target = solver::associated_point(element);
  }

  return plan::plan_rule_based(*rule, p0);
}

}  // namespace

std::vector<plan::PoseStep> run_motion_phase(const scene::Scene& scene, const TaskSpec& task,
                                             const geom::Pose& p0, int grasp_part_id,
                                             const RunOptions& options, RunReport& report) {
  AuditingOracle oracle(*task.oracle, report);
  oracle.set_phase("motion");

  try {
    if (task.mode == Mode::RuleBased) {
      return rule_based_motion(scene, task, p0, grasp_part_id, report);
    }

    // --- task-relevant grounding and modeling
    const std::vector<int> selected = ground_task_parts(scene, task, oracle);
    if (selected.empty()) {
      fail(ErrorCode::SolveFailure, "motion phase", "no task-relevant parts selected");
    }
    std::vector<parts::GeometricElement> elements;
    for (int pid : selected) {
      parts::GeometricElement e = model_part(scene, pid);
      report.elements.emplace(e.id, e);
      elements.push_back(std::move(e));
    }

    // --- annotation (per camera the parts live in)
    {
      std::map<int, std::vector<parts::GeometricElement>> by_camera;
      for (const auto& e : elements) by_camera[scene.parts.at(e.id).camera].push_back(e);
      for (const auto& [cam_idx, group] : by_camera) {
        const auto doc = parts::annotate(group, scene.cameras[cam_idx].model);
        report.annotations.elements.insert(report.annotations.elements.end(),
                                           doc.elements.begin(), doc.elements.end());
      }
      std::sort(report.annotations.elements.begin(), report.annotations.elements.end(),
                [](const auto& a, const auto& b) { return a.id < b.id; });
    }

    // --- constraint generation
    oracle::ConstraintRequest creq;
    creq.instruction = task.instruction;
    creq.image_ref = image_ref_for(scene, 0, "annotated");
    for (const auto& e : elements) {
      creq.elements.push_back({e.id, e.kind(), e.name});
    }
    const auto cresp = oracle.generate_constraints(creq);

    lang::MotionPlan plan;
    std::vector<std::string> bad;
    for (const std::string& sentence : cresp.constraints) {
      try {
        plan.constraints.push_back(lang::parse_constraint(sentence));
      } catch (const Error&) {
        bad.push_back(sentence);
      }
    }
    for (const std::string& sentence : cresp.actions) {
      try {
        plan.actions.push_back(lang::parse_action(sentence));
      } catch (const Error&) {
        bad.push_back(sentence);
      }
    }
    if (!bad.empty()) {
      std::string joined;
      for (const auto& s : bad) joined += (joined.empty() ? "" : " | ") + s;
      throw Error(ErrorCode::ConstraintParseFailure, "oracle sentences do not parse: " + joined);
    }

    lang::ResolvedPlan resolved;
    try {
      resolved = lang::resolve(plan, report.elements);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConstraintParseFailure, e.what());
    }

    for (const auto& c : plan.constraints) report.constraint_sentences.push_back(lang::format(c));
    for (const auto& a : plan.actions) report.action_sentences.push_back(lang::format(a));

    // --- solve for the first target pose
    geom::RigidTransform transform;  // identity when there is nothing to solve
    if (!resolved.constraints.empty()) {
      solver::SolveProblem problem;
      problem.constraints = resolved.constraints;
      problem.table = scene.table;

      const scene::SceneObject* grasped = scene.object_of_part(grasp_part_id);
      const scene::SceneObject* obj =
          scene.movable_object ? scene.object_by_id(*scene.movable_object) : grasped;
      if (!obj) {
        fail(ErrorCode::SolveFailure, "motion phase", "movable object is not in the scene");
      }
      problem.movable_ids.insert(obj->part_ids.begin(), obj->part_ids.end());

      for (size_t i = 0; i < problem.constraints.size(); ++i) {
        const auto& slots = problem.constraints[i].slots;
        const bool any_movable = std::any_of(slots.begin(), slots.end(), [&](const auto& s) {
          return problem.movable_ids.count(s.element.id) > 0;
        });
        if (!any_movable) {
          fail(ErrorCode::SolveFailure, "motion phase",
               "constraint " + std::to_string(i) + " references no movable element");
        }
      }

      solver::SolveOptions sopt;
      sopt.seed = options.seed_override.value_or(sopt.seed);
      ++report.counters.solve_calls;
      solver::SolveResult result = solver::solve(problem, sopt);
      report.solve = result;
      if (!result.converged) {
        throw Error(ErrorCode::SolveFailure,
                    "solver did not converge; residual=" + std::to_string(result.residual));
      }
      transform = result.transform;
    }

    const geom::Pose p1 = solver::pose_from_transform(p0, transform);
    return plan::plan_post_grasp(p1, resolved.actions);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::ConstraintParseFailure:
      case ErrorCode::SolveFailure:
      case ErrorCode::SchemaError:
        throw;
      default:
        throw Error(ErrorCode::SolveFailure, std::string("motion phase: ") + e.what());
    }
  }
}

RunReport run(const scene::Scene& scene, const TaskSpec& task, const RunOptions& options) {
  RunReport report;
  report.instruction = task.instruction;
  report.mode = task.mode;
  {
    solver::SolveOptions defaults;
    report.solver_seed = options.seed_override.value_or(defaults.seed);
  }

  Stopwatch total;
  Stopwatch grasp_watch;
  const GraspPhaseResult grasp_result = run_grasp_phase(scene, task, options, report);
  report.timing_ms["grasp_phase"] = grasp_watch.ms();

  report.pose_sequence.push_back(
      {grasp_result.p0, plan::Gripper::Hold, {plan::Provenance::Kind::Grasp, ""}});

  Stopwatch motion_watch;
  const auto motion_steps =
      run_motion_phase(scene, task, grasp_result.p0, grasp_result.part_id, options, report);
  report.timing_ms["motion_phase"] = motion_watch.ms();

  report.pose_sequence.insert(report.pose_sequence.end(), motion_steps.begin(),
                              motion_steps.end());
  report.waypoints = plan::interpolate(report.pose_sequence, options.max_step);
  report.timing_ms["total"] = total.ms();
  return report;
}

RunReport run_to_files(const std::filesystem::path& manifest, const TaskSpec& task,
                       const RunOptions& options, const std::filesystem::path& out_dir) {
  const scene::Scene scene = scene::load_scene(manifest);
  RunReport report = run(scene, task, options);
  std::filesystem::create_directories(out_dir);
  json_io::save_json_file(out_dir / "report.json", report.to_json(true));
  json_io::save_json_file(out_dir / "trajectory.json", report.trajectory_json());
  return report;
}

namespace {

ojson pose_step_to_json(const plan::PoseStep& step) {
  ojson j;
  j["pose"] = json_io::pose_to_json(step.pose);
  j["gripper"] = step.gripper == plan::Gripper::Open ? "open" : "hold";
  switch (step.provenance.kind) {
    case plan::Provenance::Kind::Grasp: j["provenance"] = "grasp"; break;
    case plan::Provenance::Kind::Solved: j["provenance"] = "solved"; break;
    case plan::Provenance::Kind::Action:
      j["provenance"] = "action: " + step.provenance.text;
      break;
    case plan::Provenance::Kind::Rule:
      j["provenance"] = "rule: " + step.provenance.text;
      break;
  }
  return j;
}

ojson solve_to_json(const solver::SolveResult& r, const std::vector<std::string>& sentences) {
  ojson j;
  j["transform"] = json_io::transform_to_json(r.transform);
  j["residual"] = r.residual;
  ojson per = ojson::array();
  for (size_t i = 0; i < r.per_constraint.size(); ++i) {
    ojson e;
    e["constraint"] = i < sentences.size() ? sentences[i] : "";
    e["loss"] = r.per_constraint[i];
    per.push_back(std::move(e));
  }
  j["per_constraint"] = std::move(per);
  j["iterations"] = r.iterations;
  j["restarts_used"] = r.restarts_used;
  j["best_start"] = r.best_start;
  j["converged"] = r.converged;
  return j;
}

}  // namespace

ojson RunReport::trajectory_json() const {
  ojson j;
  ojson steps = ojson::array();
  for (const auto& s : pose_sequence) steps.push_back(pose_step_to_json(s));
  j["steps"] = std::move(steps);
  ojson wp = ojson::array();
  for (const auto& p : waypoints) wp.push_back(json_io::pose_to_json(p));
  j["waypoints"] = std::move(wp);
  return j;
}

ojson RunReport::to_json(bool include_timing) const {
  ojson j;
  j["instruction"] = instruction;
  j["mode"] = mode_name(mode);
  j["solver_seed"] = solver_seed;

  ojson jg;
  jg["part_id"] = grasp_part_id;
  jg["object_id"] = grasp_object_id;
  if (selection) {
    ojson js;
    js["chosen_index"] = selection->chosen_index;
    js["in_mask_count"] = selection->in_mask_count;
    js["total_count"] = selection->total_count;
    ojson jc;
    jc["pose"] = json_io::pose_to_json(selection->chosen.pose);
    jc["grasp_point"] = json_io::vec3_to_json(selection->chosen.grasp_point);
    jc["width"] = selection->chosen.width;
    jc["height"] = selection->chosen.height;
    jc["depth"] = selection->chosen.depth;
    jc["score"] = selection->chosen.score;
    js["candidate"] = std::move(jc);
    jg["selection"] = std::move(js);
  }
  j["grasp"] = std::move(jg);

  ojson je = ojson::array();
  for (const auto& [id, e] : elements) je.push_back(json_io::element_to_json(e));
  j["elements"] = std::move(je);
  j["annotations"] = json_io::annotation_to_json(annotations);

  ojson jp;
  jp["constraints"] = constraint_sentences;
  jp["actions"] = action_sentences;
  j["plan"] = std::move(jp);

  j["solve"] = solve ? solve_to_json(*solve, constraint_sentences) : ojson(nullptr);

  ojson steps = ojson::array();
  for (const auto& s : pose_sequence) steps.push_back(pose_step_to_json(s));
  j["pose_sequence"] = std::move(steps);
  ojson wp = ojson::array();
  for (const auto& p : waypoints) wp.push_back(json_io::pose_to_json(p));
  j["waypoints"] = std::move(wp);

  ojson jcnt;
  jcnt["grounding_calls_grasp"] = counters.grounding_calls_grasp;
  jcnt["grounding_calls_motion"] = counters.grounding_calls_motion;
  jcnt["solve_calls"] = counters.solve_calls;
  j["counters"] = std::move(jcnt);

  ojson jlog = ojson::array();
  for (const auto& entry : audit) {
    ojson ja;
    ja["phase"] = entry.pipeline_phase;
    ja["kind"] = entry.kind;
    ja["request"] = entry.request;
    ja["response"] = entry.response;
    jlog.push_back(std::move(ja));
  }
  j["oracle_log"] = std::move(jlog);

  if (include_timing) {
    ojson jt;
    for (const auto& [k, v] : timing_ms) jt[k] = v;
    j["timing_ms"] = std::move(jt);
  }
  return j;
}

}  // namespace copa::pipeline
