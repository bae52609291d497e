#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "copa/grasp.hpp"
#include "copa/json_io.hpp"
#include "copa/oracle.hpp"
#include "copa/post_grasp.hpp"
#include "copa/scene.hpp"
#include "copa/solver.hpp"

namespace copa::pipeline {

enum class Mode { Full, NoCoarseToFine, RuleBased };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct TaskSpec {
  std::string instruction;
  Mode mode = Mode::Full;
  std::shared_ptr<oracle::Oracle> oracle;
};

struct RunOptions {
  /// Overrides every solver / fixture seed when set (the CLI fills this from
  /// COPA_SEED).
  std::optional<uint64_t> seed_override;
  double max_step = 0.02;
};

/// Reads COPA_SEED; empty when unset.
std::optional<uint64_t> seed_from_env();

struct Counters {
  int grounding_calls_grasp = 0;
  int grounding_calls_motion = 0;
  int solve_calls = 0;
};

struct RunReport {
  std::string instruction;
  Mode mode = Mode::Full;
  uint64_t solver_seed = 0;

  int grasp_part_id = -1;
  int grasp_object_id = -1;
  std::optional<grasp::GraspSelection> selection;

  lang::ElementTable elements;
  parts::AnnotationDocument annotations;
  std::vector<std::string> constraint_sentences;  // canonical form
  std::vector<std::string> action_sentences;
  std::optional<solver::SolveResult> solve;

  std::vector<plan::PoseStep> pose_sequence;  // P0 first
  std::vector<geom::Pose> waypoints;

  std::vector<oracle::AuditEntry> audit;
  Counters counters;
  std::map<std::string, double> timing_ms;

  json_io::ojson to_json(bool include_timing = true) const;
  json_io::ojson trajectory_json() const;
};

struct GraspPhaseResult {
  geom::Pose p0;
  int part_id = -1;
  int object_id = -1;
};

/// Task-oriented grasping: arm-filter the masks, ground the object and part,
/// then pick the best-scoring candidate inside the part mask. Failures
/// surface as GraspFailure.
GraspPhaseResult run_grasp_phase(const scene::Scene& scene, const TaskSpec& task,
                                 const RunOptions& options, RunReport& report);

/// Task-aware motion planning: ground the task-relevant parts, model them,
/// obtain constraints, solve for the first target pose and append the
/// subsequent actions. Rule mode skips the constraint machinery entirely.
std::vector<plan::PoseStep> run_motion_phase(const scene::Scene& scene, const TaskSpec& task,
                                             const geom::Pose& p0, int grasp_part_id,
                                             const RunOptions& options, RunReport& report);

RunReport run(const scene::Scene& scene, const TaskSpec& task, const RunOptions& options = {});

/// CLI entry: loads the scene, runs, writes report.json and trajectory.json
/// into `out_dir`.
RunReport run_to_files(const std::filesystem::path& manifest, const TaskSpec& task,
                       const RunOptions& options, const std::filesystem::path& out_dir);

/// Loads grasp candidates per the scene's source, synthesizing deterministic
/// ones when asked to.
std::vector<grasp::GraspCandidate> obtain_candidates(const scene::Scene& scene, int part_id,
                                                     const RunOptions& options);

/// Models one part into a geometric element (classification included).
parts::GeometricElement model_part(const scene::Scene& scene, int part_id);

}  // namespace copa::pipeline
