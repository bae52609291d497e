#pragma once

#include <filesystem>
#include <vector>

#include "copa/geometry.hpp"
#include "copa/part_model.hpp"

namespace copa::grasp {

/// 6-DoF grasp proposal: gripper pose in world, contact center, jaw geometry
/// and a graspness score.
struct GraspCandidate {
  geom::Pose pose;
  geom::Vec3 grasp_point;
  double width = 0;
  double height = 0;
  double depth = 0;
  double score = 0;
};

struct GraspSelection {
  GraspCandidate chosen;
  int chosen_index = -1;
  int in_mask_count = 0;
  int total_count = 0;
};

/// Projects every grasp point, keeps those whose rounded pixel falls inside
/// the part mask, and returns the highest-scoring survivor (ties to the
/// lowest index). Throws EmptyCandidates / NoCandidateInMask.
GraspSelection filter_and_select(const std::vector<GraspCandidate>& candidates,
                                 const parts::PartMask& part, const geom::CameraModel& cam);

/// Reference implementation; identical result, no threading.
GraspSelection filter_and_select_serial(const std::vector<GraspCandidate>& candidates,
                                        const parts::PartMask& part,
                                        const geom::CameraModel& cam);

/// Reads candidates from JSON, preserving order. Schema errors name the
/// offending field path.
std::vector<GraspCandidate> load_candidates(const std::filesystem::path& path);
std::vector<GraspCandidate> candidates_from_json_text(const std::string& text,
                                                      const std::string& origin);

/// Deterministic test-fixture generator: n candidates with grasp points
/// within 1 cm of the element plus 2n distractors well away from it.
std::vector<GraspCandidate> synth_candidates(const parts::GeometricElement& part, int n,
                                             uint64_t seed);

}  // namespace copa::grasp
