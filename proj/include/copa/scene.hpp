#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "copa/geometry.hpp"
#include "copa/image.hpp"
#include "copa/part_model.hpp"
#include "copa/solver.hpp"

namespace copa::scene {

struct CameraEntry {
  geom::CameraModel model;
  geom::DepthImage depth;
  std::optional<img::ImageRGB> rgb;
  img::Mask arm_mask;
};

struct SceneObject {
  int id = 0;
  std::string name;
  std::vector<int> part_ids;
};

struct SynthSpec {
  int n = 5;
  uint64_t seed = 7;
};

using CandidateSource = std::variant<std::monostate, std::filesystem::path, SynthSpec>;

/// One observation plus everything a run needs: cameras with depth and arm
/// masks, part masks grouped into objects, the arm reference point, the
/// candidate source and the table frame.
struct Scene {
  std::vector<CameraEntry> cameras;
  std::vector<SceneObject> objects;
  std::map<int, parts::PartMask> parts;
  geom::Vec3 arm_reference{0, 0, 0};
  geom::Pose robot_base;
  solver::TableFrame table;
  CandidateSource grasp_source;
  std::optional<int> movable_object;
  std::filesystem::path root;  // directory of the manifest

  const SceneObject* object_of_part(int part_id) const;
  const SceneObject* object_by_id(int object_id) const;
};

/// Loads a manifest and every file it references; image sizes are checked
/// against their camera. Throws InvalidScene / SchemaError / IoError.
Scene load_scene(const std::filesystem::path& manifest_path);

}  // namespace copa::scene
