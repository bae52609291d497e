#pragma once

#include <filesystem>
#include <string>

#include "copa/geometry.hpp"
#include "copa/part_model.hpp"
#include "json.hpp"

namespace copa::json_io {

// Output documents use ordered_json so files are byte-stable across runs.
using ojson = nlohmann::ordered_json;

ojson vec3_to_json(const geom::Vec3& v);
geom::Vec3 vec3_from_json(const nlohmann::json& j);

/// Pose as {"position":[x,y,z], "orientation_xyzw":[x,y,z,w]}.
ojson pose_to_json(const geom::Pose& p);
geom::Pose pose_from_json(const nlohmann::json& j);

/// A rigid transform shares the pose layout ("position" is the translation).
ojson transform_to_json(const geom::RigidTransform& t);
geom::RigidTransform transform_from_json(const nlohmann::json& j);

ojson camera_to_json(const geom::CameraModel& cam);
geom::CameraModel camera_from_json(const nlohmann::json& j);

ojson element_to_json(const parts::GeometricElement& e);
parts::GeometricElement element_from_json(const nlohmann::json& j);

ojson annotation_to_json(const parts::AnnotationDocument& doc);

nlohmann::json load_json_file(const std::filesystem::path& path);
void save_json_file(const std::filesystem::path& path, const ojson& doc);

}  // namespace copa::json_io
