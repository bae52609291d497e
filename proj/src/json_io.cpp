#include "copa/json_io.hpp"

#include <fstream>

namespace copa::json_io {

namespace {

double number_at(const nlohmann::json& j, size_t i, const char* what) {
  if (!j.is_array() || j.size() <= i || !j[i].is_number()) {
    throw Error(ErrorCode::SchemaError, std::string(what) + " must be a numeric array");
  }
  return j[i].get<double>();
}

}  // namespace

ojson vec3_to_json(const geom::Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

geom::Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::SchemaError, "expected a 3-element array");
  }
  return geom::Vec3(number_at(j, 0, "vec3"), number_at(j, 1, "vec3"), number_at(j, 2, "vec3"));
}

ojson pose_to_json(const geom::Pose& p) {
  const Eigen::Quaterniond q = p.orientation.quaternion();
  ojson j;
  j["position"] = vec3_to_json(p.position);
  j["orientation_xyzw"] = ojson::array({q.x(), q.y(), q.z(), q.w()});
  return j;
}

geom::Pose pose_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("position") || !j.contains("orientation_xyzw")) {
    throw Error(ErrorCode::SchemaError, "pose needs 'position' and 'orientation_xyzw'");
  }
  geom::Pose p;
  p.position = vec3_from_json(j["position"]);
  const auto& q = j["orientation_xyzw"];
  if (!q.is_array() || q.size() != 4) {
    throw Error(ErrorCode::SchemaError, "orientation_xyzw must have 4 entries");
  }
  p.orientation =
      geom::Rotation::from_quaternion(number_at(q, 0, "quat"), number_at(q, 1, "quat"),
                                      number_at(q, 2, "quat"), number_at(q, 3, "quat"));
  return p;
}

ojson transform_to_json(const geom::RigidTransform& t) {
  geom::Pose p;
  p.position = t.translation;
  p.orientation = t.rotation;
  return pose_to_json(p);
}

geom::RigidTransform transform_from_json(const nlohmann::json& j) {
  const geom::Pose p = pose_from_json(j);
  geom::RigidTransform t;
  t.translation = p.position;
  t.rotation = p.orientation;
  return t;
}

ojson camera_to_json(const geom::CameraModel& cam) {
  ojson j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["extrinsics"] = transform_to_json(cam.extrinsics);
  return j;
}

geom::CameraModel camera_from_json(const nlohmann::json& j) {
  geom::CameraModel cam;
  try {
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.extrinsics = transform_from_json(j.at("extrinsics"));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("camera: ") + e.what());
  }
  cam.validate();
  return cam;
}

ojson element_to_json(const parts::GeometricElement& e) {
  ojson j;
  j["id"] = e.id;
  j["name"] = e.name;
  if (const auto* v = std::get_if<parts::VectorElement>(&e.shape)) {
    j["kind"] = "vector";
    j["endpoint_near"] = vec3_to_json(v->endpoint_near);
    j["endpoint_far"] = vec3_to_json(v->endpoint_far);
    j["anchor_point"] = vec3_to_json(v->anchor_point);
    j["direction"] = vec3_to_json(v->direction.vec());
  } else {
    const auto& s = std::get<parts::SurfaceElement>(e.shape);
    j["kind"] = "surface";
    j["center"] = vec3_to_json(s.center);
    j["normal"] = vec3_to_json(s.normal.vec());
    j["inlier_count"] = s.inlier_count;
  }
  return j;
}

parts::GeometricElement element_from_json(const nlohmann::json& j) {
  parts::GeometricElement e;
  try {
    e.id = j.at("id").get<int>();
    e.name = j.value("name", std::string());
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "vector") {
      parts::VectorElement v;
      v.endpoint_near = vec3_from_json(j.at("endpoint_near"));
      v.endpoint_far = vec3_from_json(j.at("endpoint_far"));
      v.anchor_point = j.contains("anchor_point") ? vec3_from_json(j.at("anchor_point"))
                                                  : v.endpoint_far;
      v.direction = geom::UnitVec3(j.contains("direction")
                                       ? vec3_from_json(j.at("direction"))
                                       : geom::Vec3(v.endpoint_far - v.endpoint_near));
      e.shape = v;
    } else if (kind == "surface") {
      parts::SurfaceElement s;
      s.center = vec3_from_json(j.at("center"));
      s.normal = geom::UnitVec3(vec3_from_json(j.at("normal")));
      s.inlier_count = j.value("inlier_count", 0);
      e.shape = s;
    } else {
      throw Error(ErrorCode::SchemaError, "element kind must be 'vector' or 'surface'");
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    throw Error(ErrorCode::SchemaError, std::string("element: ") + ex.what());
  }
  return e;
}

ojson annotation_to_json(const parts::AnnotationDocument& doc) {
  ojson arr = ojson::array();
  for (const auto& e : doc.elements) {
    ojson j;
    j["id"] = e.id;
    j["name"] = e.name;
    if (const auto* v = std::get_if<parts::VectorAnnotation>(&e.shape)) {
      j["kind"] = "vector";
      j["endpoint_a"] = ojson::array({v->endpoint_a.x(), v->endpoint_a.y()});
      j["endpoint_b"] = ojson::array({v->endpoint_b.x(), v->endpoint_b.y()});
      j["label"] = ojson::array({v->label.x(), v->label.y()});
    } else {
      const auto& s = std::get<parts::SurfaceAnnotation>(e.shape);
      j["kind"] = "surface";
      j["center"] = ojson::array({s.center.x(), s.center.y()});
      j["normal_tip"] = ojson::array({s.normal_tip.x(), s.normal_tip.y()});
      j["label"] = ojson::array({s.label.x(), s.label.y()});
    }
    arr.push_back(std::move(j));
  }
  ojson out;
  out["elements"] = std::move(arr);
  return out;
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.filename().string() + ": " + e.what());
  }
}

void save_json_file(const std::filesystem::path& path, const ojson& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
}

}  // namespace copa::json_io
