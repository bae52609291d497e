#include "copa/scene.hpp"

#include <algorithm>
#include <set>

#include "copa/json_io.hpp"

namespace copa::scene {

namespace {

using nlohmann::json;

img::Mask load_mask(const json& spec, const std::filesystem::path& root) {
  if (spec.is_string()) {
    return img::mask_from_png(root / spec.get<std::string>());
  }
  if (spec.is_object() && spec.contains("counts")) {
    std::vector<int64_t> counts;
    for (const auto& c : spec["counts"]) counts.push_back(c.get<int64_t>());
    return img::rle_decode(spec.at("width").get<int>(), spec.at("height").get<int>(), counts);
  }
  throw Error(ErrorCode::SchemaError, "mask must be a PNG path or an RLE object");
}

geom::DepthImage load_depth(const json& cam_spec, const std::filesystem::path& root) {
  const std::string file = cam_spec.at("depth").get<std::string>();
  const double scale = cam_spec.value("depth_scale", 0.001);
  const img::ImageGray16 raw = img::read_png_gray16(root / file);
  geom::DepthImage depth(raw.width, raw.height);
  for (size_t i = 0; i < raw.data.size(); ++i) {
    depth.data[i] = float(raw.data[i] * scale);  // 0 stays invalid
  }
  return depth;
}

}  // namespace

const SceneObject* Scene::object_of_part(int part_id) const {
  for (const SceneObject& obj : objects) {
    if (std::find(obj.part_ids.begin(), obj.part_ids.end(), part_id) != obj.part_ids.end()) {
      return &obj;
    }
  }
  return nullptr;
}

const SceneObject* Scene::object_by_id(int object_id) const {
  for (const SceneObject& obj : objects) {
    if (obj.id == object_id) return &obj;
  }
  return nullptr;
}

Scene load_scene(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path)) {
    throw Error(ErrorCode::IoError, "scene manifest not found: " + manifest_path.string());
  }
  const json doc = json_io::load_json_file(manifest_path);
  Scene scene;
  scene.root = manifest_path.parent_path();

  try {
    if (!doc.contains("cameras") || !doc["cameras"].is_array() || doc["cameras"].empty()) {
      throw Error(ErrorCode::InvalidScene, "scene needs at least one camera");
    }
    for (const auto& jc : doc["cameras"]) {
      CameraEntry entry;
      entry.model = json_io::camera_from_json(jc.at("model"));
      entry.depth = load_depth(jc, scene.root);
      if (entry.depth.width != entry.model.width || entry.depth.height != entry.model.height) {
        throw Error(ErrorCode::InvalidScene, "depth image size differs from the camera model");
      }
      if (jc.contains("arm_mask")) {
        entry.arm_mask = load_mask(jc["arm_mask"], scene.root);
      } else {
        entry.arm_mask = img::Mask(entry.model.width, entry.model.height, 0);
      }
      if (entry.arm_mask.width != entry.model.width ||
          entry.arm_mask.height != entry.model.height) {
        throw Error(ErrorCode::InvalidScene, "arm mask size differs from the camera model");
      }
      if (jc.contains("rgb")) {
        const img::DecodedPng png = img::read_png(scene.root / jc["rgb"].get<std::string>());
        img::ImageRGB rgb(png.width, png.height);
        for (size_t p = 0; p < size_t(png.width) * png.height; ++p) {
          for (int c = 0; c < 3; ++c) {
            const int src = png.channels >= 3 ? c : 0;
            const uint16_t v = png.samples[p * png.channels + src];
            rgb.data[p * 3 + c] = png.bit_depth == 16 ? uint8_t(v >> 8) : uint8_t(v);
          }
        }
        entry.rgb = std::move(rgb);
      }
      scene.cameras.push_back(std::move(entry));
    }

    std::set<int> seen_parts;
    for (const auto& jo : doc.at("objects")) {
      SceneObject obj;
      obj.id = jo.at("id").get<int>();
      obj.name = jo.value("name", std::string());
      for (const auto& jp : jo.at("parts")) {
        parts::PartMask part;
        part.id = jp.at("id").get<int>();
        part.name = jp.value("name", std::string());
        part.camera = jp.value("camera", 0);
        if (part.camera < 0 || part.camera >= int(scene.cameras.size())) {
          throw Error(ErrorCode::InvalidScene,
                      "part " + std::to_string(part.id) + " names an unknown camera");
        }
        part.mask = load_mask(jp.at("mask"), scene.root);
        const auto& cam = scene.cameras[part.camera].model;
        if (part.mask.width != cam.width || part.mask.height != cam.height) {
          throw Error(ErrorCode::InvalidScene,
                      "mask size of part " + std::to_string(part.id) + " differs from its camera");
        }
        if (!seen_parts.insert(part.id).second) {
          throw Error(ErrorCode::InvalidScene,
                      "part id " + std::to_string(part.id) + " appears twice");
        }
        obj.part_ids.push_back(part.id);
        scene.parts.emplace(part.id, std::move(part));
      }
      scene.objects.push_back(std::move(obj));
    }

    if (doc.contains("arm_reference")) {
      scene.arm_reference = json_io::vec3_from_json(doc["arm_reference"]);
    }
    if (doc.contains("robot_base")) {
      scene.robot_base = json_io::pose_from_json(doc["robot_base"]);
      if (!doc.contains("arm_reference")) scene.arm_reference = scene.robot_base.position;
    }
    if (doc.contains("table")) {
      scene.table.point = json_io::vec3_from_json(doc["table"].at("point"));
      scene.table.normal = geom::UnitVec3(json_io::vec3_from_json(doc["table"].at("normal")));
    }
    if (doc.contains("grasp_candidates")) {
      const auto& jg = doc["grasp_candidates"];
      if (jg.is_string()) {
        scene.grasp_source = scene.root / jg.get<std::string>();
      } else if (jg.is_object() && jg.contains("synthesize")) {
        SynthSpec spec;
        spec.n = jg["synthesize"].value("n", 5);
        spec.seed = jg["synthesize"].value("seed", uint64_t(7));
        scene.grasp_source = spec;
      } else {
        throw Error(ErrorCode::SchemaError, "grasp_candidates must be a path or {synthesize:{}}");
      }
    }
    if (doc.contains("movable_object")) {
      scene.movable_object = doc["movable_object"].get<int>();
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("scene manifest: ") + e.what());
  }
  return scene;
}

}  // namespace copa::scene
