#include "copa/fixtures.hpp"

#include <algorithm>
#include <cmath>

#include "copa/json_io.hpp"
#include "copa/render.hpp"

namespace copa::fixtures {

namespace {

using json_io::ojson;

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr double kFocal = 500.0;
constexpr double kCx = 320.0;
constexpr double kCy = 240.0;
constexpr double kCameraHeight = 1.07;  // camera center above z = 0
constexpr double kTableZ = 0.07;

// Scene primitives live on the pixel grid so mask centroids and line fits
// recover the designed coordinates exactly.
struct Prim {
  enum class Shape { Rect, Disc, Annulus } shape = Shape::Rect;
  double u0 = 0, u1 = 0, v0 = 0, v1 = 0;  // rect, inclusive pixel bounds
  double cu = 0, cv = 0, rin = 0, rout = 0;
  double z = kTableZ;
  int part_id = 0;  // 0 = depth only

  bool contains(int u, int v) const {
    switch (shape) {
      case Shape::Rect:
        return u >= u0 && u <= u1 && v >= v0 && v <= v1;
      case Shape::Disc: {
        const double d2 = (u - cu) * (u - cu) + (v - cv) * (v - cv);
        return d2 <= rout * rout;
      }
      case Shape::Annulus: {
        const double d2 = (u - cu) * (u - cu) + (v - cv) * (v - cv);
        return d2 <= rout * rout && d2 > rin * rin;
      }
    }
    return false;
  }
};

Prim rect(double u0, double u1, double v0, double v1, double z, int part_id = 0) {
  Prim p;
  p.shape = Prim::Shape::Rect;
  p.u0 = u0;
  p.u1 = u1;
  p.v0 = v0;
  p.v1 = v1;
  p.z = z;
  p.part_id = part_id;
  return p;
}

Prim disc(double cu, double cv, double r, double z, int part_id = 0) {
  Prim p;
  p.shape = Prim::Shape::Disc;
  p.cu = cu;
  p.cv = cv;
  p.rout = r;
  p.z = z;
  p.part_id = part_id;
  return p;
}

Prim annulus(double cu, double cv, double rin, double rout, double z, int part_id = 0) {
  Prim p;
  p.shape = Prim::Shape::Annulus;
  p.cu = cu;
  p.cv = cv;
  p.rin = rin;
  p.rout = rout;
  p.z = z;
  p.part_id = part_id;
  return p;
}

struct PartDef {
  int id = 0;
  std::string name;
};

struct ObjectDef {
  int id = 0;
  std::string name;
  std::vector<PartDef> parts;
};

struct FixtureDef {
  std::string instruction;
  pipeline::Mode default_mode = pipeline::Mode::Full;
  std::vector<Prim> prims;  // scanned in falling-z order
  std::vector<ObjectDef> objects;
  geom::Vec3 arm_reference{0, 0.5, 0.1};
  ojson oracle_script;
  ojson candidates;  // explicit candidate file; empty -> synthesize
  int synth_n = 6;
  uint64_t synth_seed = 7;
};

ojson script_entry(const char* phase, const char* purpose, const std::string& instruction,
                   ojson response) {
  ojson e;
  e["phase"] = phase;
  if (purpose) e["purpose"] = purpose;
  e["instruction"] = instruction;
  e["response"] = std::move(response);
  return e;
}

ojson selected(std::vector<int> ids) {
  ojson r;
  r["selected"] = ids;
  return r;
}

ojson constraints_response(std::vector<std::string> constraints,
                           std::vector<std::string> actions) {
  ojson r;
  r["constraints"] = constraints;
  r["actions"] = actions;
  return r;
}

ojson candidate_json(const geom::Pose& pose, const geom::Vec3& grasp_point, double score) {
  ojson c;
  c["pose"] = json_io::pose_to_json(pose);
  c["grasp_point"] = json_io::vec3_to_json(grasp_point);
  c["width"] = 0.04;
  c["height"] = 0.02;
  c["depth"] = 0.03;
  c["score"] = score;
  return c;
}

geom::Rotation rotation_from_columns(const geom::Vec3& x, const geom::Vec3& y,
                                     const geom::Vec3& z) {
  geom::Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return geom::Rotation::from_matrix(m);
}

// --- the five task scenes ------------------------------------------------------

FixtureDef hammer_nail() {
  FixtureDef f;
  f.instruction = "Hammer the nail.";

  // hammer head top (surface) and handle (slender), nail head, plus a raised
  // guide rail the flipped handle must line up with; the rail pins the free
  // rotation about the nail axis so the solved pose is unique.
  f.prims = {
      rect(321, 371, 148, 178, 0.10, 1),   // striking surface
      rect(342, 350, 179, 269, 0.085, 2),  // handle
      disc(267, 423, 8.2, 0.12, 3),        // nail top
      rect(80, 212, 434, 438, 0.185, 4),   // guide rail
      rect(0, 40, 0, 479, 0.30, 0),        // robot arm
  };
  f.objects = {
      {10, "hammer", {{1, "striking surface"}, {2, "handle"}}},
      {20, "nail", {{3, "nail top"}}},
      {30, "rail", {{4, "guide rail"}}},
  };
  f.arm_reference = geom::Vec3(0.0, 0.5, 0.1);

  ojson entries = ojson::array();
  entries.push_back(script_entry("coarse_object", "grasping", f.instruction, selected({10})));
  entries.push_back(script_entry("fine_part", "grasping", f.instruction, selected({2})));
  entries.push_back(
      script_entry("coarse_object", "task_relevant", f.instruction, selected({10, 20, 30})));
  entries.push_back(
      script_entry("fine_part", "task_relevant", f.instruction, selected({1, 2, 3, 4})));
  entries.push_back(script_entry(
      "constraints", nullptr, f.instruction,
      constraints_response(
          {"Vector 1 and Vector 3 are on the same line, with the opposite direction.",
           "The target position of Point 1 is 5 cm along Vector 3 from Point 3's current "
           "position.",
           "Vector 2 and Vector 4 are on the same line, with the opposite direction."},
          {"Move vertically down 7 cm.", "Open the gripper."})));
  f.oracle_script["version"] = oracle::kProtocolVersion;
  f.oracle_script["entries"] = std::move(entries);

  // top-down gripper: approach -z, jaw x axis along world y
  const geom::Rotation top_down = rotation_from_columns(
      geom::Vec3(0, 1, 0), geom::Vec3(1, 0, 0), geom::Vec3(0, 0, -1));
  const geom::Vec3 on_handle = overhead_world_at(346, 225, 0.085);
  const geom::Vec3 on_handle_low = overhead_world_at(346, 255, 0.085);
  const geom::Vec3 on_strike = overhead_world_at(346, 163, 0.10);

  ojson cands = ojson::array();
  cands.push_back(candidate_json({on_handle + geom::Vec3(0, 0, 0.045), top_down}, on_handle,
                                 0.95));  // winner
  cands.push_back(candidate_json({on_strike + geom::Vec3(0, 0, 0.045), top_down}, on_strike,
                                 0.99));  // highest score but on the head
  cands.push_back(
      candidate_json({on_handle_low + geom::Vec3(0, 0, 0.045), top_down}, on_handle_low, 0.5));
  cands.push_back(candidate_json({geom::Vec3(0.2, 0.3, 0.115), top_down},
                                 geom::Vec3(0.2, 0.3, 0.07), 0.97));  // on the table
  f.candidates = std::move(cands);
  return f;
}

FixtureDef spoon_into_cup() {
  FixtureDef f;
  f.instruction = "Put spoon into the cup.";
  f.prims = {
      rect(200, 280, 150, 158, 0.08, 1),   // spoon handle
      disc(180, 154, 9.3, 0.08, 2),        // spoon bowl
      annulus(420, 300, 8, 11, 0.16, 3),   // cup opening rim
      disc(420, 300, 8, 0.075, 0),         // cup interior
      rect(0, 40, 0, 479, 0.30, 0),        // robot arm
  };
  f.objects = {
      {10, "spoon", {{1, "handle"}, {2, "bowl"}}},
      {20, "cup", {{3, "cup opening"}}},
  };
  f.arm_reference = geom::Vec3(0.0, 0.17, 0.1);

  ojson entries = ojson::array();
  entries.push_back(script_entry("coarse_object", "grasping", f.instruction, selected({10})));
  entries.push_back(script_entry("fine_part", "grasping", f.instruction, selected({1})));
  entries.push_back(
      script_entry("coarse_object", "task_relevant", f.instruction, selected({10, 20})));
  entries.push_back(script_entry("fine_part", "task_relevant", f.instruction, selected({1, 3})));
  entries.push_back(script_entry(
      "constraints", nullptr, f.instruction,
      constraints_response({"Vector 1 is perpendicular to the table surface.",
                            "The target position of Point 1 is 5 cm along Vector 3 from Point "
                            "3's current position."},
                           {"Move vertically down 7 cm.", "Open the gripper."})));
  f.oracle_script["version"] = oracle::kProtocolVersion;
  f.oracle_script["entries"] = std::move(entries);
  f.synth_n = 6;
  f.synth_seed = 11;
  return f;
}

FixtureDef open_drawer() {
  FixtureDef f;
  f.instruction = "Open the drawer.";
  f.default_mode = pipeline::Mode::RuleBased;
  f.prims = {
      rect(420, 428, 220, 260, 0.165, 1),  // handle bar on the drawer top
      rect(400, 560, 150, 350, 0.15, 0),   // drawer body
      rect(0, 40, 0, 479, 0.30, 0),        // robot arm
  };
  f.objects = {
      {10, "drawer", {{1, "drawer handle"}}},
  };
  f.arm_reference = geom::Vec3(0.0, 0.2, 0.1);

  ojson entries = ojson::array();
  entries.push_back(script_entry("coarse_object", "grasping", f.instruction, selected({10})));
  entries.push_back(script_entry("fine_part", "grasping", f.instruction, selected({1})));
  f.oracle_script["version"] = oracle::kProtocolVersion;
  f.oracle_script["entries"] = std::move(entries);

  // horizontal approach along +x, straight at the drawer front
  const geom::Rotation facing = rotation_from_columns(
      geom::Vec3(0, 0, -1), geom::Vec3(0, 1, 0), geom::Vec3(1, 0, 0));
  const geom::Vec3 on_handle = overhead_world_at(424, 240, 0.165);
  ojson cands = ojson::array();
  cands.push_back(
      candidate_json({on_handle - geom::Vec3(0.06, 0, 0), facing}, on_handle, 0.9));
  cands.push_back(candidate_json({geom::Vec3(0.73, 0.08, 0.20), facing},
                                 geom::Vec3(0.73, 0.08, 0.15), 0.99));  // drawer body
  f.candidates = std::move(cands);
  return f;
}

FixtureDef press_button() {
  FixtureDef f;
  f.instruction = "Press the button with the stick.";
  f.prims = {
      rect(150, 240, 200, 208, 0.085, 1),  // stick
      disc(430, 330, 9.3, 0.10, 2),        // button top
      disc(430, 330, 14, 0.085, 0),        // button base
      rect(0, 40, 0, 479, 0.30, 0),        // robot arm
  };
  f.objects = {
      {10, "stick", {{1, "stick"}}},
      {20, "button", {{2, "button top"}}},
  };
  f.arm_reference = geom::Vec3(0.0, 0.07, 0.1);

  ojson entries = ojson::array();
  entries.push_back(script_entry("coarse_object", "grasping", f.instruction, selected({10})));
  entries.push_back(script_entry("fine_part", "grasping", f.instruction, selected({1})));
  entries.push_back(
      script_entry("coarse_object", "task_relevant", f.instruction, selected({10, 20})));
  entries.push_back(script_entry("fine_part", "task_relevant", f.instruction, selected({1, 2})));
  entries.push_back(script_entry(
      "constraints", nullptr, f.instruction,
      constraints_response(
          {"Vector 1 and Vector 2 are on the same line, with the opposite direction.",
           "The target position of Point 1 is 5 cm along Vector 2 from Point 2's current "
           "position."},
          {"Move vertically down 7 cm."})));
  f.oracle_script["version"] = oracle::kProtocolVersion;
  f.oracle_script["entries"] = std::move(entries);
  f.synth_n = 6;
  f.synth_seed = 13;
  return f;
}

FixtureDef insert_flower() {
  FixtureDef f;
  f.instruction = "Put flowers into the vase.";
  f.prims = {
      rect(190, 280, 100, 106, 0.075, 1),  // stem
      disc(165, 103, 11.3, 0.09, 2),       // petals
      annulus(440, 150, 8, 11, 0.18, 3),   // vase opening
      disc(440, 150, 8, 0.075, 0),         // vase interior
      rect(0, 40, 0, 479, 0.30, 0),        // robot arm
  };
  f.objects = {
      {10, "flower", {{1, "stem"}, {2, "petals"}}},
      {20, "vase", {{3, "vase opening"}}},
  };
  f.arm_reference = geom::Vec3(0.0, 0.27, 0.1);

  ojson entries = ojson::array();
  entries.push_back(script_entry("coarse_object", "grasping", f.instruction, selected({10})));
  entries.push_back(script_entry("fine_part", "grasping", f.instruction, selected({1})));
  entries.push_back(
      script_entry("coarse_object", "task_relevant", f.instruction, selected({10, 20})));
  entries.push_back(script_entry("fine_part", "task_relevant", f.instruction, selected({1, 3})));
  entries.push_back(script_entry(
      "constraints", nullptr, f.instruction,
      constraints_response({"Vector 1 points downward.",
                            "The target position of Point 1 is 5 cm along Vector 3 from Point "
                            "3's current position."},
                           {"Move vertically down 7 cm.", "Open the gripper."})));
  f.oracle_script["version"] = oracle::kProtocolVersion;
  f.oracle_script["entries"] = std::move(entries);
  f.synth_n = 6;
  f.synth_seed = 17;
  return f;
}

FixtureDef fixture_by_name(const std::string& name) {
  if (name == "hammer-nail") return hammer_nail();
  if (name == "spoon-into-cup") return spoon_into_cup();
  if (name == "open-drawer") return open_drawer();
  if (name == "press-button") return press_button();
  if (name == "insert-flower") return insert_flower();
  throw Error(ErrorCode::SchemaError, "unknown fixture '" + name + "'");
}

void write_scene_files(const FixtureDef& def, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  // render order: higher surfaces occlude lower ones
  std::vector<const Prim*> order;
  for (const Prim& p : def.prims) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const Prim* a, const Prim* b) { return a->z > b->z; });

  img::ImageGray16 depth(kWidth, kHeight);
  img::ImageRGB rgb(kWidth, kHeight);
  std::map<int, img::Mask> masks;
  for (const ObjectDef& obj : def.objects) {
    for (const PartDef& part : obj.parts) masks.emplace(part.id, img::Mask(kWidth, kHeight));
  }
  img::Mask arm(kWidth, kHeight);

  for (int v = 0; v < kHeight; ++v) {
    for (int u = 0; u < kWidth; ++u) {
      double z = kTableZ;
      const Prim* hit = nullptr;
      for (const Prim* p : order) {
        if (p->contains(u, v)) {
          z = p->z;
          hit = p;
          break;
        }
      }
      depth.at(u, v) = uint16_t(std::lround((kCameraHeight - z) * 1000.0));

      render::Color c{96, 104, 92};  // tabletop
      if (hit) {
        if (hit->part_id > 0) {
          c = render::palette_color(hit->part_id);
          masks.at(hit->part_id).at(u, v) = 1;
        } else {
          c = render::Color{70, 70, 78};
        }
      }
      uint8_t* px = rgb.px(u, v);
      px[0] = c.r;
      px[1] = c.g;
      px[2] = c.b;
    }
  }
  // the robot arm region is its own mask, not a part
  for (int v = 0; v < kHeight; ++v) {
    for (int u = 0; u <= 40; ++u) arm.at(u, v) = 1;
  }

  img::write_png_gray16(dir / "depth.png", depth);
  img::write_png_rgb8(dir / "rgb.png", rgb);
  img::write_mask_png(dir / "arm.png", arm);
  for (const auto& [id, mask] : masks) {
    img::write_mask_png(dir / ("part" + std::to_string(id) + ".png"), mask);
  }

  const geom::CameraModel cam = overhead_camera();
  ojson manifest;
  {
    ojson jcam;
    jcam["model"] = json_io::camera_to_json(cam);
    jcam["depth"] = "depth.png";
    jcam["depth_scale"] = 0.001;
    jcam["rgb"] = "rgb.png";
    jcam["arm_mask"] = "arm.png";
    manifest["cameras"] = ojson::array({jcam});
  }
  {
    ojson jobjects = ojson::array();
    for (const ObjectDef& obj : def.objects) {
      ojson jo;
      jo["id"] = obj.id;
      jo["name"] = obj.name;
      ojson jparts = ojson::array();
      for (const PartDef& part : obj.parts) {
        ojson jp;
        jp["id"] = part.id;
        jp["name"] = part.name;
        jp["mask"] = "part" + std::to_string(part.id) + ".png";
        jparts.push_back(std::move(jp));
      }
      jo["parts"] = std::move(jparts);
      jobjects.push_back(std::move(jo));
    }
    manifest["objects"] = std::move(jobjects);
  }
  manifest["arm_reference"] = json_io::vec3_to_json(def.arm_reference);
  if (!def.candidates.empty()) {
    json_io::save_json_file(dir / "candidates.json", def.candidates);
    manifest["grasp_candidates"] = "candidates.json";
  } else {
    ojson synth;
    synth["synthesize"] = ojson{{"n", def.synth_n}, {"seed", def.synth_seed}};
    manifest["grasp_candidates"] = std::move(synth);
  }
  json_io::save_json_file(dir / "manifest.json", manifest);
  json_io::save_json_file(dir / "oracle.json", def.oracle_script);
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"hammer-nail", "spoon-into-cup", "open-drawer", "press-button", "insert-flower"};
}

geom::CameraModel overhead_camera() {
  geom::CameraModel cam;
  cam.fx = cam.fy = kFocal;
  cam.cx = kCx;
  cam.cy = kCy;
  cam.width = kWidth;
  cam.height = kHeight;
  // camera axes in world coordinates: x right, y toward -y, optical axis down
  geom::Mat3 cam_in_world;
  cam_in_world.col(0) = geom::Vec3(1, 0, 0);
  cam_in_world.col(1) = geom::Vec3(0, -1, 0);
  cam_in_world.col(2) = geom::Vec3(0, 0, -1);
  geom::RigidTransform world_from_cam;
  world_from_cam.rotation = geom::Rotation::from_matrix(cam_in_world);
  world_from_cam.translation = geom::Vec3(0.5, 0.0, kCameraHeight);
  cam.extrinsics = world_from_cam.inverse();
  return cam;
}

geom::Vec3 overhead_world_at(double u, double v, double z) {
  const double d = kCameraHeight - z;
  return geom::Vec3(0.5 + (u - kCx) * d / kFocal, -(v - kCy) * d / kFocal, z);
}

FixtureInfo info(const std::string& name) {
  const FixtureDef def = fixture_by_name(name);
  return {def.instruction, def.default_mode};
}

FixtureInfo generate(const std::string& name, const std::filesystem::path& dir) {
  const FixtureDef def = fixture_by_name(name);
  write_scene_files(def, dir);
  return {def.instruction, def.default_mode};
}

}  // namespace copa::fixtures
