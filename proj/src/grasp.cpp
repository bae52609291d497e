#include "copa/grasp.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "copa/json_io.hpp"
#include "json.hpp"

namespace copa::grasp {

namespace {

bool projects_into_mask(const GraspCandidate& cand, const parts::PartMask& part,
                        const geom::CameraModel& cam) {
  const auto px = cam.project(cand.grasp_point);
  if (!px) return false;
  const int u = int(std::lround(px->x()));
  const int v = int(std::lround(px->y()));
  return part.mask.in_bounds(u, v) && part.mask.at(u, v) != 0;
}

GraspSelection select_from_flags(const std::vector<GraspCandidate>& candidates,
                                 const std::vector<uint8_t>& in_mask) {
  GraspSelection sel;
  sel.total_count = int(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (!in_mask[i]) continue;
    ++sel.in_mask_count;
    if (sel.chosen_index < 0 || candidates[i].score > sel.chosen.score) {
      sel.chosen = candidates[i];
      sel.chosen_index = int(i);
    }
  }
  if (sel.chosen_index < 0) {
    throw Error(ErrorCode::NoCandidateInMask, "no grasp candidate projects into the part mask");
  }
  return sel;
}

}  // namespace

GraspSelection filter_and_select_serial(const std::vector<GraspCandidate>& candidates,
                                        const parts::PartMask& part,
                                        const geom::CameraModel& cam) {
  if (candidates.empty()) {
    throw Error(ErrorCode::EmptyCandidates, "candidate list is empty");
  }
  std::vector<uint8_t> in_mask(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    in_mask[i] = projects_into_mask(candidates[i], part, cam) ? 1 : 0;
  }
  return select_from_flags(candidates, in_mask);
}

GraspSelection filter_and_select(const std::vector<GraspCandidate>& candidates,
                                 const parts::PartMask& part, const geom::CameraModel& cam) {
  if (candidates.empty()) {
    throw Error(ErrorCode::EmptyCandidates, "candidate list is empty");
  }
  std::vector<uint8_t> in_mask(candidates.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < int(candidates.size()); ++i) {
    in_mask[i] = projects_into_mask(candidates[i], part, cam) ? 1 : 0;
  }
  // Serial argmax keeps the tie-break at the lowest index.
  return select_from_flags(candidates, in_mask);
}

std::vector<GraspCandidate> candidates_from_json_text(const std::string& text,
                                                      const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, origin + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::SchemaError, origin + ": expected a top-level array");
  }

  std::vector<GraspCandidate> out;
  out.reserve(doc.size());
  for (size_t i = 0; i < doc.size(); ++i) {
    const std::string at = origin + "[" + std::to_string(i) + "]";
    const auto& entry = doc[i];
    auto require = [&](const char* field) -> const nlohmann::json& {
      if (!entry.contains(field)) {
        throw Error(ErrorCode::SchemaError, at + "." + field + " is missing");
      }
      return entry[field];
    };
    GraspCandidate cand;
    try {
      cand.pose = json_io::pose_from_json(require("pose"));
      cand.grasp_point = json_io::vec3_from_json(require("grasp_point"));
      cand.width = require("width").get<double>();
      cand.height = require("height").get<double>();
      cand.depth = require("depth").get<double>();
      cand.score = require("score").get<double>();
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::SchemaError, at + ": " + e.what());
    }
    if (!(cand.width > 0) || !(cand.height > 0) || !(cand.depth > 0)) {
      throw Error(ErrorCode::SchemaError, at + ": width/height/depth must be positive");
    }
    if (!std::isfinite(cand.score)) {
      throw Error(ErrorCode::SchemaError, at + ".score is not finite");
    }
    out.push_back(cand);
  }
  return out;
}

std::vector<GraspCandidate> load_candidates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return candidates_from_json_text(text, path.filename().string());
}

std::vector<GraspCandidate> synth_candidates(const parts::GeometricElement& part, int n,
                                             uint64_t seed) {
  if (n < 1) {
    throw Error(ErrorCode::SchemaError, "synth_candidates needs n >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto on_element = [&]() -> geom::Vec3 {
    geom::Vec3 base;
    if (const auto* v = std::get_if<parts::VectorElement>(&part.shape)) {
      const double t = 0.1 + 0.8 * unit(rng);
      base = v->endpoint_near + t * (v->endpoint_far - v->endpoint_near);
    } else {
      base = std::get<parts::SurfaceElement>(part.shape).center;
    }
    // offset stays well under the 1 cm bound
    geom::Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    if (dir.norm() < 1e-9) dir = geom::Vec3(1, 0, 0);
    return base + 0.004 * unit(rng) * dir.normalized();
  };

  auto elsewhere = [&]() -> geom::Vec3 {
    geom::Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    if (dir.norm() < 1e-9) dir = geom::Vec3(0, 0, 1);
    const geom::Vec3 anchor = std::visit(
        [](const auto& s) -> geom::Vec3 {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, parts::VectorElement>) return s.anchor_point;
          else return s.center;
        },
        part.shape);
    return anchor + (0.05 + 0.25 * unit(rng)) * dir.normalized();
  };

  const geom::Rotation top_down = geom::Rotation::from_matrix(
      (geom::Mat3() << 0, 1, 0, 1, 0, 0, 0, 0, -1).finished());

  std::vector<GraspCandidate> out;
  out.reserve(size_t(3 * n));
  for (int i = 0; i < 3 * n; ++i) {
    GraspCandidate cand;
    cand.grasp_point = (i < n) ? on_element() : elsewhere();
    cand.pose.position = cand.grasp_point + geom::Vec3(0, 0, 0.04);
    cand.pose.orientation = top_down;
    cand.width = 0.04;
    cand.height = 0.02;
    cand.depth = 0.03;
    cand.score = unit(rng);
    out.push_back(cand);
  }
  return out;
}

}  // namespace copa::grasp
