#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "copa/pipeline.hpp"

namespace copa::fixtures {

struct FixtureInfo {
  std::string instruction;
  pipeline::Mode default_mode = pipeline::Mode::Full;
};

/// Names of the shipped synthetic task scenes.
std::vector<std::string> fixture_names();

/// Writes a complete scene directory (manifest.json, oracle.json, depth and
/// mask images, candidates where the fixture pins them) and returns the
/// instruction / mode to run it with.
FixtureInfo generate(const std::string& name, const std::filesystem::path& dir);

FixtureInfo info(const std::string& name);

/// The overhead camera every fixture uses: 640x480, fx=fy=500, centered
/// principal point, one meter above the tabletop looking straight down.
geom::CameraModel overhead_camera();

/// World point seen at pixel (u,v) on the horizontal plane at height z by the
/// overhead camera.
geom::Vec3 overhead_world_at(double u, double v, double z);

}  // namespace copa::fixtures
