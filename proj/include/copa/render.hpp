#pragma once

#include <array>
#include <filesystem>

#include "copa/pipeline.hpp"
#include "copa/scene.hpp"

namespace copa::render {

struct Color {
  uint8_t r = 0, g = 0, b = 0;
};

/// Stable per-id tint palette.
Color palette_color(int id);

// Drawing primitives on an RGB canvas.
void blend_mask(img::ImageRGB& canvas, const img::Mask& mask, Color color, double alpha);
void draw_line(img::ImageRGB& canvas, Eigen::Vector2d a, Eigen::Vector2d b, Color color,
               int thickness = 1);
void draw_disc(img::ImageRGB& canvas, Eigen::Vector2d center, double radius, Color color);
/// 5x7 bitmap digits, scaled; draws the decimal representation of `number`.
void draw_number(img::ImageRGB& canvas, int x, int y, int number, int scale, Color color);

/// Grayscale visualization of a depth map (invalid pixels stay black).
img::ImageRGB depth_visualization(const geom::DepthImage& depth);

/// Writes one annotated overlay per camera: masks tinted, vectors and normals
/// drawn, labels placed, planned poses projected. Throws when the report has
/// no elements.
std::vector<std::filesystem::path> render_scene(const scene::Scene& scene,
                                                const pipeline::RunReport& report,
                                                const std::filesystem::path& out_dir);

}  // namespace copa::render
