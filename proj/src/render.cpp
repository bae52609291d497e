#include "copa/render.hpp"

#include <algorithm>
#include <cmath>

namespace copa::render {

namespace {

// 5x7 digit glyphs, one bit per pixel, row-major from the top.
constexpr std::array<std::array<uint8_t, 7>, 10> kDigits = {{
    {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e},  // 0
    {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e},  // 1
    {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f},  // 2
    {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e},  // 3
    {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02},  // 4
    {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e},  // 5
    {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e},  // 6
    {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e},  // 8
    {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c},  // 9
}};

void set_px(img::ImageRGB& canvas, int x, int y, Color c) {
  if (!canvas.in_bounds(x, y)) return;
  uint8_t* px = canvas.px(x, y);
  px[0] = c.r;
  px[1] = c.g;
  px[2] = c.b;
}

}  // namespace

Color palette_color(int id) {
  static constexpr std::array<Color, 8> kPalette = {{
      {230, 80, 60},
      {70, 160, 240},
      {90, 200, 100},
      {240, 200, 60},
      {200, 90, 220},
      {60, 210, 210},
      {240, 140, 60},
      {150, 150, 240},
  }};
  return kPalette[size_t(std::abs(id)) % kPalette.size()];
}

void blend_mask(img::ImageRGB& canvas, const img::Mask& mask, Color color, double alpha) {
  const int w = std::min(canvas.width, mask.width);
  const int h = std::min(canvas.height, mask.height);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      uint8_t* px = canvas.px(x, y);
      px[0] = uint8_t((1 - alpha) * px[0] + alpha * color.r);
      px[1] = uint8_t((1 - alpha) * px[1] + alpha * color.g);
      px[2] = uint8_t((1 - alpha) * px[2] + alpha * color.b);
    }
  }
}

void draw_line(img::ImageRGB& canvas, Eigen::Vector2d a, Eigen::Vector2d b, Color color,
               int thickness) {
  const double len = (b - a).norm();
  const int steps = std::max(1, int(std::ceil(len)));
  for (int i = 0; i <= steps; ++i) {
    const double t = double(i) / steps;
    const Eigen::Vector2d p = (1 - t) * a + t * b;
    for (int dy = -(thickness - 1); dy <= thickness - 1; ++dy) {
      for (int dx = -(thickness - 1); dx <= thickness - 1; ++dx) {
        set_px(canvas, int(std::lround(p.x())) + dx, int(std::lround(p.y())) + dy, color);
      }
    }
  }
}

void draw_disc(img::ImageRGB& canvas, Eigen::Vector2d center, double radius, Color color) {
  const int r = int(std::ceil(radius));
  const int cx = int(std::lround(center.x()));
  const int cy = int(std::lround(center.y()));
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) set_px(canvas, cx + dx, cy + dy, color);
    }
  }
}

void draw_number(img::ImageRGB& canvas, int x, int y, int number, int scale, Color color) {
  const std::string digits = std::to_string(number);
  int cursor = x;
  for (char ch : digits) {
    if (ch < '0' || ch > '9') {
      cursor += 3 * scale;
      continue;
    }
    const auto& glyph = kDigits[size_t(ch - '0')];
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (!(glyph[row] & (1 << (4 - col)))) continue;
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            set_px(canvas, cursor + col * scale + sx, y + row * scale + sy, color);
          }
        }
      }
    }
    cursor += 6 * scale;
  }
}

img::ImageRGB depth_visualization(const geom::DepthImage& depth) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  for (float d : depth.data) {
    if (!geom::DepthImage::valid(d)) continue;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  img::ImageRGB canvas(depth.width, depth.height);
  if (!(hi > lo)) hi = lo + 1.f;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const float d = depth.at(x, y);
      if (!geom::DepthImage::valid(d)) continue;
      // nearer is brighter
      const double t = 1.0 - (d - lo) / (hi - lo);
      const uint8_t v = uint8_t(40 + 200 * t);
      uint8_t* px = canvas.px(x, y);
      px[0] = px[1] = px[2] = v;
    }
  }
  return canvas;
}

std::vector<std::filesystem::path> render_scene(const scene::Scene& scene,
                                                const pipeline::RunReport& report,
                                                const std::filesystem::path& out_dir) {
  if (report.elements.empty()) {
    throw Error(ErrorCode::InvalidScene, "report contains no modeled elements to render");
  }
  std::filesystem::create_directories(out_dir);

  const Color white{255, 255, 255};
  const Color black{10, 10, 10};
  const Color trajectory_color{255, 255, 255};

  std::vector<std::filesystem::path> written;
  for (size_t cam_idx = 0; cam_idx < scene.cameras.size(); ++cam_idx) {
    const auto& entry = scene.cameras[cam_idx];
    img::ImageRGB canvas =
        entry.rgb ? *entry.rgb : depth_visualization(entry.depth);

    for (const auto& [id, part] : scene.parts) {
      if (part.camera != int(cam_idx)) continue;
      if (!report.elements.count(id)) continue;
      blend_mask(canvas, part.mask, palette_color(id), 0.45);
    }

    const geom::CameraModel& cam = entry.model;
    for (const auto& [id, element] : report.elements) {
      if (scene.parts.count(id) && scene.parts.at(id).camera != int(cam_idx)) continue;
      const Color color = palette_color(id);
      Eigen::Vector2d label_at;
      if (const auto* v = std::get_if<parts::VectorElement>(&element.shape)) {
        const auto a = cam.project(v->endpoint_near);
        const auto b = cam.project(v->endpoint_far);
        if (!a || !b) continue;
        draw_line(canvas, *a, *b, white, 2);
        draw_disc(canvas, *b, 3.0, color);
        label_at = *b + Eigen::Vector2d(6, -6);
      } else {
        const auto& s = std::get<parts::SurfaceElement>(element.shape);
        const auto c = cam.project(s.center);
        const auto tip = cam.project(s.center + 0.05 * s.normal.vec());
        if (!c) continue;
        draw_disc(canvas, *c, 3.0, color);
        if (tip) draw_line(canvas, *c, *tip, white, 2);
        label_at = *c + Eigen::Vector2d(6, -6);
      }
      draw_number(canvas, int(std::lround(label_at.x())), int(std::lround(label_at.y())) - 14,
                  element.id, 2, black);
      draw_number(canvas, int(std::lround(label_at.x())) + 1,
                  int(std::lround(label_at.y())) - 15, element.id, 2, white);
    }

    // planned trajectory projection
    if (!report.waypoints.empty()) {
      std::optional<Eigen::Vector2d> prev;
      for (const auto& pose : report.waypoints) {
        const auto px = cam.project(pose.position);
        if (px && prev) draw_line(canvas, *prev, *px, trajectory_color, 1);
        prev = px ? std::optional<Eigen::Vector2d>(*px) : std::nullopt;
      }
      for (const auto& step : report.pose_sequence) {
        const auto px = cam.project(step.pose.position);
        if (px) draw_disc(canvas, *px, 3.5, Color{255, 60, 60});
      }
    }

    const auto path = out_dir / ("overlay_cam" + std::to_string(cam_idx) + ".png");
    img::write_png_rgb8(path, canvas);
    written.push_back(path);
  }
  return written;
}

}  // namespace copa::render
