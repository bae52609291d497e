#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "copa/error.hpp"

namespace copa::img {

/// Binary mask, row-major, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  Mask() = default;
  Mask(int w, int h, uint8_t fill = 0) : width(w), height(h), data(size_t(w) * h, fill) {}

  uint8_t& at(int x, int y) { return data[size_t(y) * width + x]; }
  uint8_t at(int x, int y) const { return data[size_t(y) * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  size_t count() const;
};

/// 8-bit interleaved RGB canvas used for overlays.
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  ImageRGB() = default;
  ImageRGB(int w, int h) : width(w), height(h), data(size_t(w) * h * 3, 0) {}

  uint8_t* px(int x, int y) { return &data[(size_t(y) * width + x) * 3]; }
  const uint8_t* px(int x, int y) const { return &data[(size_t(y) * width + x) * 3]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// 16-bit single-channel image (depth maps on disk).
struct ImageGray16 {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> data;

  ImageGray16() = default;
  ImageGray16(int w, int h, uint16_t fill = 0)
      : width(w), height(h), data(size_t(w) * h, fill) {}

  uint16_t& at(int x, int y) { return data[size_t(y) * width + x]; }
  uint16_t at(int x, int y) const { return data[size_t(y) * width + x]; }
};

// Decoded PNG in a canonical layout: `samples` holds width*height*channels
// values, 8-bit images use 0..255, 16-bit 0..65535. Palette images are
// expanded to RGB on decode.
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1, 2, 3 or 4
  int bit_depth = 0;  // 8 or 16
  std::vector<uint16_t> samples;
};

DecodedPng decode_png(const std::vector<uint8_t>& bytes);
DecodedPng read_png(const std::filesystem::path& path);

void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const uint8_t* data);
void write_png_rgb8(const std::filesystem::path& path, const ImageRGB& image);
void write_png_gray16(const std::filesystem::path& path, const ImageGray16& image);

/// Any PNG becomes a mask: a pixel is true when any color channel is nonzero
/// (alpha is ignored).
Mask mask_from_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

ImageGray16 read_png_gray16(const std::filesystem::path& path);

/// Run-length encoding used in JSON manifests: alternating run lengths in
/// row-major order starting with a run of zeros.
std::vector<int64_t> rle_encode(const Mask& mask);
Mask rle_decode(int width, int height, const std::vector<int64_t>& counts);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);

}  // namespace copa::img
