#include "copa/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

namespace copa::img {

size_t Mask::count() const {
  return size_t(std::count_if(data.begin(), data.end(), [](uint8_t v) { return v != 0; }));
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::IoError, "short write to " + path.string());
  }
}

namespace {

constexpr uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

uint32_t read_be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void push_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

int channels_for_color_type(int ct) {
  switch (ct) {
    case 0: return 1;  // gray
    case 2: return 3;  // rgb
    case 3: return 1;  // palette index
    case 4: return 2;  // gray + alpha
    case 6: return 4;  // rgba
    default: return 0;
  }
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

void unfilter(std::vector<uint8_t>& raw, int height, size_t row_bytes, int bpp) {
  std::vector<uint8_t> prev(row_bytes, 0);
  for (int y = 0; y < height; ++y) {
    uint8_t* row = raw.data() + size_t(y) * (row_bytes + 1);
    const int filter = row[0];
    uint8_t* cur = row + 1;
    switch (filter) {
      case 0: break;
      case 1:
        for (size_t i = bpp; i < row_bytes; ++i) cur[i] = uint8_t(cur[i] + cur[i - bpp]);
        break;
      case 2:
        for (size_t i = 0; i < row_bytes; ++i) cur[i] = uint8_t(cur[i] + prev[i]);
        break;
      case 3:
        for (size_t i = 0; i < row_bytes; ++i) {
          const int left = i >= size_t(bpp) ? cur[i - bpp] : 0;
          cur[i] = uint8_t(cur[i] + (left + prev[i]) / 2);
        }
        break;
      case 4:
        for (size_t i = 0; i < row_bytes; ++i) {
          const int left = i >= size_t(bpp) ? cur[i - bpp] : 0;
          const int upleft = i >= size_t(bpp) ? prev[i - bpp] : 0;
          cur[i] = uint8_t(cur[i] + paeth(left, prev[i], upleft));
        }
        break;
      default:
        throw Error(ErrorCode::IoError, "png: unknown filter type " + std::to_string(filter));
    }
    std::memcpy(prev.data(), cur, row_bytes);
  }
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& compressed, size_t expected) {
  std::vector<uint8_t> out(expected);
  uLongf dest_len = uLongf(expected);
  const int rc = uncompress(out.data(), &dest_len, compressed.data(), uLong(compressed.size()));
  if (rc != Z_OK || dest_len != expected) {
    throw Error(ErrorCode::IoError, "png: corrupt compressed data");
  }
  return out;
}

std::vector<uint8_t> zlib_deflate(const uint8_t* data, size_t size) {
  uLongf bound = compressBound(uLong(size));
  std::vector<uint8_t> out(bound);
  const int rc = compress2(out.data(), &bound, data, uLong(size), 6);
  if (rc != Z_OK) {
    throw Error(ErrorCode::IoError, "png: deflate failed");
  }
  out.resize(bound);
  return out;
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
  push_be32(out, uint32_t(data.size()));
  const size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), out.data() + type_pos, uInt(4 + data.size()));
  push_be32(out, uint32_t(crc));
}

std::vector<uint8_t> encode_png(int width, int height, int channels, int bit_depth,
                                const uint8_t* raw_be) {
  std::vector<uint8_t> out(kPngSignature, kPngSignature + 8);

  std::vector<uint8_t> ihdr;
  push_be32(ihdr, uint32_t(width));
  push_be32(ihdr, uint32_t(height));
  ihdr.push_back(uint8_t(bit_depth));
  ihdr.push_back(channels == 1 ? 0 : 2);
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);

  const size_t row_bytes = size_t(width) * channels * (bit_depth / 8);
  std::vector<uint8_t> filtered;
  filtered.reserve((row_bytes + 1) * height);
  for (int y = 0; y < height; ++y) {
    filtered.push_back(0);
    filtered.insert(filtered.end(), raw_be + size_t(y) * row_bytes,
                    raw_be + size_t(y + 1) * row_bytes);
  }
  append_chunk(out, "IDAT", zlib_deflate(filtered.data(), filtered.size()));
  append_chunk(out, "IEND", {});
  return out;
}

}  // namespace

DecodedPng decode_png(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0) {
    throw Error(ErrorCode::IoError, "png: bad signature");
  }

  int width = 0, height = 0, bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<uint8_t> idat;
  std::vector<uint8_t> palette;  // rgb triplets
  bool seen_ihdr = false, seen_iend = false;

  size_t pos = 8;
  while (pos + 12 <= bytes.size() && !seen_iend) {
    const uint32_t len = read_be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) {
      throw Error(ErrorCode::IoError, "png: truncated chunk");
    }
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* data = &bytes[pos + 8];
    const uint32_t stored_crc = read_be32(&bytes[pos + 8 + len]);
    const uLong crc = crc32(crc32(0L, Z_NULL, 0), &bytes[pos + 4], uInt(4 + len));
    if (uint32_t(crc) != stored_crc) {
      throw Error(ErrorCode::IoError, "png: chunk crc mismatch");
    }

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw Error(ErrorCode::IoError, "png: bad IHDR");
      width = int(read_be32(data));
      height = int(read_be32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      interlace = data[12];
      seen_ihdr = true;
      if (width <= 0 || height <= 0 || size_t(width) * size_t(height) > 100000000ull) {
        throw Error(ErrorCode::IoError, "png: unsupported dimensions");
      }
      if (bit_depth != 8 && bit_depth != 16) {
        throw Error(ErrorCode::IoError, "png: only 8/16-bit images are supported");
      }
      if (channels_for_color_type(color_type) == 0) {
        throw Error(ErrorCode::IoError, "png: unknown color type");
      }
      if (color_type == 3 && bit_depth != 8) {
        throw Error(ErrorCode::IoError, "png: only 8-bit palettes are supported");
      }
      if (interlace != 0) {
        throw Error(ErrorCode::IoError, "png: interlaced images are not supported");
      }
    } else if (std::memcmp(type, "PLTE", 4) == 0) {
      palette.assign(data, data + len);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    // ancillary chunks are skipped
    pos += 12 + len;
  }

  if (!seen_ihdr || idat.empty()) {
    throw Error(ErrorCode::IoError, "png: missing IHDR or IDAT");
  }

  const int raw_channels = channels_for_color_type(color_type);
  const size_t row_bytes = size_t(width) * raw_channels * (bit_depth / 8);
  std::vector<uint8_t> raw = zlib_inflate(idat, (row_bytes + 1) * height);
  unfilter(raw, height, row_bytes, std::max<size_t>(1, raw_channels * (bit_depth / 8)));

  DecodedPng out;
  out.width = width;
  out.height = height;
  out.bit_depth = bit_depth;

  if (color_type == 3) {
    if (palette.empty()) throw Error(ErrorCode::IoError, "png: palette image without PLTE");
    out.channels = 3;
    out.samples.resize(size_t(width) * height * 3);
    for (int y = 0; y < height; ++y) {
      const uint8_t* row = raw.data() + size_t(y) * (row_bytes + 1) + 1;
      for (int x = 0; x < width; ++x) {
        const size_t idx = size_t(row[x]) * 3;
        if (idx + 2 >= palette.size()) {
          throw Error(ErrorCode::IoError, "png: palette index out of range");
        }
        uint16_t* px = &out.samples[(size_t(y) * width + x) * 3];
        px[0] = palette[idx];
        px[1] = palette[idx + 1];
        px[2] = palette[idx + 2];
      }
    }
    return out;
  }

  out.channels = raw_channels;
  out.samples.resize(size_t(width) * height * raw_channels);
  const int bytes_per_sample = bit_depth / 8;
  for (int y = 0; y < height; ++y) {
    const uint8_t* row = raw.data() + size_t(y) * (row_bytes + 1) + 1;
    for (size_t i = 0; i < size_t(width) * raw_channels; ++i) {
      if (bytes_per_sample == 1) {
        out.samples[size_t(y) * width * raw_channels + i] = row[i];
      } else {
        out.samples[size_t(y) * width * raw_channels + i] =
            uint16_t((uint16_t(row[2 * i]) << 8) | row[2 * i + 1]);
      }
    }
  }
  return out;
}

DecodedPng read_png(const std::filesystem::path& path) {
  return decode_png(read_file_bytes(path));
}

void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const uint8_t* data) {
  write_file_bytes(path, encode_png(width, height, 1, 8, data));
}

void write_png_rgb8(const std::filesystem::path& path, const ImageRGB& image) {
  write_file_bytes(path, encode_png(image.width, image.height, 3, 8, image.data.data()));
}

void write_png_gray16(const std::filesystem::path& path, const ImageGray16& image) {
  std::vector<uint8_t> be(image.data.size() * 2);
  for (size_t i = 0; i < image.data.size(); ++i) {
    be[2 * i] = uint8_t(image.data[i] >> 8);
    be[2 * i + 1] = uint8_t(image.data[i] & 0xff);
  }
  write_file_bytes(path, encode_png(image.width, image.height, 1, 16, be.data()));
}

Mask mask_from_png(const std::filesystem::path& path) {
  const DecodedPng png = read_png(path);
  Mask mask(png.width, png.height);
  const int color_channels = png.channels == 2 ? 1 : (png.channels == 4 ? 3 : png.channels);
  for (size_t p = 0; p < size_t(png.width) * png.height; ++p) {
    bool on = false;
    for (int c = 0; c < color_channels; ++c) {
      if (png.samples[p * png.channels + c] != 0) {
        on = true;
        break;
      }
    }
    mask.data[p] = on ? 1 : 0;
  }
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<uint8_t> gray(mask.data.size());
  for (size_t i = 0; i < mask.data.size(); ++i) gray[i] = mask.data[i] ? 255 : 0;
  write_png_gray8(path, mask.width, mask.height, gray.data());
}

ImageGray16 read_png_gray16(const std::filesystem::path& path) {
  const DecodedPng png = read_png(path);
  if (png.channels != 1) {
    throw Error(ErrorCode::IoError, "expected single-channel image: " + path.string());
  }
  ImageGray16 out(png.width, png.height);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = png.samples[i];
  return out;
}

std::vector<int64_t> rle_encode(const Mask& mask) {
  std::vector<int64_t> counts;
  uint8_t current = 0;
  int64_t run = 0;
  for (uint8_t v : mask.data) {
    const uint8_t bit = v ? 1 : 0;
    if (bit == current) {
      ++run;
    } else {
      counts.push_back(run);
      current = bit;
      run = 1;
    }
  }
  counts.push_back(run);
  return counts;
}

Mask rle_decode(int width, int height, const std::vector<int64_t>& counts) {
  Mask mask(width, height);
  const int64_t total = std::accumulate(counts.begin(), counts.end(), int64_t(0));
  if (total != int64_t(width) * height) {
    throw Error(ErrorCode::SchemaError, "rle counts do not cover the image");
  }
  size_t pos = 0;
  uint8_t bit = 0;
  for (int64_t c : counts) {
    if (c < 0) throw Error(ErrorCode::SchemaError, "rle count is negative");
    std::fill_n(mask.data.begin() + pos, size_t(c), bit);
    pos += size_t(c);
    bit ^= 1;
  }
  return mask;
}

}  // namespace copa::img
