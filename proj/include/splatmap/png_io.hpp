#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "splatmap/image.hpp"

namespace splatmap {

struct PngRgb8 {
  int width = 0, height = 0;
  std::vector<std::uint8_t> data;   // H*W*3
};

struct PngGray16 {
  int width = 0, height = 0;
  std::vector<std::uint16_t> data;  // H*W
};

void write_png_rgb8(const std::filesystem::path& path, const PngRgb8& img);
PngRgb8 read_png_rgb8(const std::filesystem::path& path);

void write_png_gray16(const std::filesystem::path& path, const PngGray16& img);
PngGray16 read_png_gray16(const std::filesystem::path& path);

// [0,1] <-> 8-bit, round-to-nearest with clamping.
PngRgb8 quantize_rgb8(const Image& img01);
Image dequantize_rgb8(const PngRgb8& img);

inline std::uint8_t quantize8(double v01) {
  const double v = v01 < 0.0 ? 0.0 : (v01 > 1.0 ? 1.0 : v01);
  return static_cast<std::uint8_t>(v * 255.0 + 0.5);
}

}  // namespace splatmap
