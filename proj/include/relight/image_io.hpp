#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace relight {

// Interleaved RGB float32 image, row 0 at the top.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;

  FloatImage() = default;
  FloatImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  float& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

// PFM: "PF\n<w> <h>\n<scale>\n" then float32 RGB rows, bottom row first.
// Writers always emit little-endian (scale -1); readers accept both.
std::vector<std::uint8_t> encode_pfm(const FloatImage& image);
FloatImage decode_pfm(const std::vector<std::uint8_t>& bytes);
void write_pfm(const std::filesystem::path& path, const FloatImage& image);
FloatImage read_pfm(const std::filesystem::path& path);

// 8-bit sRGB preview: linear values are clamped to [0, 1] before encoding.
void write_png_srgb(const std::filesystem::path& path, const FloatImage& image);
std::uint8_t linear_to_srgb8(float linear);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace relight
