#include "relight/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "relight/common.hpp"

namespace relight {

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

// Reads one whitespace-delimited ASCII token starting at `pos`.
std::string next_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) token.push_back(static_cast<char>(bytes[pos++]));
  return token;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("short write to " + path.string());
}

std::vector<std::uint8_t> encode_pfm(const FloatImage& image) {
  if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw InvalidInput("PFM encode: pixel buffer does not match dimensions");
  }
  const std::string header =
      "PF\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n-1.0\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  const std::size_t row_floats = static_cast<std::size_t>(image.width) * 3;
  bytes.reserve(bytes.size() + image.rgb.size() * 4);
  for (int y = image.height - 1; y >= 0; --y) {
    const float* row = image.rgb.data() + static_cast<std::size_t>(y) * row_floats;
    for (std::size_t i = 0; i < row_floats; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(row[i]);
      if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  return bytes;
}

FloatImage decode_pfm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  if (magic != "PF") throw InvalidInput("PFM decode: expected 'PF' magic, got '" + magic + "'");
  const std::string w = next_token(bytes, pos);
  const std::string h = next_token(bytes, pos);
  const std::string s = next_token(bytes, pos);
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(w);
    height = std::stoi(h);
    scale = std::stod(s);
  } catch (const std::exception&) {
    throw InvalidInput("PFM decode: malformed header");
  }
  if (width <= 0 || height <= 0 || scale == 0.0) throw InvalidInput("PFM decode: bad dimensions or scale");
  ++pos;  // single whitespace byte terminates the header
  const std::size_t count = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() < pos + count * 4) throw InvalidInput("PFM decode: truncated pixel data");
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  FloatImage image(width, height);
  const std::size_t row_floats = static_cast<std::size_t>(width) * 3;
  for (int file_row = 0; file_row < height; ++file_row) {
    const int y = height - 1 - file_row;
    for (std::size_t i = 0; i < row_floats; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + pos, 4);
      pos += 4;
      if (swap) bits = byteswap32(bits);
      image.rgb[static_cast<std::size_t>(y) * row_floats + i] = std::bit_cast<float>(bits);
    }
  }
  return image;
}

void write_pfm(const std::filesystem::path& path, const FloatImage& image) {
  write_file_bytes(path, encode_pfm(image));
}

FloatImage read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file_bytes(path)); }

std::uint8_t linear_to_srgb8(float linear) {
  float v = std::clamp(std::isfinite(linear) ? linear : 0.0f, 0.0f, 1.0f);
  v = v <= 0.0031308f ? 12.92f * v : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
  return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

void write_png_srgb(const std::filesystem::path& path, const FloatImage& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!file) throw InvalidInput("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width * 3; ++x) {
      row[x] = linear_to_srgb8(image.rgb[static_cast<std::size_t>(y) * image.width * 3 + x]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace relight
