#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace canopyscan::data {

/// Raw interleaved pixels as stored in files. 8-bit for RGB, 16-bit for
/// single-band NIR / thermal.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
  bool operator==(const Image8&) const = default;
};

struct Image16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;  // single band
  bool operator==(const Image16&) const = default;
};

using Bytes = std::vector<std::uint8_t>;

Bytes encode_png(const Image8& img);
Bytes encode_png(const Image16& img);
/// Decodes any 8-bit PNG to RGB (gray expanded, alpha dropped, palette expanded).
Image8 decode_png_rgb8(std::span<const std::uint8_t> bytes);
/// Decodes a 16-bit single-band PNG. Other bit depths are a FormatError so a
/// quantization mistake can't slip through.
Image16 decode_png_gray16(std::span<const std::uint8_t> bytes);

Bytes encode_jpeg(const Image8& img, int quality = 95);
Image8 decode_jpeg_rgb8(std::span<const std::uint8_t> bytes);

/// Sniffs PNG / JPEG signatures.
Image8 decode_image_rgb8(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace canopyscan::data
