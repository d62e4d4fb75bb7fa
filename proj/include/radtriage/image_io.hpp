#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace radtriage {

/// Grayscale radiograph with intensities scaled to [0, 1], row-major.
struct RawRadiograph {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
  std::string source;

  float at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
};

/// Decodes 8- or 16-bit PNG. Colour images are averaged to gray; alpha is
/// dropped. Values are divided by the largest representable sample.
RawRadiograph read_png(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG; values are clamped to [0, 1] and rounded.
void write_png_gray8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                     std::span<const float> pixels);

/// Writes a 16-bit grayscale PNG (used by tests for the 16-bit decode path).
void write_png_gray16(const std::filesystem::path& path, std::size_t height, std::size_t width,
                      std::span<const std::uint16_t> pixels);

}  // namespace radtriage
