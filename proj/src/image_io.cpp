#include "radtriage/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "radtriage/errors.hpp"

namespace radtriage {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct DecodedPng {
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, channels = 0;
  std::vector<unsigned char> bytes;  // rows packed, big-endian samples for 16-bit
};

// Kept free of objects with non-trivial destructors between setjmp and any
// longjmp so unwinding through libpng is well-defined.
bool decode_png(std::FILE* fp, DecodedPng* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);       // palette -> RGB, low-bit gray -> 8 bit, tRNS -> alpha
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  out->channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out->bytes.resize(rowbytes * out->height);
  rows.resize(out->height);
  for (png_uint_32 y = 0; y < out->height; ++y) rows[y] = out->bytes.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode_png(std::FILE* fp, png_uint_32 width, png_uint_32 height, int bit_depth,
                const unsigned char* data) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * (bit_depth / 8);
  for (png_uint_32 y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + y * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

FilePtr open_or_throw(const std::filesystem::path& path, const char* mode) {
  FilePtr fp(std::fopen(path.c_str(), mode));
  if (!fp) throw IoError("cannot open " + path.string());
  return fp;
}

}  // namespace

RawRadiograph read_png(const std::filesystem::path& path) {
  FilePtr fp = open_or_throw(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  std::rewind(fp.get());
  DecodedPng png;
  if (!decode_png(fp.get(), &png)) throw IoError("corrupt PNG: " + path.string());

  RawRadiograph img;
  img.height = png.height;
  img.width = png.width;
  img.source = path.string();
  img.pixels.resize(static_cast<std::size_t>(png.width) * png.height);
  const bool wide = png.bit_depth == 16;
  const double max_value = wide ? 65535.0 : 255.0;
  const std::size_t bytes_per_sample = wide ? 2 : 1;
  const std::size_t c = static_cast<std::size_t>(png.channels);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const unsigned char* s = &png.bytes[(i * c + k) * bytes_per_sample];
      acc += wide ? static_cast<double>((s[0] << 8) | s[1]) : static_cast<double>(s[0]);
    }
    img.pixels[i] = static_cast<float>(acc / static_cast<double>(c) / max_value);
  }
  return img;
}

void write_png_gray8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                     std::span<const float> pixels) {
  if (pixels.size() != height * width || height == 0 || width == 0) {
    throw DimensionError("write_png_gray8: pixel count does not match " + std::to_string(height) +
                         "x" + std::to_string(width));
  }
  std::vector<unsigned char> bytes(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  FilePtr fp = open_or_throw(path, "wb");
  if (!encode_png(fp.get(), static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                  bytes.data())) {
    throw IoError("failed writing PNG " + path.string());
  }
}

void write_png_gray16(const std::filesystem::path& path, std::size_t height, std::size_t width,
                      std::span<const std::uint16_t> pixels) {
  if (pixels.size() != height * width || height == 0 || width == 0) {
    throw DimensionError("write_png_gray16: pixel count does not match dimensions");
  }
  std::vector<unsigned char> bytes(pixels.size() * 2);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    bytes[2 * i] = static_cast<unsigned char>(pixels[i] >> 8);
    bytes[2 * i + 1] = static_cast<unsigned char>(pixels[i] & 0xFF);
  }
  FilePtr fp = open_or_throw(path, "wb");
  if (!encode_png(fp.get(), static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
                  bytes.data())) {
    throw IoError("failed writing PNG " + path.string());
  }
}

}  // namespace radtriage
