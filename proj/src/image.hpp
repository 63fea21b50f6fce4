#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "error.hpp"

namespace srforge::pipeline {

/// 8-bit interleaved image with 1 (gray) or 3 (RGB) channels.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
};

enum class Range { Byte, Unit };  // [0, 255] or [0, 1]

/// One scalar channel; row-major, double precision.
struct ImagePlane {
  std::size_t width = 0;
  std::size_t height = 0;
  Range range = Range::Byte;
  std::vector<double> data;

  ImagePlane() = default;
  ImagePlane(std::size_t w, std::size_t h, Range r, double fill = 0.0) : width(w), height(h), range(r), data(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return data[y * width + x]; }

  /// Throws if any value lies outside the declared range.
  void check_range() const;
  ImagePlane crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const;
  /// Rescales between Byte and Unit ranges.
  ImagePlane to_range(Range target) const;
};

/// Decodes PNG (8-bit gray/RGB, alpha dropped) or binary PGM/PPM (P5/P6) by content sniffing.
Image8 read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

/// True if the file extension names a supported image format.
bool is_image_file(const std::filesystem::path& path);

/// Sorted list of supported image files directly inside `dir`.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Plane from one channel of an 8-bit image (Byte range).
ImagePlane channel_plane(const Image8& image, std::size_t channel);

/// Rounds and clamps a plane to 8 bits; Unit planes are scaled by 255 first.
std::vector<std::uint8_t> quantize(const ImagePlane& plane);

/// Dihedral transform id 0..7: bit 2 = horizontal flip first, bits 0-1 = quarter turns clockwise.
ImagePlane dihedral(const ImagePlane& plane, int transform_id);

}  // namespace srforge::pipeline
