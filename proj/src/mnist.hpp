#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tensor.hpp"

namespace srforge::pipeline {

/// MNIST images normalised to [0, 1] with their digit labels.
struct MnistSet {
  Tensor images;  // (n, 1, rows, cols)
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  /// First `n` items (or all, if fewer).
  MnistSet head(std::size_t n) const;
  MnistSet subset(std::span<const std::size_t> indices) const;
};

/// Parses IDX image (magic 2051) and label (magic 2049) files; `limit` = 0 loads all.
MnistSet load_mnist(const std::filesystem::path& image_file, const std::filesystem::path& label_file,
                    std::size_t limit = 0);

/// Serialises back to IDX; for an unmodified load this reproduces the input bytes.
void write_mnist(const MnistSet& set, const std::filesystem::path& image_file,
                 const std::filesystem::path& label_file);

/// Bicubic (antialiased) downscale of every image by `factor`.
Tensor downscale_mnist(const MnistSet& set, std::size_t factor = 4);

}  // namespace srforge::pipeline
