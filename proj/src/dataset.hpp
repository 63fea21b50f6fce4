#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "image.hpp"
#include "tensor.hpp"

namespace srforge::pipeline {

struct DatasetOptions {
  std::filesystem::path image_dir;
  std::vector<int> scales{2, 3, 4};
  std::size_t patch = 41;
  std::size_t stride = 41;
  bool augment = true;
  std::uint64_t seed = 1;
};

/// One patch location; pixels are recomputed from the source on demand.
struct PatchRecord {
  std::string source;  // file name relative to Manifest::root
  int scale = 2;
  std::size_t x = 0;
  std::size_t y = 0;
  int transform = 0;  // dihedral id, see pipeline::dihedral

  bool operator==(const PatchRecord&) const = default;
};

struct Manifest {
  std::filesystem::path root;
  std::size_t patch = 41;
  std::size_t stride = 41;
  std::vector<int> scales;
  bool augment = false;
  std::uint64_t seed = 1;
  std::vector<PatchRecord> records;
};

/// Y-channel (Unit range) training pair: bicubic down-then-up input and ground truth.
struct SamplePair {
  ImagePlane lr;
  ImagePlane hr;
  int scale = 2;
};

/// Ground truth and bicubic input for one source image at one scale, both
/// modcropped to a multiple of `scale`, Unit range.
struct DegradedImage {
  ImagePlane hr;
  ImagePlane lr_up;
};

/// Y-channel degradation: crop to scale-divisible size, antialiased bicubic
/// downscale by `scale`, bicubic upscale back to the cropped size.
DegradedImage degrade(const ImagePlane& y_unit, int scale);

/// Enumerates patches: images in sorted order, each scale, row-major tiles,
/// every dihedral transform when augmenting; then a seeded shuffle.
Manifest make_sr_manifest(const DatasetOptions& options);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Materialises records, caching one degraded image per (source, scale).
class PatchSource {
 public:
  explicit PatchSource(const Manifest& manifest);

  SamplePair materialize(const PatchRecord& record);
  /// Drops cached images (the cache only grows otherwise).
  void clear() { cache_.clear(); }

 private:
  const DegradedImage& degraded(const std::string& source, int scale);

  std::filesystem::path root_;
  std::size_t patch_;
  std::map<std::pair<std::string, int>, DegradedImage> cache_;
};

/// Convenience: manifest plus materialised pairs, in manifest order.
std::vector<SamplePair> make_sr_dataset(const DatasetOptions& options);

/// Packs pairs[indices] into (B, 1, P, P) input and target tensors.
std::pair<Tensor, Tensor> batch_tensors(const std::vector<SamplePair>& pairs, std::span<const std::size_t> indices);

Tensor plane_to_tensor(const ImagePlane& plane);
ImagePlane tensor_to_plane(const Tensor& t, Range range);

}  // namespace srforge::pipeline
