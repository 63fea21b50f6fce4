#include "mnist.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "resize.hpp"

namespace srforge::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::vector<std::uint8_t> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  if (off + 4 > b.size()) fail(ErrorCode::Io, "truncated IDX header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

MnistSet MnistSet::head(std::size_t n) const {
  n = std::min(n, size());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return subset(idx);
}

MnistSet MnistSet::subset(std::span<const std::size_t> indices) const {
  const Shape s = images.shape();
  MnistSet out;
  out.images = Tensor({indices.size(), s.c, s.h, s.w});
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= size()) fail(ErrorCode::Usage, "subset index out of range");
    std::copy_n(images.raw() + src * s.item(), s.item(), out.images.raw() + i * s.item());
    out.labels[i] = labels[src];
  }
  return out;
}

MnistSet load_mnist(const fs::path& image_file, const fs::path& label_file, std::size_t limit) {
  const auto img = read_all(image_file);
  const auto lab = read_all(label_file);
  if (be32(img, 0) != kImageMagic) fail(ErrorCode::Io, "bad IDX image magic in " + image_file.string());
  if (be32(lab, 0) != kLabelMagic) fail(ErrorCode::Io, "bad IDX label magic in " + label_file.string());
  const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  if (n != n_labels) fail(ErrorCode::Io, "image/label count mismatch: " + std::to_string(n) + " vs " + std::to_string(n_labels));
  if (img.size() != 16 + n * rows * cols) fail(ErrorCode::Io, "truncated or oversized IDX image file " + image_file.string());
  if (lab.size() != 8 + n) fail(ErrorCode::Io, "truncated or oversized IDX label file " + label_file.string());

  const std::size_t count = limit == 0 ? n : std::min(n, limit);
  MnistSet set;
  set.images = Tensor({count, 1, rows, cols});
  set.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  for (std::size_t i = 0; i < count * rows * cols; ++i) set.images[i] = static_cast<float>(img[16 + i] / 255.0);
  for (const auto l : set.labels) {
    if (l > 9) fail(ErrorCode::Io, "label out of range in " + label_file.string());
  }
  return set;
}

void write_mnist(const MnistSet& set, const fs::path& image_file, const fs::path& label_file) {
  const Shape s = set.images.shape();
  if (s.n != set.labels.size() || s.c != 1) fail(ErrorCode::Usage, "write_mnist: malformed set");
  std::ofstream img(image_file, std::ios::binary);
  std::ofstream lab(label_file, std::ios::binary);
  if (!img || !lab) fail(ErrorCode::Io, "cannot write IDX files");
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(s.n));
  put_be32(img, static_cast<std::uint32_t>(s.h));
  put_be32(img, static_cast<std::uint32_t>(s.w));
  std::vector<char> bytes(set.images.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(set.images[i], 0.0f, 1.0f) * 255.0)));
  img.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(s.n));
  lab.write(reinterpret_cast<const char*>(set.labels.data()), static_cast<std::streamsize>(set.labels.size()));
  if (!img || !lab) fail(ErrorCode::Io, "failed writing IDX files");
}

Tensor downscale_mnist(const MnistSet& set, std::size_t factor) {
  const Shape s = set.images.shape();
  if (factor == 0 || s.h % factor != 0 || s.w % factor != 0)
    fail(ErrorCode::Usage, "downscale factor must divide the image size");
  const std::size_t oh = s.h / factor, ow = s.w / factor;
  Tensor out({s.n, 1, oh, ow});
  ImagePlane plane(s.w, s.h, Range::Unit);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < s.plane(); ++i) plane.data[i] = set.images[n * s.plane() + i];
    const ImagePlane small = bicubic_resize(plane, ow, oh, true);
    for (std::size_t i = 0; i < oh * ow; ++i) out[n * oh * ow + i] = static_cast<float>(small.data[i]);
  }
  return out;
}

}  // namespace srforge::pipeline
