#include "dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "color.hpp"
#include "resize.hpp"

namespace srforge::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestMagic = "# srforge-manifest 1";

std::string join_scales(const std::vector<int>& scales) {
  std::string s;
  for (std::size_t i = 0; i < scales.size(); ++i) s += (i ? "," : "") + std::to_string(scales[i]);
  return s;
}

std::vector<int> parse_scales(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      fail(ErrorCode::Usage, "bad scale list: " + text);
    }
  }
  return out;
}

void validate_scales(const std::vector<int>& scales) {
  if (scales.empty()) fail(ErrorCode::Usage, "at least one scale is required");
  for (int s : scales) {
    if (s < 2 || s > 4) fail(ErrorCode::Usage, "scales must be 2, 3 or 4; got " + std::to_string(s));
  }
}

ImagePlane load_y_unit(const fs::path& path) { return luma_plane(read_image(path)).to_range(Range::Unit); }

}  // namespace

DegradedImage degrade(const ImagePlane& y_unit, int scale) {
  if (scale < 1) fail(ErrorCode::Usage, "scale must be positive");
  const auto s = static_cast<std::size_t>(scale);
  const std::size_t w = y_unit.width - y_unit.width % s;
  const std::size_t h = y_unit.height - y_unit.height % s;
  if (w == 0 || h == 0) fail(ErrorCode::Io, "image too small for scale " + std::to_string(scale));
  DegradedImage d;
  d.hr = y_unit.crop(0, 0, w, h);
  const ImagePlane small = bicubic_resize(d.hr, w / s, h / s, true);
  d.lr_up = bicubic_resize(small, w, h, true);
  return d;
}

Manifest make_sr_manifest(const DatasetOptions& options) {
  validate_scales(options.scales);
  if (options.patch == 0 || options.stride == 0) fail(ErrorCode::Usage, "patch and stride must be positive");
  Manifest m;
  m.root = options.image_dir;
  m.patch = options.patch;
  m.stride = options.stride;
  m.scales = options.scales;
  m.augment = options.augment;
  m.seed = options.seed;

  const auto files = list_images(options.image_dir);
  if (files.empty()) fail(ErrorCode::Io, "no images found in " + options.image_dir.string());
  const int transforms = options.augment ? 8 : 1;
  for (const auto& file : files) {
    const Image8 img = read_image(file);
    const std::string name = file.filename().string();
    for (int scale : options.scales) {
      const auto s = static_cast<std::size_t>(scale);
      const std::size_t w = img.width - img.width % s;
      const std::size_t h = img.height - img.height % s;
      if (w < options.patch || h < options.patch)
        fail(ErrorCode::Io, name + " (" + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                ") is smaller than the " + std::to_string(options.patch) + "px patch");
      for (std::size_t y = 0; y + options.patch <= h; y += options.stride)
        for (std::size_t x = 0; x + options.patch <= w; x += options.stride)
          for (int t = 0; t < transforms; ++t) m.records.push_back({name, scale, x, y, t});
    }
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(m.records.begin(), m.records.end(), rng);
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write manifest " + path.string());
  out << kManifestMagic << '\n'
      << "root\t" << manifest.root.string() << '\n'
      << "patch\t" << manifest.patch << '\n'
      << "stride\t" << manifest.stride << '\n'
      << "scales\t" << join_scales(manifest.scales) << '\n'
      << "augment\t" << (manifest.augment ? 1 : 0) << '\n'
      << "seed\t" << manifest.seed << '\n'
      << "records\t" << manifest.records.size() << '\n';
  for (const auto& r : manifest.records)
    out << r.source << '\t' << r.scale << '\t' << r.x << '\t' << r.y << '\t' << r.transform << '\n';
  if (!out) fail(ErrorCode::Io, "failed writing manifest " + path.string());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestMagic) fail(ErrorCode::Io, "not a manifest: " + path.string());

  Manifest m;
  std::size_t expected = 0;
  const auto header = [&](const char* key) {
    if (!std::getline(in, line)) fail(ErrorCode::Io, "truncated manifest header");
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.substr(0, tab) != key)
      fail(ErrorCode::Io, std::string("manifest: expected header field ") + key);
    return line.substr(tab + 1);
  };
  try {
    m.root = header("root");
    m.patch = std::stoul(header("patch"));
    m.stride = std::stoul(header("stride"));
    m.scales = parse_scales(header("scales"));
    m.augment = header("augment") == "1";
    m.seed = std::stoull(header("seed"));
    expected = std::stoul(header("records"));
  } catch (const std::logic_error&) {
    fail(ErrorCode::Io, "malformed manifest header in " + path.string());
  }
  m.records.reserve(expected);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    PatchRecord r;
    if (!std::getline(ss, r.source, '\t') || !(ss >> r.scale >> r.x >> r.y >> r.transform))
      fail(ErrorCode::Io, "malformed manifest record: " + line);
    m.records.push_back(r);
  }
  if (m.records.size() != expected) fail(ErrorCode::Io, "manifest record count mismatch in " + path.string());
  return m;
}

PatchSource::PatchSource(const Manifest& manifest) : root_(manifest.root), patch_(manifest.patch) {}

const DegradedImage& PatchSource::degraded(const std::string& source, int scale) {
  const auto key = std::make_pair(source, scale);
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, degrade(load_y_unit(root_ / source), scale)).first;
  return it->second;
}

SamplePair PatchSource::materialize(const PatchRecord& record) {
  const DegradedImage& d = degraded(record.source, record.scale);
  SamplePair pair;
  pair.scale = record.scale;
  pair.hr = dihedral(d.hr.crop(record.x, record.y, patch_, patch_), record.transform);
  pair.lr = dihedral(d.lr_up.crop(record.x, record.y, patch_, patch_), record.transform);
  return pair;
}

std::vector<SamplePair> make_sr_dataset(const DatasetOptions& options) {
  const Manifest m = make_sr_manifest(options);
  PatchSource source(m);
  std::vector<SamplePair> out;
  out.reserve(m.records.size());
  for (const auto& r : m.records) out.push_back(source.materialize(r));
  return out;
}

std::pair<Tensor, Tensor> batch_tensors(const std::vector<SamplePair>& pairs, std::span<const std::size_t> indices) {
  if (indices.empty()) fail(ErrorCode::Usage, "empty batch");
  const auto& first = pairs.at(indices[0]);
  const Shape shape{indices.size(), 1, first.hr.height, first.hr.width};
  Tensor input(shape), target(shape);
  const std::size_t plane = shape.plane();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& p = pairs.at(indices[b]);
    if (p.hr.width != shape.w || p.hr.height != shape.h) fail(ErrorCode::Usage, "batch patches differ in size");
    for (std::size_t i = 0; i < plane; ++i) {
      input[b * plane + i] = static_cast<float>(p.lr.data[i]);
      target[b * plane + i] = static_cast<float>(p.hr.data[i]);
    }
  }
  return {std::move(input), std::move(target)};
}

Tensor plane_to_tensor(const ImagePlane& plane) {
  Tensor t({1, 1, plane.height, plane.width});
  for (std::size_t i = 0; i < plane.data.size(); ++i) t[i] = static_cast<float>(plane.data[i]);
  return t;
}

ImagePlane tensor_to_plane(const Tensor& t, Range range) {
  if (t.shape().n != 1 || t.shape().c != 1) fail(ErrorCode::Usage, "tensor_to_plane expects (1, 1, h, w)");
  ImagePlane p(t.shape().w, t.shape().h, range);
  for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = static_cast<double>(t[i]);
  return p;
}

}  // namespace srforge::pipeline
