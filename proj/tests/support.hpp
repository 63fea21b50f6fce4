#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "image.hpp"
#include "mnist.hpp"

namespace support {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("srforge_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Smooth synthetic scene (gradients, rings and a few edges) so bicubic
/// degradation loses real detail.
inline srforge::pipeline::Image8 synthetic_image(std::size_t w, std::size_t h, std::size_t channels, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fx = 0.05 + 0.25 * u(rng), fy = 0.05 + 0.25 * u(rng), cx = w * u(rng), cy = h * u(rng);
  srforge::pipeline::Image8 img{w, h, channels, std::vector<std::uint8_t>(w * h * channels)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double r = std::hypot(x - cx, y - cy);
      const double base = 0.5 + 0.25 * std::sin(fx * x) * std::cos(fy * y) + 0.2 * std::sin(0.4 * r);
      const double edge = ((x / 13 + y / 17) % 2 == 0) ? 0.1 : -0.1;
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = std::clamp(base + edge + 0.08 * static_cast<double>(c), 0.0, 1.0);
        img.pixels[(y * w + x) * channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  return img;
}

inline void write_images(const fs::path& dir, int count, std::size_t w, std::size_t h, std::size_t channels) {
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i)
    srforge::pipeline::write_png(dir / ("img" + std::to_string(i) + ".png"),
                                 synthetic_image(w, h, channels, static_cast<unsigned>(100 + i)));
}

/// Blocky synthetic digits: each label draws a distinct bar pattern.
inline srforge::pipeline::MnistSet synthetic_mnist(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  srforge::pipeline::MnistSet set;
  set.images = srforge::Tensor({n, 1, 28, 28});
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng() % 10);
    set.labels[i] = static_cast<std::uint8_t>(label);
    const std::size_t off = rng() % 3;
    for (std::size_t y = 4; y < 24; ++y)
      for (std::size_t x = 4; x < 24; ++x) {
        const bool on = ((x + off) / 4 + label) % 3 == 0 || ((y + off) / 4 + label / 3) % 4 == 0;
        set.images.at(i, 0, y, x) = on ? static_cast<float>(std::round(255.0 * (0.6 + 0.4 * ((x * y) % 5) / 4.0)) / 255.0)
                                       : 0.0f;
      }
  }
  return set;
}

/// Data root from the environment or the configured default, or empty.
inline fs::path data_root() {
  if (const char* env = std::getenv("SRFORGE_DATA_DIR"); env && *env) return env;
#ifdef SRFORGE_DEFAULT_DATA_DIR
  return SRFORGE_DEFAULT_DATA_DIR;
#else
  return {};
#endif
}

inline bool have_mnist() {
  const fs::path d = data_root() / "mnist";
  return !data_root().empty() && fs::exists(d / "train-images-idx3-ubyte") && fs::exists(d / "t10k-labels-idx1-ubyte");
}

}  // namespace support
