#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "image.hpp"
#include "tensor.hpp"

namespace srforge::metrics {

using pipeline::ImagePlane;

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) over the planes with `shave` border pixels removed.
/// Returns kInfinitePsnr for identical inputs. Values are compared as stored;
/// callers scale both planes to the same units as `peak`.
double psnr(const ImagePlane& a, const ImagePlane& b, double peak = 255.0, std::size_t shave = 0);

/// Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows, K1 = 0.01, K2 = 0.03.
double ssim(const ImagePlane& a, const ImagePlane& b, double peak = 255.0, std::size_t shave = 0);

struct EvalOptions {
  int scale = 2;
  std::size_t shave = 2;  // conventionally equal to scale
  bool quantize = false;  // round the [0, 255] Y planes before scoring
  unsigned threads = 1;
};

struct ImageScore {
  std::string image;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double bicubic_psnr_db = 0.0;
  double bicubic_ssim = 0.0;
};

struct EvalReport {
  std::string dataset;
  EvalOptions options;
  std::vector<ImageScore> images;

  double mean_psnr() const;
  double mean_ssim() const;
  double mean_bicubic_psnr() const;
  double mean_bicubic_ssim() const;
};

/// Maps a (1, 1, H, W) Unit-range bicubic input to a same-shape prediction.
/// Must be callable concurrently when options.threads > 1.
using Upscaler = std::function<Tensor(const Tensor&)>;

/// For each image: Y extraction, modcrop, bicubic down/up, model, clamp to
/// [0, 1], rescale to [0, 255], score against ground truth with the shave.
EvalReport evaluate_sr(const Upscaler& model, const std::filesystem::path& dataset_dir, const EvalOptions& options);

/// CSV with a settings header, one row per image, then a "mean" row.
std::string report_csv(const EvalReport& report);

}  // namespace srforge::metrics
