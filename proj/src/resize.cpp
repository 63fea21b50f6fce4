#include "resize.hpp"

#include <algorithm>
#include <cmath>

namespace srforge::pipeline {

namespace {

struct Contributions {
  std::size_t taps = 0;
  std::vector<std::size_t> index;  // out_len * taps, already clamped
  std::vector<double> weight;      // out_len * taps, rows sum to 1
};

Contributions contributions(std::size_t in_len, std::size_t out_len, bool antialias) {
  const double scale = static_cast<double>(out_len) / static_cast<double>(in_len);
  const bool widen = antialias && scale < 1.0;
  const double kernel_width = widen ? 4.0 / scale : 4.0;
  Contributions c;
  c.taps = static_cast<std::size_t>(std::ceil(kernel_width)) + 2;
  c.index.resize(out_len * c.taps);
  c.weight.resize(out_len * c.taps);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto left = static_cast<std::ptrdiff_t>(std::floor(u - kernel_width / 2.0));
    double sum = 0.0;
    for (std::size_t k = 0; k < c.taps; ++k) {
      const std::ptrdiff_t j = left + static_cast<std::ptrdiff_t>(k);
      const double d = u - static_cast<double>(j);
      const double w = widen ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      const std::ptrdiff_t clamped = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(in_len) - 1);
      c.index[i * c.taps + k] = static_cast<std::size_t>(clamped);
      c.weight[i * c.taps + k] = w;
      sum += w;
    }
    for (std::size_t k = 0; k < c.taps; ++k) c.weight[i * c.taps + k] /= sum;
  }
  return c;
}

}  // namespace

double cubic_kernel(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax, ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

ImagePlane bicubic_resize(const ImagePlane& img, std::size_t out_w, std::size_t out_h, bool antialias) {
  if (out_w == 0 || out_h == 0) fail(ErrorCode::Usage, "bicubic_resize: target dimensions must be positive");
  if (img.width == 0 || img.height == 0) fail(ErrorCode::Usage, "bicubic_resize: empty input");

  const Contributions cx = contributions(img.width, out_w, antialias);
  ImagePlane tmp(out_w, img.height, img.range);
  for (std::size_t y = 0; y < img.height; ++y) {
    const double* row = img.data.data() + y * img.width;
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < cx.taps; ++k) acc += cx.weight[x * cx.taps + k] * row[cx.index[x * cx.taps + k]];
      tmp.at(x, y) = acc;
    }
  }

  const Contributions cy = contributions(img.height, out_h, antialias);
  ImagePlane out(out_w, out_h, img.range);
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < cy.taps; ++k) acc += cy.weight[y * cy.taps + k] * tmp.at(x, cy.index[y * cy.taps + k]);
      out.at(x, y) = acc;
    }
  }
  return out;
}

}  // namespace srforge::pipeline
