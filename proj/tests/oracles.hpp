// Reference implementations written directly from the textbook formulas.
// They share no code with the library beyond the tensor container.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "image.hpp"
#include "tensor.hpp"

namespace oracle {

using srforge::BasicTensor;
using srforge::ConvSpec;
using srforge::Shape;

/// Direct seven-loop convolution, accumulated in double.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const std::vector<T>& bias, const ConvSpec& s) {
  const Shape in = x.shape();
  const std::size_t oh = (in.h + 2 * s.padding - s.kernel_h) / s.stride + 1;
  const std::size_t ow = (in.w + 2 * s.padding - s.kernel_w) / s.stride + 1;
  const std::size_t cin_g = s.in_channels / s.groups, cout_g = s.out_channels / s.groups;
  BasicTensor<T> out({in.n, s.out_channels, oh, ow});
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
      const std::size_t g = oc / cout_g;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[oc]);
          for (std::size_t ic = 0; ic < cin_g; ++ic)
            for (std::size_t ky = 0; ky < s.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                const long iy = static_cast<long>(y * s.stride + ky) - static_cast<long>(s.padding);
                const long ix = static_cast<long>(xo * s.stride + kx) - static_cast<long>(s.padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w)) continue;
                acc += static_cast<double>(w.at(oc, ic, ky, kx)) *
                       static_cast<double>(x.at(n, g * cin_g + ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)));
              }
          out.at(n, oc, y, xo) = static_cast<T>(acc);
        }
    }
  return out;
}

/// 10 log10(peak^2 / mse), +inf on equality.
inline double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak) {
  long double se = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
    se += d * d;
  }
  if (se == 0.0L) return std::numeric_limits<double>::infinity();
  const long double mse = se / static_cast<long double>(a.size());
  return static_cast<double>(10.0L * std::log10(static_cast<long double>(peak) * peak / mse));
}

/// Brute-force SSIM: every valid 11x11 window, Gaussian weights (sigma 1.5)
/// computed per window from the 2-D kernel, statistics accumulated directly.
inline double ssim(const std::vector<double>& a, const std::vector<double>& b, std::size_t w, std::size_t h,
                   double peak) {
  constexpr int kWin = 11;
  double kernel[kWin][kWin];
  double total_w = 0.0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      const double di = i - 5, dj = j - 5;
      kernel[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      total_w += kernel[i][j];
    }
  const double c1 = (0.01 * peak) * (0.01 * peak), c2 = (0.03 * peak) * (0.03 * peak);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + kWin <= h; ++y)
    for (std::size_t x = 0; x + kWin <= w; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double k = kernel[i][j] / total_w;
          ma += k * a[(y + i) * w + x + j];
          mb += k * b[(y + i) * w + x + j];
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double k = kernel[i][j] / total_w;
          const double da = a[(y + i) * w + x + j] - ma, db = b[(y + i) * w + x + j] - mb;
          va += k * da * da;
          vb += k * db * db;
          cov += k * da * db;
        }
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return sum / static_cast<double>(count);
}

/// Central-difference gradient of a scalar function of a flat double vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), with a floor so all-zero gradients compare as equal.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / denom;
}

template <typename T>
void fill_uniform(BasicTensor<T>& t, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data()) v = static_cast<T>(d(rng));
}

inline srforge::pipeline::ImagePlane random_plane(std::size_t w, std::size_t h, std::mt19937_64& rng, double lo = 0.0,
                                                  double hi = 255.0) {
  srforge::pipeline::ImagePlane p(w, h, srforge::pipeline::Range::Byte);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : p.data) v = d(rng);
  return p;
}

}  // namespace oracle
