#pragma once

#include "image.hpp"

namespace srforge::pipeline {

/// Keys cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

/// Separable bicubic resampling (horizontal pass, then vertical).
///
/// Output pixel i samples input coordinate (i + 0.5) / s - 0.5 for scale s =
/// out / in. When `antialias` is set and s < 1 the kernel is stretched by 1/s
/// (and attenuated by s). Taps outside the image clamp to the nearest edge
/// pixel; weights are renormalised to sum to one.
ImagePlane bicubic_resize(const ImagePlane& img, std::size_t out_w, std::size_t out_h, bool antialias = true);

}  // namespace srforge::pipeline
