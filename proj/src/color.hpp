#pragma once

#include "image.hpp"

namespace srforge::pipeline {

/// BT.601 studio-swing YCbCr, planes in [0, 255] units.
struct YCbCr {
  ImagePlane y;
  ImagePlane cb;
  ImagePlane cr;
};

struct Rgb {
  ImagePlane r;
  ImagePlane g;
  ImagePlane b;
};

/// Inputs are Unit-range planes; throws if any value falls outside [0, 1].
YCbCr rgb_to_ycbcr(const ImagePlane& r, const ImagePlane& g, const ImagePlane& b);

/// Exact algebraic inverse; output planes are Unit range and are not clamped.
Rgb ycbcr_to_rgb(const ImagePlane& y, const ImagePlane& cb, const ImagePlane& cr);

/// Scalar forms, mostly for tests.
void rgb_to_ycbcr(double r, double g, double b, double& y, double& cb, double& cr);
void ycbcr_to_rgb(double y, double cb, double cr, double& r, double& g, double& b);

/// Y plane (Byte range, [16, 235]) of an 8-bit RGB image; a gray image is
/// returned unchanged as its single channel.
ImagePlane luma_plane(const Image8& image);

}  // namespace srforge::pipeline
