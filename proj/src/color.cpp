#include "color.hpp"

#include <Eigen/Dense>

namespace srforge::pipeline {

namespace {

// Rows: Y, Cb, Cr; columns: R, G, B (inputs in [0, 1], outputs in [0, 255] units).
const Eigen::Matrix3d& forward_matrix() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 65.481, 128.553, 24.966,  //
                                    -37.797, -74.203, 112.0,                          //
                                    112.0, -93.786, -18.214)
                                       .finished();
  return m;
}

const Eigen::Matrix3d& inverse_matrix() {
  static const Eigen::Matrix3d m = forward_matrix().inverse();
  return m;
}

const Eigen::Vector3d kOffset(16.0, 128.0, 128.0);

void check_planes(const ImagePlane& a, const ImagePlane& b, const ImagePlane& c) {
  if (a.width != b.width || a.width != c.width || a.height != b.height || a.height != c.height)
    fail(ErrorCode::Usage, "colour planes must share dimensions");
}

}  // namespace

void rgb_to_ycbcr(double r, double g, double b, double& y, double& cb, double& cr) {
  const Eigen::Vector3d out = forward_matrix() * Eigen::Vector3d(r, g, b) + kOffset;
  y = out[0];
  cb = out[1];
  cr = out[2];
}

void ycbcr_to_rgb(double y, double cb, double cr, double& r, double& g, double& b) {
  const Eigen::Vector3d out = inverse_matrix() * (Eigen::Vector3d(y, cb, cr) - kOffset);
  r = out[0];
  g = out[1];
  b = out[2];
}

YCbCr rgb_to_ycbcr(const ImagePlane& r, const ImagePlane& g, const ImagePlane& b) {
  check_planes(r, g, b);
  for (const ImagePlane* p : {&r, &g, &b}) {
    if (p->range != Range::Unit) fail(ErrorCode::Usage, "rgb_to_ycbcr expects unit-range planes");
    p->check_range();
  }
  YCbCr out{ImagePlane(r.width, r.height, Range::Byte), ImagePlane(r.width, r.height, Range::Byte),
            ImagePlane(r.width, r.height, Range::Byte)};
  for (std::size_t i = 0; i < r.data.size(); ++i)
    rgb_to_ycbcr(r.data[i], g.data[i], b.data[i], out.y.data[i], out.cb.data[i], out.cr.data[i]);
  return out;
}

Rgb ycbcr_to_rgb(const ImagePlane& y, const ImagePlane& cb, const ImagePlane& cr) {
  check_planes(y, cb, cr);
  Rgb out{ImagePlane(y.width, y.height, Range::Unit), ImagePlane(y.width, y.height, Range::Unit),
          ImagePlane(y.width, y.height, Range::Unit)};
  for (std::size_t i = 0; i < y.data.size(); ++i)
    ycbcr_to_rgb(y.data[i], cb.data[i], cr.data[i], out.r.data[i], out.g.data[i], out.b.data[i]);
  return out;
}

ImagePlane luma_plane(const Image8& image) {
  if (image.channels == 1) return channel_plane(image, 0);
  if (image.channels != 3) fail(ErrorCode::Usage, "luma_plane: 1 or 3 channels required");
  const auto r = channel_plane(image, 0).to_range(Range::Unit);
  const auto g = channel_plane(image, 1).to_range(Range::Unit);
  const auto b = channel_plane(image, 2).to_range(Range::Unit);
  return rgb_to_ycbcr(r, g, b).y;
}

}  // namespace srforge::pipeline
