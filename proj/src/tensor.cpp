#include "tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace srforge {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const Mat<T>>;

// Output columns [lo, hi) whose tap at kernel offset k lands inside [0, w).
inline void valid_span(std::ptrdiff_t k, std::ptrdiff_t pad, std::ptrdiff_t stride, std::ptrdiff_t w,
                       std::size_t out_w, std::size_t& lo, std::size_t& hi) {
  const std::ptrdiff_t first = pad - k;  // smallest ox*stride allowed
  const std::ptrdiff_t l = first <= 0 ? 0 : (first + stride - 1) / stride;
  const std::ptrdiff_t last = w - 1 + pad - k;  // largest ox*stride allowed
  const std::ptrdiff_t h = last < 0 ? 0 : last / stride + 1;
  lo = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(l, 0, static_cast<std::ptrdiff_t>(out_w)));
  hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(h, static_cast<std::ptrdiff_t>(lo), static_cast<std::ptrdiff_t>(out_w)));
}

// Column buffer for one image and one channel group: rows are (c, ky, kx),
// columns are output positions (oy, ox). Out-of-bounds taps read zero.
template <typename T>
void im2col(const T* image, std::size_t height, std::size_t width, std::size_t channels,
            const ConvSpec& spec, std::size_t out_h, std::size_t out_w, T* col) {
  const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
  const auto stride = static_cast<std::ptrdiff_t>(spec.stride);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  const std::size_t positions = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = image + c * height * width;
    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
        T* row = col + ((c * spec.kernel_h + ky) * spec.kernel_w + kx) * positions;
        std::size_t lo = 0, hi = 0;
        valid_span(static_cast<std::ptrdiff_t>(kx), pad, stride, w, out_w, lo, hi);
        const std::ptrdiff_t x_off = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(ky) - pad;
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          std::fill(dst, dst + lo, T(0));
          if (lo < hi) {
            const T* src = plane + iy * w + x_off + static_cast<std::ptrdiff_t>(lo) * stride;
            if (stride == 1) {
              std::copy(src, src + (hi - lo), dst + lo);
            } else {
              for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[static_cast<std::ptrdiff_t>(ox - lo) * stride];
            }
          }
          std::fill(dst + hi, dst + out_w, T(0));
        }
      }
    }
  }
}

// Scatter-add of a column buffer back onto an image (adjoint of im2col).
template <typename T>
void col2im(const T* col, std::size_t height, std::size_t width, std::size_t channels,
            const ConvSpec& spec, std::size_t out_h, std::size_t out_w, T* image) {
  const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
  const auto stride = static_cast<std::ptrdiff_t>(spec.stride);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  const std::size_t positions = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = image + c * height * width;
    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
        const T* row = col + ((c * spec.kernel_h + ky) * spec.kernel_w + kx) * positions;
        std::size_t lo = 0, hi = 0;
        valid_span(static_cast<std::ptrdiff_t>(kx), pad, stride, w, out_w, lo, hi);
        const std::ptrdiff_t x_off = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(ky) - pad;
          if (iy < 0 || iy >= h) continue;
          if (lo == hi) continue;
          const T* src = row + oy * out_w;
          T* dst = plane + iy * w + x_off + static_cast<std::ptrdiff_t>(lo) * stride;
          if (stride == 1) {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox - lo] += src[ox];
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[static_cast<std::ptrdiff_t>(ox - lo) * stride] += src[ox];
          }
        }
      }
    }
  }
}

void check_conv_input(const Shape& input, const Shape& weight, const ConvSpec& spec) {
  spec.validate();
  if (input.c != spec.in_channels)
    fail(ErrorCode::Usage, "conv2d: input has " + std::to_string(input.c) + " channels, spec expects " +
                               std::to_string(spec.in_channels));
  if (weight != spec.weight_shape())
    fail(ErrorCode::Usage, "conv2d: weight shape " + to_string(weight) + " does not match spec " +
                               to_string(spec.weight_shape()));
  if (input.h + 2 * spec.padding < spec.kernel_h || input.w + 2 * spec.padding < spec.kernel_w)
    fail(ErrorCode::Usage, "conv2d: input " + to_string(input) + " smaller than kernel");
}

}  // namespace

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) + ", " +
         std::to_string(s.w) + ")";
}

void ConvSpec::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0 || groups == 0)
    fail(ErrorCode::Usage, "conv spec fields must be positive");
  if (in_channels % groups != 0 || out_channels % groups != 0)
    fail(ErrorCode::Usage, "conv groups " + std::to_string(groups) + " must divide in_channels " +
                               std::to_string(in_channels) + " and out_channels " + std::to_string(out_channels));
}

Shape ConvSpec::weight_shape() const { return {out_channels, in_channels / groups, kernel_h, kernel_w}; }

std::size_t ConvSpec::out_h(std::size_t in_h) const { return (in_h + 2 * padding - kernel_h) / stride + 1; }
std::size_t ConvSpec::out_w(std::size_t in_w) const { return (in_w + 2 * padding - kernel_w) / stride + 1; }

Shape ConvSpec::output_shape(const Shape& input) const {
  return {input.n, out_channels, out_h(input.h), out_w(input.w)};
}

void check_same_shape(const Shape& a, const Shape& b, const char* where) {
  if (a != b) fail(ErrorCode::Usage, std::string(where) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

template <typename T>
void check_finite(const BasicTensor<T>& t, const char* where) {
  for (const T v : t.data()) {
    if (!std::isfinite(v)) fail(ErrorCode::Numeric, std::string(where) + ": non-finite value");
  }
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              std::span<const T> bias, const ConvSpec& spec) {
  check_conv_input(input.shape(), weight.shape(), spec);
  if (!bias.empty() && bias.size() != spec.out_channels)
    fail(ErrorCode::Usage, "conv2d: bias length does not match out_channels");

  const Shape in = input.shape();
  const Shape out_shape = spec.output_shape(in);
  const std::size_t out_h = out_shape.h, out_w = out_shape.w, positions = out_h * out_w;
  const std::size_t cin_g = spec.in_channels / spec.groups;
  const std::size_t cout_g = spec.out_channels / spec.groups;
  const std::size_t k = spec.fan_in();

  const ConstMapMat<T> wt(weight.raw(), static_cast<Eigen::Index>(spec.out_channels), static_cast<Eigen::Index>(k));
  Mat<T> col(k, positions);
  BasicTensor<T> out(out_shape);

  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t g = 0; g < spec.groups; ++g) {
      const T* image = input.raw() + n * in.item() + g * cin_g * in.plane();
      im2col(image, in.h, in.w, cin_g, spec, out_h, out_w, col.data());
      MapMat<T> dst(out.raw() + n * out_shape.item() + g * cout_g * positions, static_cast<Eigen::Index>(cout_g),
                    static_cast<Eigen::Index>(positions));
      dst.noalias() = wt.middleRows(g * cout_g, cout_g) * col;
      if (!bias.empty()) {
        for (std::size_t o = 0; o < cout_g; ++o) dst.row(o).array() += bias[g * cout_g + o];
      }
    }
  }
  check_finite(out, "conv2d_forward");
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& cached_input,
                             const BasicTensor<T>& weight, const ConvSpec& spec, bool with_bias) {
  check_conv_input(cached_input.shape(), weight.shape(), spec);
  const Shape in = cached_input.shape();
  const Shape out_shape = spec.output_shape(in);
  check_same_shape(grad_out.shape(), out_shape, "conv2d_backward");

  const std::size_t positions = out_shape.h * out_shape.w;
  const std::size_t cin_g = spec.in_channels / spec.groups;
  const std::size_t cout_g = spec.out_channels / spec.groups;
  const std::size_t k = spec.fan_in();

  const ConstMapMat<T> wt(weight.raw(), static_cast<Eigen::Index>(spec.out_channels), static_cast<Eigen::Index>(k));
  ConvGrads<T> grads;
  grads.input = BasicTensor<T>(in);
  grads.weight = BasicTensor<T>(spec.weight_shape());
  grads.bias.assign(with_bias ? spec.out_channels : 0, T(0));
  MapMat<T> grad_w(grads.weight.raw(), static_cast<Eigen::Index>(spec.out_channels), static_cast<Eigen::Index>(k));
  grad_w.setZero();

  Mat<T> col(k, positions);
  Mat<T> gcol(k, positions);

  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t g = 0; g < spec.groups; ++g) {
      const ConstMapMat<T> gout(grad_out.raw() + n * out_shape.item() + g * cout_g * positions,
                                static_cast<Eigen::Index>(cout_g), static_cast<Eigen::Index>(positions));
      if (with_bias) {
        // Plain loop: Eigen's vectorised sum peels by pointer alignment, which
        // would make the result depend on where the buffer happens to live.
        for (std::size_t o = 0; o < cout_g; ++o) {
          const T* row = gout.data() + o * positions;
          grads.bias[g * cout_g + o] += std::accumulate(row, row + positions, T(0));
        }
      }
      const T* image = cached_input.raw() + n * in.item() + g * cin_g * in.plane();
      im2col(image, in.h, in.w, cin_g, spec, out_shape.h, out_shape.w, col.data());
      grad_w.middleRows(g * cout_g, cout_g).noalias() += gout * col.transpose();
      gcol.noalias() = wt.middleRows(g * cout_g, cout_g).transpose() * gout;
      col2im(gcol.data(), in.h, in.w, cin_g, spec, out_shape.h, out_shape.w,
             grads.input.raw() + n * in.item() + g * cin_g * in.plane());
    }
  }

  check_finite(grads.input, "conv2d_backward");
  check_finite(grads.weight, "conv2d_backward");
  return grads;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "add");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  check_finite(out, "add");
  return out;
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "sub");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  check_finite(out, "sub");
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, double k) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<T>(a[i] * k);
  check_finite(out, "scale");
  return out;
}

template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi) {
  if (!(lo <= hi)) fail(ErrorCode::Usage, "clamp: lo must not exceed hi");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::clamp(a[i], lo, hi);
  check_finite(out, "clamp");
  return out;
}

template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  check_same_shape(pred.shape(), target.shape(), "mse_loss");
  const double count = static_cast<double>(pred.size());
  if (count == 0) fail(ErrorCode::Usage, "mse_loss: empty tensors");
  LossResult<T> r;
  r.grad = BasicTensor<T>(pred.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = static_cast<double>(target[i]) - static_cast<double>(pred[i]);
    sum += diff * diff;
    r.grad[i] = static_cast<T>(-diff / count);
  }
  r.loss = sum / (2.0 * count);
  if (!std::isfinite(r.loss)) fail(ErrorCode::Numeric, "mse_loss: non-finite loss");
  return r;
}

#define SRFORGE_INSTANTIATE(T)                                                                     \
  template void check_finite(const BasicTensor<T>&, const char*);                                  \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,             \
                                         std::span<const T>, const ConvSpec&);                      \
  template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                        const BasicTensor<T>&, const ConvSpec&, bool);              \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                       \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                       \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                                    \
  template BasicTensor<T> clamp(const BasicTensor<T>&, T, T);                                      \
  template LossResult<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);

SRFORGE_INSTANTIATE(float)
SRFORGE_INSTANTIATE(double)

#undef SRFORGE_INSTANTIATE

}  // namespace srforge
