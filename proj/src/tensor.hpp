#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace srforge {

/// NCHW extents of a rank-4 tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t item() const noexcept { return c * h * w; }

  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Dense rank-4 NCHW tensor with a contiguous row-major buffer.
///
/// `float` is the training precision; `double` instantiations exist for
/// finite-difference gradient checks.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(shape), data_(shape.size(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      fail(ErrorCode::Usage, "tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + to_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  /// Same buffer, new extents; the element count must not change.
  BasicTensor reshaped(Shape shape) const {
    if (shape.size() != data_.size())
      fail(ErrorCode::Usage, "cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    return BasicTensor(shape, data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Geometry of one (possibly grouped) 2-D convolution.
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;

  void validate() const;
  Shape weight_shape() const;
  std::size_t out_h(std::size_t in_h) const;
  std::size_t out_w(std::size_t in_w) const;
  Shape output_shape(const Shape& input) const;
  /// Inputs feeding one output element: (in_channels / groups) * kh * kw.
  std::size_t fan_in() const { return (in_channels / groups) * kernel_h * kernel_w; }
};

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  std::vector<T> bias;  // empty when the forward pass had no bias
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad;
};

/// Grouped 2-D convolution. `bias` may be empty. Accumulates in T.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              std::span<const T> bias, const ConvSpec& spec);

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& cached_input,
                             const BasicTensor<T>& weight, const ConvSpec& spec, bool with_bias);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, double k);
template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi);

/// Halved per-element mean squared error: sum((target - pred)^2) / (2 * N).
template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

/// Throws ErrorCode::Numeric if any element is NaN or infinite.
template <typename T>
void check_finite(const BasicTensor<T>& t, const char* where);

void check_same_shape(const Shape& a, const Shape& b, const char* where);

}  // namespace srforge
