#include "nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <random>

#include "fpenv.hpp"

namespace srforge::nn {

namespace {

using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
MatD to_matrix(const T* data, std::size_t rows, std::size_t cols) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(data[i]);
  return m;
}

template <typename T>
void accumulate(BasicTensor<T>& dst, const MatD& src) {
  for (Eigen::Index i = 0; i < src.size(); ++i) dst[i] += static_cast<T>(src.data()[i]);
}

template <typename T>
const BasicTensor<T>& require_cache(const std::optional<BasicTensor<T>>& cache, const char* layer) {
  if (!cache) fail(ErrorCode::Usage, std::string(layer) + ": backward called without a train-mode forward");
  return *cache;
}

}  // namespace

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::LeakyRelu: return "leaky_relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Dense: return "dense";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::UpsampleNearest: return "upsample_nearest";
  }
  return "unknown";
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(ConvSpec spec, bool with_bias) : spec_(spec) {
  spec_.validate();
  weight_ = {"weight", ParamRole::Weight, spec_.fan_in(), BasicTensor<T>(spec_.weight_shape()),
             BasicTensor<T>(spec_.weight_shape())};
  if (with_bias) {
    const Shape bs{1, spec_.out_channels, 1, 1};
    bias_ = Parameter<T>{"bias", ParamRole::Bias, spec_.fan_in(), BasicTensor<T>(bs), BasicTensor<T>(bs)};
  }
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& input) const {
  if (input.c != spec_.in_channels)
    fail(ErrorCode::Usage, "conv: expected " + std::to_string(spec_.in_channels) + " input channels, got " +
                               std::to_string(input.c));
  if (input.h + 2 * spec_.padding < spec_.kernel_h || input.w + 2 * spec_.padding < spec_.kernel_w)
    fail(ErrorCode::Usage, "conv: input " + to_string(input) + " smaller than kernel");
  return spec_.output_shape(input);
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& input, Mode mode) {
  std::span<const T> b;
  if (bias_) b = bias_->value.data();
  auto out = conv2d_forward(input, weight_.value, b, spec_);
  if (mode == Mode::Train) cache_ = input;
  return out;
}

template <typename T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& grad_out) {
  const auto& input = require_cache(cache_, "conv");
  auto g = conv2d_backward(grad_out, input, weight_.value, spec_, bias_.has_value());
  for (std::size_t i = 0; i < g.weight.size(); ++i) weight_.grad[i] += g.weight[i];
  if (bias_) {
    for (std::size_t i = 0; i < g.bias.size(); ++i) bias_->grad[i] += g.bias[i];
  }
  return std::move(g.input);
}

template <typename T>
std::vector<Parameter<T>*> Conv2d<T>::parameters() {
  std::vector<Parameter<T>*> out{&weight_};
  if (bias_) out.push_back(&*bias_);
  return out;
}

// ---------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features, bool with_bias)
    : in_features_(in_features), out_features_(out_features) {
  if (in_features == 0 || out_features == 0) fail(ErrorCode::Usage, "dense: features must be positive");
  const Shape ws{out_features, in_features, 1, 1};
  weight_ = {"weight", ParamRole::Weight, in_features, BasicTensor<T>(ws), BasicTensor<T>(ws)};
  if (with_bias) {
    const Shape bs{1, out_features, 1, 1};
    bias_ = Parameter<T>{"bias", ParamRole::Bias, in_features, BasicTensor<T>(bs), BasicTensor<T>(bs)};
  }
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  if (input.item() != in_features_)
    fail(ErrorCode::Usage, "dense: expected " + std::to_string(in_features_) + " features, got " +
                               std::to_string(input.item()));
  return {input.n, out_features_, 1, 1};
}

template <typename T>
BasicTensor<T> Dense<T>::forward(const BasicTensor<T>& input, Mode mode) {
  const Shape out_shape = output_shape(input.shape());
  const MatD x = to_matrix(input.raw(), input.shape().n, in_features_);
  const MatD w = to_matrix(weight_.value.raw(), out_features_, in_features_);
  MatD y = x * w.transpose();
  if (bias_) {
    for (std::size_t o = 0; o < out_features_; ++o) y.col(o).array() += static_cast<double>(bias_->value[o]);
  }
  BasicTensor<T> out(out_shape, std::vector<T>(y.data(), y.data() + y.size()));
  check_finite(out, "dense");
  if (mode == Mode::Train) cache_ = input;
  return out;
}

template <typename T>
BasicTensor<T> Dense<T>::backward(const BasicTensor<T>& grad_out) {
  const auto& input = require_cache(cache_, "dense");
  check_same_shape(grad_out.shape(), output_shape(input.shape()), "dense backward");
  const std::size_t n = input.shape().n;
  const MatD gy = to_matrix(grad_out.raw(), n, out_features_);
  const MatD x = to_matrix(input.raw(), n, in_features_);
  const MatD w = to_matrix(weight_.value.raw(), out_features_, in_features_);
  accumulate(weight_.grad, MatD(gy.transpose() * x));
  if (bias_) {
    for (std::size_t o = 0; o < out_features_; ++o) bias_->grad[o] += static_cast<T>(gy.col(o).sum());
  }
  const MatD gx = gy * w;
  BasicTensor<T> out(input.shape(), std::vector<T>(gx.data(), gx.data() + gx.size()));
  check_finite(out, "dense backward");
  return out;
}

template <typename T>
std::vector<Parameter<T>*> Dense<T>::parameters() {
  std::vector<Parameter<T>*> out{&weight_};
  if (bias_) out.push_back(&*bias_);
  return out;
}

// ---------------------------------------------------------------- activations

template <typename T>
BasicTensor<T> Relu<T>::forward(const BasicTensor<T>& input, Mode mode) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  if (mode == Mode::Train) cache_ = input;
  return out;
}

template <typename T>
BasicTensor<T> Relu<T>::backward(const BasicTensor<T>& grad_out) {
  const auto& input = require_cache(cache_, "relu");
  check_same_shape(grad_out.shape(), input.shape(), "relu backward");
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? grad_out[i] : T(0);
  return out;
}

template <typename T>
BasicTensor<T> LeakyRelu<T>::forward(const BasicTensor<T>& input, Mode mode) {
  BasicTensor<T> out(input.shape());
  const T slope = static_cast<T>(slope_);
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : slope * input[i];
  if (mode == Mode::Train) cache_ = input;
  return out;
}

template <typename T>
BasicTensor<T> LeakyRelu<T>::backward(const BasicTensor<T>& grad_out) {
  const auto& input = require_cache(cache_, "leaky_relu");
  check_same_shape(grad_out.shape(), input.shape(), "leaky_relu backward");
  BasicTensor<T> out(input.shape());
  const T slope = static_cast<T>(slope_);
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? grad_out[i] : slope * grad_out[i];
  return out;
}

template <typename T>
BasicTensor<T> Sigmoid<T>::forward(const BasicTensor<T>& input, Mode mode) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double x = static_cast<double>(input[i]);
    const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    out[i] = static_cast<T>(s);
  }
  if (mode == Mode::Train) cache_ = out;
  return out;
}

template <typename T>
BasicTensor<T> Sigmoid<T>::backward(const BasicTensor<T>& grad_out) {
  const auto& y = require_cache(cache_, "sigmoid");
  check_same_shape(grad_out.shape(), y.shape(), "sigmoid backward");
  BasicTensor<T> out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = grad_out[i] * y[i] * (T(1) - y[i]);
  return out;
}

template <typename T>
BasicTensor<T> Flatten<T>::forward(const BasicTensor<T>& input, Mode mode) {
  if (mode == Mode::Train) cached_ = input.shape();
  return input.reshaped(output_shape(input.shape()));
}

template <typename T>
BasicTensor<T> Flatten<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_) fail(ErrorCode::Usage, "flatten: backward called without a train-mode forward");
  return grad_out.reshaped(*cached_);
}

template <typename T>
UpsampleNearest<T>::UpsampleNearest(std::size_t factor) : factor_(factor) {
  if (factor == 0) fail(ErrorCode::Usage, "upsample: factor must be positive");
}

template <typename T>
Shape UpsampleNearest<T>::output_shape(const Shape& input) const {
  return {input.n, input.c, input.h * factor_, input.w * factor_};
}

template <typename T>
BasicTensor<T> UpsampleNearest<T>::forward(const BasicTensor<T>& input, Mode mode) {
  const Shape in = input.shape();
  BasicTensor<T> out(output_shape(in));
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t y = 0; y < in.h * factor_; ++y)
        for (std::size_t x = 0; x < in.w * factor_; ++x) out.at(n, c, y, x) = input.at(n, c, y / factor_, x / factor_);
  if (mode == Mode::Train) cached_ = in;
  return out;
}

template <typename T>
BasicTensor<T> UpsampleNearest<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_) fail(ErrorCode::Usage, "upsample: backward called without a train-mode forward");
  const Shape in = *cached_;
  check_same_shape(grad_out.shape(), output_shape(in), "upsample backward");
  BasicTensor<T> out(in);
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t y = 0; y < in.h * factor_; ++y)
        for (std::size_t x = 0; x < in.w * factor_; ++x) out.at(n, c, y / factor_, x / factor_) += grad_out.at(n, c, y, x);
  return out;
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Shape Sequential<T>::output_shape(const Shape& input) const {
  Shape s = input;
  for (const auto& layer : layers_) s = layer->output_shape(s);
  if (residual_ && s != input)
    fail(ErrorCode::Usage, "residual network must preserve shape: " + to_string(input) + " -> " + to_string(s));
  return s;
}

template <typename T>
BasicTensor<T> Sequential<T>::forward_body(const BasicTensor<T>& input, Mode mode) {
  const DenormalGuard ftz;
  output_shape(input.shape());
  BasicTensor<T> x = input;
  for (auto& layer : layers_) x = layer->forward(x, mode);
  if (mode == Mode::Train) cached_ = true;  // eval passes stay read-only
  return x;
}

template <typename T>
BasicTensor<T> Sequential<T>::forward(const BasicTensor<T>& input, Mode mode) {
  auto out = forward_body(input, mode);
  if (residual_) out = add(out, input);
  return out;
}

template <typename T>
BasicTensor<T> Sequential<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_) fail(ErrorCode::Usage, "backward called without a train-mode forward");
  const DenormalGuard ftz;
  BasicTensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  if (residual_) g = add(g, grad_out);
  return g;
}

template <typename T>
std::vector<NamedParameter<T>> Sequential<T>::parameters() {
  std::vector<NamedParameter<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (Parameter<T>* p : layers_[i]->parameters()) out.push_back({std::to_string(i) + "." + p->name, p});
  }
  return out;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto& np : parameters()) np.param->grad.fill(T(0));
}

template <typename T>
void Sequential<T>::clear_cache() {
  for (auto& layer : layers_) layer->clear_cache();
  cached_ = false;
}

template <typename T>
void init_parameters(Sequential<T>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& np : net.parameters()) {
    Parameter<T>& p = *np.param;
    if (p.role == ParamRole::Bias) {
      p.value.fill(T(0));
      continue;
    }
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(p.fan_in)));
    for (auto& v : p.value.data()) v = static_cast<T>(dist(rng));
  }
}

template <typename T>
void zero_parameters(Sequential<T>& net) {
  for (auto& np : net.parameters()) np.param->value.fill(T(0));
}

template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const std::uint8_t> labels) {
  const Shape s = logits.shape();
  if (s.h != 1 || s.w != 1) fail(ErrorCode::Usage, "softmax_cross_entropy: logits must be (n, classes, 1, 1)");
  if (labels.size() != s.n) fail(ErrorCode::Usage, "softmax_cross_entropy: label count mismatch");
  LossResult<T> r;
  r.grad = BasicTensor<T>(s);
  const double inv_n = 1.0 / static_cast<double>(s.n);
  double total = 0.0;
  std::vector<double> p(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    if (labels[n] >= s.c) fail(ErrorCode::Usage, "softmax_cross_entropy: label out of range");
    double mx = -INFINITY;
    for (std::size_t c = 0; c < s.c; ++c) mx = std::max(mx, static_cast<double>(logits.at(n, c, 0, 0)));
    double z = 0.0;
    for (std::size_t c = 0; c < s.c; ++c) {
      p[c] = std::exp(static_cast<double>(logits.at(n, c, 0, 0)) - mx);
      z += p[c];
    }
    for (std::size_t c = 0; c < s.c; ++c) {
      p[c] /= z;
      r.grad.at(n, c, 0, 0) = static_cast<T>((p[c] - (c == labels[n] ? 1.0 : 0.0)) * inv_n);
    }
    total -= std::log(std::max(p[labels[n]], 1e-300));
  }
  r.loss = total * inv_n;
  if (!std::isfinite(r.loss)) fail(ErrorCode::Numeric, "softmax_cross_entropy: non-finite loss");
  return r;
}

#define SRFORGE_INSTANTIATE(T)                                                                  \
  template class Conv2d<T>;                                                                     \
  template class Dense<T>;                                                                      \
  template class Relu<T>;                                                                       \
  template class LeakyRelu<T>;                                                                  \
  template class Sigmoid<T>;                                                                    \
  template class Flatten<T>;                                                                    \
  template class UpsampleNearest<T>;                                                            \
  template class Sequential<T>;                                                                 \
  template void init_parameters(Sequential<T>&, std::uint64_t);                                 \
  template void zero_parameters(Sequential<T>&);                                                \
  template LossResult<T> softmax_cross_entropy(const BasicTensor<T>&, std::span<const std::uint8_t>);

SRFORGE_INSTANTIATE(float)
SRFORGE_INSTANTIATE(double)

#undef SRFORGE_INSTANTIATE

}  // namespace srforge::nn
