#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace srforge::nn {

enum class Mode { Train, Eval };

enum class LayerKind { Conv, Relu, LeakyRelu, Sigmoid, Dense, Flatten, UpsampleNearest };

const char* kind_name(LayerKind kind);

enum class ParamRole { Weight, Bias };

/// A trainable tensor and its gradient buffer (same shape, always).
template <typename T>
struct Parameter {
  std::string name;  // "weight" or "bias" within the owning layer
  ParamRole role = ParamRole::Weight;
  std::size_t fan_in = 1;
  BasicTensor<T> value;
  BasicTensor<T> grad;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) = 0;
  /// Requires a prior Train-mode forward; accumulates into parameter grads.
  virtual BasicTensor<T> backward(const BasicTensor<T>& grad_out) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual void clear_cache() = 0;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(ConvSpec spec, bool with_bias);

  LayerKind kind() const override { return LayerKind::Conv; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override;
  void clear_cache() override { cache_.reset(); }

  const ConvSpec& spec() const { return spec_; }
  bool has_bias() const { return bias_.has_value(); }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>* bias() { return bias_ ? &*bias_ : nullptr; }

 private:
  ConvSpec spec_;
  Parameter<T> weight_;
  std::optional<Parameter<T>> bias_;
  std::optional<BasicTensor<T>> cache_;
};

/// Fully connected layer over the flattened (c, h, w) item; emits (n, out, 1, 1).
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in_features, std::size_t out_features, bool with_bias);

  LayerKind kind() const override { return LayerKind::Dense; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override;
  void clear_cache() override { cache_.reset(); }

 private:
  std::size_t in_features_;
  std::size_t out_features_;
  Parameter<T> weight_;
  std::optional<Parameter<T>> bias_;
  std::optional<BasicTensor<T>> cache_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Relu; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void clear_cache() override { cache_.reset(); }

 private:
  std::optional<BasicTensor<T>> cache_;
};

template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(double slope = 0.2) : slope_(slope) {}

  LayerKind kind() const override { return LayerKind::LeakyRelu; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void clear_cache() override { cache_.reset(); }
  double slope() const { return slope_; }

 private:
  double slope_;
  std::optional<BasicTensor<T>> cache_;
};

template <typename T>
class Sigmoid final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Sigmoid; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void clear_cache() override { cache_.reset(); }

 private:
  std::optional<BasicTensor<T>> cache_;  // output, not input
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Flatten; }
  Shape output_shape(const Shape& input) const override { return {input.n, input.item(), 1, 1}; }
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void clear_cache() override { cached_.reset(); }

 private:
  std::optional<Shape> cached_;
};

template <typename T>
class UpsampleNearest final : public Layer<T> {
 public:
  explicit UpsampleNearest(std::size_t factor);

  LayerKind kind() const override { return LayerKind::UpsampleNearest; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void clear_cache() override { cached_.reset(); }

 private:
  std::size_t factor_;
  std::optional<Shape> cached_;
};

/// Named view of a parameter inside a Sequential ("<layer index>.<name>").
template <typename T>
struct NamedParameter {
  std::string name;
  Parameter<T>* param;
};

/// Ordered layer stack with an optional global skip: out = x + net(x).
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void push_back(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  void set_residual(bool on) { residual_ = on; }
  bool residual() const { return residual_; }

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

  /// Shape propagation; throws on any incompatible layer.
  Shape output_shape(const Shape& input) const;

  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode);
  /// Forward through the layers only, ignoring the residual flag.
  BasicTensor<T> forward_body(const BasicTensor<T>& input, Mode mode);
  BasicTensor<T> backward(const BasicTensor<T>& grad_out);

  std::vector<NamedParameter<T>> parameters();
  void zero_grad();
  void clear_cache();

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  bool residual_ = false;
  bool cached_ = false;
};

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases. Deterministic in `seed`.
template <typename T>
void init_parameters(Sequential<T>& net, std::uint64_t seed);

/// Sets every parameter (weights and biases) to zero.
template <typename T>
void zero_parameters(Sequential<T>& net);

/// Softmax cross-entropy over (n, classes, 1, 1) logits, averaged over the batch.
template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const std::uint8_t> labels);

}  // namespace srforge::nn
