#pragma once

#include <cstdint>

#include "nn.hpp"

namespace srforge::models {

/// A VDSR-ResNeXt variant. `depth_middle` counts the 3x3 layers between the
/// input and output convolutions; every three of them form one block
/// (dense base->width, grouped width->width, dense width->base).
struct ModelConfig {
  std::uint32_t depth_middle = 18;
  std::uint32_t block_width = 128;
  std::uint32_t cardinality = 32;
  std::uint32_t base_channels = 64;
  std::uint32_t kernel = 3;
  bool with_bias = true;

  void validate() const;
  std::uint32_t blocks() const { return depth_middle / 3; }
};

/// Input conv + blocks + output conv, global residual set (predicts r, emits x + r).
template <typename T>
nn::Sequential<T> build_vdsr_resnext(const ModelConfig& cfg);

/// Plain VDSR: input conv, `depth` dense base->base convs with ReLU, output conv.
template <typename T>
nn::Sequential<T> build_vdsr_baseline(std::uint32_t depth, std::uint32_t base_channels = 64, bool with_bias = true);

/// One three-layer block on its own (no residual). cardinality 1 gives the
/// unbranched variant.
template <typename T>
nn::Sequential<T> build_block(std::uint32_t base_channels, std::uint32_t width, std::uint32_t cardinality,
                              std::uint32_t kernel = 3, bool with_bias = false);

template <typename T>
std::uint64_t count_parameters(nn::Sequential<T>& net, bool include_bias);

/// Number of convolution layers in a network.
template <typename T>
std::size_t count_conv_layers(const nn::Sequential<T>& net);

}  // namespace srforge::models
