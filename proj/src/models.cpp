#include "models.hpp"

namespace srforge::models {

namespace {

ConvSpec conv3(std::uint32_t in, std::uint32_t out, std::uint32_t kernel, std::uint32_t groups = 1) {
  return {in, out, kernel, kernel, 1, kernel / 2, groups};
}

template <typename T>
void append_block(nn::Sequential<T>& net, std::uint32_t base, std::uint32_t width, std::uint32_t cardinality,
                  std::uint32_t kernel, bool bias) {
  net.template emplace<nn::Conv2d<T>>(conv3(base, width, kernel), bias);
  net.template emplace<nn::Relu<T>>();
  net.template emplace<nn::Conv2d<T>>(conv3(width, width, kernel, cardinality), bias);
  net.template emplace<nn::Relu<T>>();
  net.template emplace<nn::Conv2d<T>>(conv3(width, base, kernel), bias);
  net.template emplace<nn::Relu<T>>();
}

}  // namespace

void ModelConfig::validate() const {
  if (depth_middle % 3 != 0)
    fail(ErrorCode::Usage, "depth_middle must be a multiple of 3 (three-layer blocks), got " +
                               std::to_string(depth_middle));
  if (block_width == 0 || cardinality == 0 || base_channels == 0 || kernel == 0)
    fail(ErrorCode::Usage, "model widths, cardinality and kernel must be positive");
  if (block_width % cardinality != 0)
    fail(ErrorCode::Usage, "block_width " + std::to_string(block_width) + " is not divisible by cardinality " +
                               std::to_string(cardinality));
  if (kernel % 2 == 0) fail(ErrorCode::Usage, "kernel must be odd for shape-preserving padding");
}

template <typename T>
nn::Sequential<T> build_vdsr_resnext(const ModelConfig& cfg) {
  cfg.validate();
  nn::Sequential<T> net;
  net.template emplace<nn::Conv2d<T>>(conv3(1, cfg.base_channels, cfg.kernel), cfg.with_bias);
  net.template emplace<nn::Relu<T>>();
  for (std::uint32_t b = 0; b < cfg.blocks(); ++b)
    append_block(net, cfg.base_channels, cfg.block_width, cfg.cardinality, cfg.kernel, cfg.with_bias);
  net.template emplace<nn::Conv2d<T>>(conv3(cfg.base_channels, 1, cfg.kernel), cfg.with_bias);
  net.set_residual(true);
  return net;
}

template <typename T>
nn::Sequential<T> build_vdsr_baseline(std::uint32_t depth, std::uint32_t base_channels, bool with_bias) {
  if (base_channels == 0) fail(ErrorCode::Usage, "base_channels must be positive");
  nn::Sequential<T> net;
  net.template emplace<nn::Conv2d<T>>(conv3(1, base_channels, 3), with_bias);
  net.template emplace<nn::Relu<T>>();
  for (std::uint32_t i = 0; i < depth; ++i) {
    net.template emplace<nn::Conv2d<T>>(conv3(base_channels, base_channels, 3), with_bias);
    net.template emplace<nn::Relu<T>>();
  }
  net.template emplace<nn::Conv2d<T>>(conv3(base_channels, 1, 3), with_bias);
  net.set_residual(true);
  return net;
}

template <typename T>
nn::Sequential<T> build_block(std::uint32_t base_channels, std::uint32_t width, std::uint32_t cardinality,
                              std::uint32_t kernel, bool with_bias) {
  ModelConfig cfg{3, width, cardinality, base_channels, kernel, with_bias};
  cfg.validate();
  nn::Sequential<T> net;
  append_block(net, base_channels, width, cardinality, kernel, with_bias);
  return net;
}

template <typename T>
std::uint64_t count_parameters(nn::Sequential<T>& net, bool include_bias) {
  std::uint64_t total = 0;
  for (const auto& np : net.parameters()) {
    if (np.param->role == nn::ParamRole::Bias && !include_bias) continue;
    total += np.param->value.size();
  }
  return total;
}

template <typename T>
std::size_t count_conv_layers(const nn::Sequential<T>& net) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < net.size(); ++i) n += net.layer(i).kind() == nn::LayerKind::Conv ? 1 : 0;
  return n;
}

#define SRFORGE_INSTANTIATE(T)                                                                              \
  template nn::Sequential<T> build_vdsr_resnext<T>(const ModelConfig&);                                     \
  template nn::Sequential<T> build_vdsr_baseline<T>(std::uint32_t, std::uint32_t, bool);                    \
  template nn::Sequential<T> build_block<T>(std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t, bool); \
  template std::uint64_t count_parameters(nn::Sequential<T>&, bool);                                        \
  template std::size_t count_conv_layers(const nn::Sequential<T>&);

SRFORGE_INSTANTIATE(float)
SRFORGE_INSTANTIATE(double)

#undef SRFORGE_INSTANTIATE

}  // namespace srforge::models
