#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "models.hpp"
#include "nn.hpp"
#include "srcgan.hpp"

namespace srforge::io {

inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class ModelKind : std::uint16_t {
  VdsrResNeXt = 1,
  VdsrBaseline = 2,
  Gan = 3,
  Classifier = 4,
};

/// One named float tensor.
struct Record {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  bool operator==(const Record&) const = default;
};

inline constexpr std::uint32_t kFlagBias = 1u << 0;
inline constexpr std::uint32_t kFlagConditioned = 1u << 1;
inline constexpr std::uint32_t kFlagSaturating = 1u << 2;

/// On-disk layout, little-endian throughout:
///
///   "SRFG" | u16 version | u16 kind | u32 arch[5] | u32 flags
///   | u32 epoch | u64 step | u32 record count
///   | records: u32 name length, name bytes, u32 rank, u32 dims[rank], f32 data
///
/// arch holds the model shape. For VDSR-ResNeXt: depth_middle, block_width,
/// cardinality, base_channels, kernel. For the plain VDSR baseline: depth,
/// 0, 1, base_channels, 3. For a GAN pair: g_width, g_width_out, d_width1,
/// d_width2, scale. The classifier has a fixed shape and stores zeros.
struct Checkpoint {
  ModelKind kind = ModelKind::VdsrResNeXt;
  std::array<std::uint32_t, 5> arch{};
  std::uint32_t flags = 0;
  std::uint32_t epoch = 0;
  std::uint64_t step = 0;
  std::vector<Record> records;

  const Record* find(const std::string& name) const;
  const Record& get(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode(const Checkpoint& ckpt);
Checkpoint decode(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file and a rename.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Appends `net`'s parameters as "<prefix><layer>.<name>".
void append_parameters(Checkpoint& ckpt, const std::string& prefix, nn::Sequential<float>& net);
/// Copies stored values into `net`. Every parameter must be present with a matching shape.
void restore_parameters(const Checkpoint& ckpt, const std::string& prefix, nn::Sequential<float>& net);

void append_state(Checkpoint& ckpt, const std::string& prefix, const std::map<std::string, Tensor>& state);
/// Every record whose name starts with `prefix`, keyed by the remainder.
std::map<std::string, Tensor> restore_state(const Checkpoint& ckpt, const std::string& prefix);

Checkpoint sr_checkpoint(const models::ModelConfig& cfg, nn::Sequential<float>& net);
models::ModelConfig sr_config(const Checkpoint& ckpt);
/// Rebuilds the network a VDSR-ResNeXt or baseline checkpoint describes and loads its weights.
nn::Sequential<float> load_sr_model(const Checkpoint& ckpt);

Checkpoint gan_checkpoint(srcgan::GanPair& pair);
srcgan::GanConfig gan_config(const Checkpoint& ckpt);
srcgan::GanPair load_gan(const Checkpoint& ckpt);

Checkpoint classifier_checkpoint(nn::Sequential<float>& net);
nn::Sequential<float> load_classifier(const Checkpoint& ckpt);

}  // namespace srforge::io
