#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nn.hpp"

namespace srforge::optim {

enum class ClipMode {
  None,
  Fixed,       // clamp each gradient entry to [-theta, theta]
  Adjustable,  // clamp to [-theta/lr, theta/lr]
};

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  ClipMode clip_mode = ClipMode::Fixed;
  double clip_theta = 0.4;
};

/// SGD with momentum, per-weight decay and element-wise clipping.
///
/// Update per entry: g' = clip(g); g'' = g' + wd * p (weights only);
/// v = m * v - lr * g''; p += v.
template <typename T>
class Sgd {
 public:
  explicit Sgd(SgdConfig config);

  void step(std::vector<nn::NamedParameter<T>>& params);

  SgdConfig& config() { return config_; }
  const SgdConfig& config() const { return config_; }
  /// Velocity buffers keyed by parameter name; created lazily at first step.
  std::map<std::string, BasicTensor<T>>& velocity() { return velocity_; }
  const std::map<std::string, BasicTensor<T>>& velocity() const { return velocity_; }

 private:
  SgdConfig config_;
  std::map<std::string, BasicTensor<T>> velocity_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config);

  void step(std::vector<nn::NamedParameter<T>>& params);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return step_; }
  void set_steps(std::uint64_t s) { step_ = s; }
  std::map<std::string, BasicTensor<T>>& first_moment() { return m_; }
  std::map<std::string, BasicTensor<T>>& second_moment() { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::map<std::string, BasicTensor<T>> m_;
  std::map<std::string, BasicTensor<T>> v_;
};

struct LrSchedule {
  double initial_lr = 0.1;
  double decay_factor = 10.0;
  std::uint32_t decay_every_epochs = 10;

  void validate() const;
};

/// Staircase: initial_lr / decay_factor^floor(epoch / decay_every_epochs).
double lr_at(const LrSchedule& schedule, std::uint32_t epoch);

/// The clip bound actually applied for `config`, or nullopt when clipping is off.
std::optional<double> clip_bound(const SgdConfig& config);

}  // namespace srforge::optim
