#include "optim.hpp"

#include <algorithm>
#include <cmath>

#include "fpenv.hpp"

namespace srforge::optim {

namespace {

template <typename T>
void check_grad_finite(const nn::NamedParameter<T>& np) {
  for (const T g : np.param->grad.data()) {
    if (!std::isfinite(g)) fail(ErrorCode::Numeric, "non-finite gradient in " + np.name);
  }
}

template <typename T>
BasicTensor<T>& state_for(std::map<std::string, BasicTensor<T>>& state, const nn::NamedParameter<T>& np) {
  auto it = state.find(np.name);
  if (it == state.end()) it = state.emplace(np.name, BasicTensor<T>(np.param->value.shape())).first;
  if (it->second.shape() != np.param->value.shape())
    fail(ErrorCode::Usage, "optimizer state shape mismatch for " + np.name);
  return it->second;
}

}  // namespace

std::optional<double> clip_bound(const SgdConfig& config) {
  switch (config.clip_mode) {
    case ClipMode::None: return std::nullopt;
    case ClipMode::Fixed: return config.clip_theta;
    case ClipMode::Adjustable: return config.clip_theta / config.lr;
  }
  return std::nullopt;
}

template <typename T>
Sgd<T>::Sgd(SgdConfig config) : config_(config) {
  if (!(config_.lr > 0)) fail(ErrorCode::Usage, "sgd: lr must be positive");
  if (config_.clip_mode != ClipMode::None && !(config_.clip_theta > 0))
    fail(ErrorCode::Usage, "sgd: clip theta must be positive");
}

template <typename T>
void Sgd<T>::step(std::vector<nn::NamedParameter<T>>& params) {
  const DenormalGuard ftz;
  if (!(config_.lr > 0)) fail(ErrorCode::Usage, "sgd: lr must be positive");
  for (const auto& np : params) check_grad_finite(np);
  const std::optional<double> bound = clip_bound(config_);
  for (auto& np : params) {
    nn::Parameter<T>& p = *np.param;
    BasicTensor<T>& v = state_for(velocity_, np);
    const double decay = p.role == nn::ParamRole::Weight ? config_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = static_cast<double>(p.grad[i]);
      if (bound) g = std::clamp(g, -*bound, *bound);
      g += decay * static_cast<double>(p.value[i]);
      const double vel = config_.momentum * static_cast<double>(v[i]) - config_.lr * g;
      v[i] = static_cast<T>(vel);
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) + vel);
    }
  }
}

template <typename T>
Adam<T>::Adam(AdamConfig config) : config_(config) {
  if (!(config_.lr > 0)) fail(ErrorCode::Usage, "adam: lr must be positive");
}

template <typename T>
void Adam<T>::step(std::vector<nn::NamedParameter<T>>& params) {
  const DenormalGuard ftz;
  for (const auto& np : params) check_grad_finite(np);
  ++step_;
  const double t = static_cast<double>(step_);
  const double corr1 = 1.0 - std::pow(config_.beta1, t);
  const double corr2 = 1.0 - std::pow(config_.beta2, t);
  for (auto& np : params) {
    nn::Parameter<T>& p = *np.param;
    BasicTensor<T>& m = state_for(m_, np);
    BasicTensor<T>& v = state_for(v_, np);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      const double mi = config_.beta1 * static_cast<double>(m[i]) + (1.0 - config_.beta1) * g;
      const double vi = config_.beta2 * static_cast<double>(v[i]) + (1.0 - config_.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = config_.lr * (mi / corr1) / (std::sqrt(vi / corr2) + config_.eps);
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
    }
  }
}

void LrSchedule::validate() const {
  if (!(initial_lr > 0) || !(decay_factor > 0) || decay_every_epochs == 0)
    fail(ErrorCode::Usage, "lr schedule fields must be positive");
}

double lr_at(const LrSchedule& schedule, std::uint32_t epoch) {
  schedule.validate();
  return schedule.initial_lr / std::pow(schedule.decay_factor, static_cast<double>(epoch / schedule.decay_every_epochs));
}

template class Sgd<float>;
template class Sgd<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace srforge::optim
