#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mnist.hpp"
#include "nn.hpp"
#include "optim.hpp"

namespace srforge::srcgan {

inline constexpr std::size_t kClasses = 10;
inline constexpr double kProbEps = 1e-7;

enum class ConditionTarget { Generator, Discriminator };

/// Appends ten one-hot label planes to `image` along the channel axis. With
/// `enabled` false the image is returned unchanged (vanilla GAN path).
Tensor condition_input(const Tensor& image, std::span<const std::uint8_t> labels, bool enabled);

/// Single-item convenience form.
Tensor condition_input(const Tensor& image, std::uint8_t label, ConditionTarget target, bool enabled = true);

/// Adversarial losses for one (D(real), D(fake)) pair and their derivatives
/// with respect to the two probabilities. Probabilities are clamped to
/// [eps, 1 - eps]; the derivative is zero where the clamp is active.
/// `real_target` below 1 is one-sided label smoothing of the real term.
struct GanLosses {
  double d_loss = 0.0;       // -(log d_real + log(1 - d_fake))
  double g_loss = 0.0;       // -log d_fake, or log(1 - d_fake) when saturating
  double dd_real = 0.0;      // d d_loss / d d_real
  double dd_fake = 0.0;      // d d_loss / d d_fake
  double dg_fake = 0.0;      // d g_loss / d d_fake
};

GanLosses gan_losses(double d_real, double d_fake, bool saturating = false, double real_target = 1.0);

struct GanConfig {
  bool conditioned = true;
  bool saturating = false;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double lr = 1e-3;    // generator
  double d_lr = 2e-4;  // discriminator
  double beta1 = 0.5;
  double beta2 = 0.999;
  double leaky_slope = 0.2;
  double real_label = 1.0;      // target for D on real images
  double instance_noise = 0.0;  // std of noise on D inputs at step 0, annealed to 0
  std::uint64_t seed = 1;
  std::size_t g_width = 64;
  std::size_t g_width_out = 32;
  std::size_t d_width1 = 32;
  std::size_t d_width2 = 64;
  std::size_t scale = 4;
};

struct GanPair {
  GanConfig config;
  nn::Sequential<float> generator;
  nn::Sequential<float> discriminator;

  /// Generated HR images (n, 1, 28, 28) for LR inputs (n, 1, 7, 7), eval mode.
  Tensor generate(const Tensor& lr, std::span<const std::uint8_t> labels);
};

nn::Sequential<float> build_generator(const GanConfig& cfg);
nn::Sequential<float> build_discriminator(const GanConfig& cfg, std::size_t image_size = 28);
GanPair build_gan(const GanConfig& cfg);

struct GanLossTrace {
  std::vector<double> d_loss;
  std::vector<double> g_loss;
  std::vector<double> d_accuracy;  // fraction of real>0.5 and fake<0.5 per batch
};

struct GanStepStats {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double d_accuracy = 0.0;
};

/// Owns the networks and both Adam states; one D update then one G update per batch.
class GanTrainer {
 public:
  explicit GanTrainer(const GanConfig& config);
  GanTrainer(GanPair pair);

  GanStepStats step(const Tensor& lr, const Tensor& hr, std::span<const std::uint8_t> labels);
  /// Std of the Gaussian noise added to every image D sees in later steps.
  void set_noise(double sigma) { noise_ = sigma; }
  GanPair& pair() { return pair_; }
  optim::Adam<float>& g_optimizer() { return g_opt_; }
  optim::Adam<float>& d_optimizer() { return d_opt_; }

 private:
  GanPair pair_;
  optim::Adam<float> g_opt_;
  optim::Adam<float> d_opt_;
  std::mt19937_64 noise_rng_;
  double noise_ = 0.0;

  Tensor noisy(Tensor image);
};

using EpochCallback = std::function<void(std::size_t epoch, GanTrainer&)>;

/// Trains on `dataset` (LR inputs from pipeline::downscale_mnist). Per-epoch
/// order is a seeded shuffle; a trailing partial batch is dropped. Throws
/// ErrorCode::Numeric on a non-finite loss; `trace` keeps the steps so far.
GanPair train_srcgan(const pipeline::MnistSet& dataset, const GanConfig& config, GanLossTrace& trace,
                     const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------- classifier

struct ClassifierConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

/// conv 1->16 s2, conv 16->32 s2, dense 1568->128, dense 128->10 (ReLU between).
nn::Sequential<float> build_classifier();

nn::Sequential<float> train_classifier(const pipeline::MnistSet& train, const ClassifierConfig& config,
                                       const std::function<void(std::size_t, double)>& on_epoch = {});

/// Argmax accuracy of `classifier` on `images` (eval mode, batched).
double classifier_accuracy(nn::Sequential<float>& classifier, const Tensor& images,
                           std::span<const std::uint8_t> labels, std::size_t batch_size = 500);

struct ClassifierResult {
  nn::Sequential<float> model;
  double accuracy = 0.0;
};

ClassifierResult train_eval_classifier(const pipeline::MnistSet& train, const pipeline::MnistSet& test,
                                       const ClassifierConfig& config);

/// Generates HR digits from the test set's LR images (+ labels when the pair is
/// conditioned) and reports the classifier's accuracy on them.
double classify_generated(nn::Sequential<float>& classifier, GanPair& gan, const pipeline::MnistSet& test,
                          std::size_t batch_size = 500);

/// Bicubic 7x7 -> 28x28 upscale of the test LR inputs (baseline generator).
Tensor bicubic_upscale_batch(const Tensor& lr, std::size_t out_size);

}  // namespace srforge::srcgan
