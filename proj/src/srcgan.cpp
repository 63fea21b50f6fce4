#include "srcgan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "resize.hpp"

namespace srforge::srcgan {

namespace {

ConvSpec conv(std::size_t in, std::size_t out, std::size_t stride) { return {in, out, 3, 3, stride, 1, 1}; }

Tensor gather(const Tensor& src, std::span<const std::size_t> indices) {
  const Shape s = src.shape();
  Tensor out({indices.size(), s.c, s.h, s.w});
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy_n(src.raw() + indices[i] * s.item(), s.item(), out.raw() + i * s.item());
  return out;
}

std::vector<std::uint8_t> gather_labels(std::span<const std::uint8_t> labels, std::span<const std::size_t> indices) {
  std::vector<std::uint8_t> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
  return out;
}

// Leading `channels` channels of every item.
Tensor slice_channels(const Tensor& t, std::size_t channels) {
  const Shape s = t.shape();
  Tensor out({s.n, channels, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n)
    std::copy_n(t.raw() + n * s.item(), channels * s.plane(), out.raw() + n * out.shape().item());
  return out;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + epoch);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::size_t argmax_row(const Tensor& logits, std::size_t n) {
  const std::size_t c = logits.shape().c;
  std::size_t best = 0;
  for (std::size_t k = 1; k < c; ++k) {
    if (logits.at(n, k, 0, 0) > logits.at(n, best, 0, 0)) best = k;
  }
  return best;
}

}  // namespace

Tensor condition_input(const Tensor& image, std::span<const std::uint8_t> labels, bool enabled) {
  if (!enabled) return image;
  const Shape s = image.shape();
  if (labels.size() != s.n) fail(ErrorCode::Usage, "condition_input: one label per item required");
  Tensor out({s.n, s.c + kClasses, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    if (labels[n] >= kClasses) fail(ErrorCode::Usage, "condition_input: label out of range");
    float* dst = out.raw() + n * out.shape().item();
    std::copy_n(image.raw() + n * s.item(), s.item(), dst);
    std::fill_n(dst + s.item() + labels[n] * s.plane(), s.plane(), 1.0f);
  }
  return out;
}

Tensor condition_input(const Tensor& image, std::uint8_t label, ConditionTarget target, bool enabled) {
  const std::size_t expected = target == ConditionTarget::Generator ? 7 : 28;
  if (image.shape().h != expected || image.shape().w != expected)
    fail(ErrorCode::Usage, "condition_input: expected " + std::to_string(expected) + "x" + std::to_string(expected) +
                               " image for this target");
  const std::uint8_t one[1] = {label};
  return condition_input(image, std::span<const std::uint8_t>(one, 1), enabled);
}

GanLosses gan_losses(double d_real, double d_fake, bool saturating, double real_target) {
  const double lo = kProbEps, hi = 1.0 - kProbEps;
  const double r = std::clamp(d_real, lo, hi);
  const double f = std::clamp(d_fake, lo, hi);
  const double r_gate = (d_real > lo && d_real < hi) ? 1.0 : 0.0;
  const double f_gate = (d_fake > lo && d_fake < hi) ? 1.0 : 0.0;
  GanLosses out;
  out.d_loss = -(real_target * std::log(r) + (1.0 - real_target) * std::log(1.0 - r) + std::log(1.0 - f));
  out.dd_real = r_gate * (-real_target / r + (1.0 - real_target) / (1.0 - r));
  out.dd_fake = f_gate / (1.0 - f);
  if (saturating) {
    out.g_loss = std::log(1.0 - f);
    out.dg_fake = -f_gate / (1.0 - f);
  } else {
    out.g_loss = -std::log(f);
    out.dg_fake = -f_gate / f;
  }
  return out;
}

nn::Sequential<float> build_generator(const GanConfig& cfg) {
  const std::size_t in = 1 + (cfg.conditioned ? kClasses : 0);
  nn::Sequential<float> g;
  g.emplace<nn::Conv2d<float>>(conv(in, cfg.g_width, 1), true);
  g.emplace<nn::LeakyRelu<float>>(cfg.leaky_slope);
  g.emplace<nn::UpsampleNearest<float>>(2);
  g.emplace<nn::Conv2d<float>>(conv(cfg.g_width, cfg.g_width, 1), true);
  g.emplace<nn::LeakyRelu<float>>(cfg.leaky_slope);
  g.emplace<nn::UpsampleNearest<float>>(2);
  g.emplace<nn::Conv2d<float>>(conv(cfg.g_width, cfg.g_width_out, 1), true);
  g.emplace<nn::LeakyRelu<float>>(cfg.leaky_slope);
  g.emplace<nn::Conv2d<float>>(conv(cfg.g_width_out, 1, 1), true);
  g.emplace<nn::Sigmoid<float>>();
  return g;
}

nn::Sequential<float> build_discriminator(const GanConfig& cfg, std::size_t image_size) {
  const std::size_t in = 1 + (cfg.conditioned ? kClasses : 0);
  const std::size_t after = ((image_size + 1) / 2 + 1) / 2;
  nn::Sequential<float> d;
  d.emplace<nn::Conv2d<float>>(conv(in, cfg.d_width1, 2), true);
  d.emplace<nn::LeakyRelu<float>>(cfg.leaky_slope);
  d.emplace<nn::Conv2d<float>>(conv(cfg.d_width1, cfg.d_width2, 2), true);
  d.emplace<nn::LeakyRelu<float>>(cfg.leaky_slope);
  d.emplace<nn::Flatten<float>>();
  d.emplace<nn::Dense<float>>(cfg.d_width2 * after * after, 1, true);
  d.emplace<nn::Sigmoid<float>>();
  return d;
}

GanPair build_gan(const GanConfig& cfg) {
  GanPair pair{cfg, build_generator(cfg), build_discriminator(cfg)};
  nn::init_parameters(pair.generator, cfg.seed);
  nn::init_parameters(pair.discriminator, cfg.seed + 1);
  return pair;
}

Tensor GanPair::generate(const Tensor& lr, std::span<const std::uint8_t> labels) {
  return generator.forward(condition_input(lr, labels, config.conditioned), nn::Mode::Eval);
}

GanTrainer::GanTrainer(const GanConfig& config) : GanTrainer(build_gan(config)) {}

GanTrainer::GanTrainer(GanPair pair)
    : pair_(std::move(pair)),
      g_opt_({pair_.config.lr, pair_.config.beta1, pair_.config.beta2, 1e-8}),
      d_opt_({pair_.config.d_lr, pair_.config.beta1, pair_.config.beta2, 1e-8}),
      noise_rng_(pair_.config.seed + 2) {}

Tensor GanTrainer::noisy(Tensor image) {
  if (noise_ <= 0.0) return image;
  std::normal_distribution<float> dist(0.0f, static_cast<float>(noise_));
  for (float& v : image.data()) v += dist(noise_rng_);
  return image;
}

GanStepStats GanTrainer::step(const Tensor& lr, const Tensor& hr, std::span<const std::uint8_t> labels) {
  const bool cond = pair_.config.conditioned;
  const bool saturating = pair_.config.saturating;
  const std::size_t batch = hr.shape().n;
  const double inv_b = 1.0 / static_cast<double>(batch);
  const double target = pair_.config.real_label;
  auto& G = pair_.generator;
  auto& D = pair_.discriminator;
  GanStepStats stats;

  // Discriminator: real and fake passes accumulate into one gradient.
  const Tensor fake_fixed = G.forward(condition_input(lr, labels, cond), nn::Mode::Eval);
  D.zero_grad();
  const Tensor p_real = D.forward(condition_input(noisy(hr), labels, cond), nn::Mode::Train);
  Tensor grad_real(p_real.shape());
  std::vector<double> real_probs(batch);
  for (std::size_t i = 0; i < batch; ++i) real_probs[i] = p_real[i];
  D.backward([&] {
    for (std::size_t i = 0; i < batch; ++i) grad_real[i] = static_cast<float>(gan_losses(real_probs[i], 0.5, saturating, target).dd_real * inv_b);
    return grad_real;
  }());
  const Tensor p_fake = D.forward(condition_input(noisy(fake_fixed), labels, cond), nn::Mode::Train);
  Tensor grad_fake(p_fake.shape());
  double correct = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const GanLosses l = gan_losses(real_probs[i], p_fake[i], saturating, target);
    stats.d_loss += l.d_loss * inv_b;
    grad_fake[i] = static_cast<float>(l.dd_fake * inv_b);
    correct += (real_probs[i] > 0.5 ? 1.0 : 0.0) + (p_fake[i] < 0.5 ? 1.0 : 0.0);
  }
  stats.d_accuracy = correct / (2.0 * static_cast<double>(batch));
  D.backward(grad_fake);
  auto d_params = D.parameters();
  d_opt_.step(d_params);

  // Generator: gradient flows through D into the image channel only.
  G.zero_grad();
  const Tensor fake = G.forward(condition_input(lr, labels, cond), nn::Mode::Train);
  const Tensor p_gen = D.forward(condition_input(noisy(fake), labels, cond), nn::Mode::Train);
  Tensor grad_gen(p_gen.shape());
  for (std::size_t i = 0; i < batch; ++i) {
    const GanLosses l = gan_losses(0.5, p_gen[i], saturating);
    stats.g_loss += l.g_loss * inv_b;
    grad_gen[i] = static_cast<float>(l.dg_fake * inv_b);
  }
  const Tensor grad_d_in = D.backward(grad_gen);
  G.backward(slice_channels(grad_d_in, fake.shape().c));
  auto g_params = G.parameters();
  g_opt_.step(g_params);
  D.clear_cache();
  G.clear_cache();

  if (!std::isfinite(stats.d_loss) || !std::isfinite(stats.g_loss)) fail(ErrorCode::Numeric, "non-finite GAN loss");
  return stats;
}

GanPair train_srcgan(const pipeline::MnistSet& dataset, const GanConfig& config, GanLossTrace& trace,
                     const EpochCallback& on_epoch) {
  if (dataset.size() == 0) fail(ErrorCode::Usage, "train_srcgan: empty dataset");
  if (config.batch_size == 0 || config.batch_size > dataset.size())
    fail(ErrorCode::Usage, "train_srcgan: batch size must be in [1, dataset size]");
  const Tensor lr_all = pipeline::downscale_mnist(dataset, config.scale);
  GanTrainer trainer(config);
  const std::size_t batches = dataset.size() / config.batch_size;
  const double total = static_cast<double>(batches * config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(dataset.size(), config.seed, epoch);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * config.batch_size, config.batch_size);
      const auto labels = gather_labels(dataset.labels, idx);
      trainer.set_noise(config.instance_noise * (1.0 - static_cast<double>(epoch * batches + b) / total));
      const GanStepStats s = trainer.step(gather(lr_all, idx), gather(dataset.images, idx), labels);
      trace.d_loss.push_back(s.d_loss);
      trace.g_loss.push_back(s.g_loss);
      trace.d_accuracy.push_back(s.d_accuracy);
    }
    if (on_epoch) on_epoch(epoch, trainer);
  }
  return std::move(trainer.pair());
}

nn::Sequential<float> build_classifier() {
  nn::Sequential<float> c;
  c.emplace<nn::Conv2d<float>>(conv(1, 16, 2), true);
  c.emplace<nn::Relu<float>>();
  c.emplace<nn::Conv2d<float>>(conv(16, 32, 2), true);
  c.emplace<nn::Relu<float>>();
  c.emplace<nn::Flatten<float>>();
  c.emplace<nn::Dense<float>>(32 * 7 * 7, 128, true);
  c.emplace<nn::Relu<float>>();
  c.emplace<nn::Dense<float>>(128, kClasses, true);
  return c;
}

nn::Sequential<float> train_classifier(const pipeline::MnistSet& train, const ClassifierConfig& config,
                                       const std::function<void(std::size_t, double)>& on_epoch) {
  if (train.size() == 0) fail(ErrorCode::Usage, "train_classifier: empty dataset");
  auto net = build_classifier();
  nn::init_parameters(net, config.seed);
  optim::Adam<float> adam({config.lr, 0.9, 0.999, 1e-8});
  const std::size_t bs = std::min(config.batch_size, train.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(train.size(), config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start + bs <= train.size(); start += bs) {
      const std::span<const std::size_t> idx(order.data() + start, bs);
      const auto labels = gather_labels(train.labels, idx);
      net.zero_grad();
      const Tensor logits = net.forward(gather(train.images, idx), nn::Mode::Train);
      const auto loss = nn::softmax_cross_entropy(logits, std::span<const std::uint8_t>(labels));
      net.backward(loss.grad);
      auto params = net.parameters();
      adam.step(params);
      loss_sum += loss.loss;
      ++steps;
    }
    net.clear_cache();
    if (on_epoch) on_epoch(epoch, steps ? loss_sum / static_cast<double>(steps) : 0.0);
  }
  return net;
}

double classifier_accuracy(nn::Sequential<float>& classifier, const Tensor& images, std::span<const std::uint8_t> labels,
                           std::size_t batch_size) {
  const std::size_t n = images.shape().n;
  if (labels.size() != n) fail(ErrorCode::Usage, "classifier_accuracy: label count mismatch");
  if (n == 0) return 0.0;
  batch_size = std::max<std::size_t>(1, batch_size);
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = classifier.forward(gather(images, idx), nn::Mode::Eval);
    for (std::size_t i = 0; i < idx.size(); ++i) correct += argmax_row(logits, i) == labels[start + i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

ClassifierResult train_eval_classifier(const pipeline::MnistSet& train, const pipeline::MnistSet& test,
                                       const ClassifierConfig& config) {
  ClassifierResult r{train_classifier(train, config), 0.0};
  r.accuracy = classifier_accuracy(r.model, test.images, test.labels);
  return r;
}

double classify_generated(nn::Sequential<float>& classifier, GanPair& gan, const pipeline::MnistSet& test,
                          std::size_t batch_size) {
  const Tensor lr = pipeline::downscale_mnist(test, gan.config.scale);
  const std::size_t n = test.size();
  batch_size = std::max<std::size_t>(1, batch_size);
  Tensor generated({n, 1, test.images.shape().h, test.images.shape().w});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor out = gan.generate(gather(lr, idx), gather_labels(test.labels, idx));
    std::copy_n(out.raw(), out.size(), generated.raw() + start * generated.shape().item());
  }
  return classifier_accuracy(classifier, generated, test.labels, batch_size);
}

Tensor bicubic_upscale_batch(const Tensor& lr, std::size_t out_size) {
  const Shape s = lr.shape();
  Tensor out({s.n, 1, out_size, out_size});
  pipeline::ImagePlane plane(s.w, s.h, pipeline::Range::Unit);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < s.plane(); ++i) plane.data[i] = lr[n * s.item() + i];
    const auto up = pipeline::bicubic_resize(plane, out_size, out_size, true);
    for (std::size_t i = 0; i < up.data.size(); ++i) out[n * out_size * out_size + i] = static_cast<float>(up.data[i]);
  }
  return out;
}

}  // namespace srforge::srcgan
