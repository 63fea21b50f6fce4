#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "checkpoint.hpp"
#include "color.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "image.hpp"
#include "metrics.hpp"
#include "mnist.hpp"
#include "resize.hpp"

namespace srforge::cli {

namespace fs = std::filesystem;
using pipeline::Image8;
using pipeline::ImagePlane;
using pipeline::Range;

namespace {

std::ofstream open_out(const fs::path& path, bool append = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) fail(ErrorCode::Io, "cannot write " + path.string());
  return f;
}

void require_dir(const fs::path& dir, const std::string& what) {
  if (!fs::is_directory(dir)) fail(ErrorCode::Io, what + " directory not found: " + dir.string());
}

unsigned thread_count(const RunConfig& cfg) {
  return static_cast<unsigned>(std::max<std::uint64_t>(1, cfg.count("threads", 1)));
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + epoch);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::string epoch_file(const std::string& stem, std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_epoch_%03zu.srfg", epoch);
  return stem + buf;
}

nn::Sequential<float> build_model(const models::ModelConfig& mc, bool baseline) {
  if (baseline) return models::build_vdsr_baseline<float>(mc.depth_middle, mc.base_channels, mc.with_bias);
  mc.validate();
  return models::build_vdsr_resnext<float>(mc);
}

bool is_baseline(const RunConfig& cfg) {
  const std::string m = cfg.str("model", "resnext");
  if (m != "resnext" && m != "vdsr") fail(ErrorCode::Usage, "model must be 'resnext' or 'vdsr', got '" + m + "'");
  return m == "vdsr";
}

void init_model(nn::Sequential<float>& net, const RunConfig& cfg) {
  const std::string init = cfg.str("init", "he");
  if (init == "he") {
    nn::init_parameters(net, cfg.count("seed", 1));
  } else if (init == "zero") {
    nn::zero_parameters(net);
  } else {
    fail(ErrorCode::Usage, "init must be 'he' or 'zero', got '" + init + "'");
  }
}

io::Checkpoint sr_state(const models::ModelConfig& mc, bool baseline, nn::Sequential<float>& net,
                        const optim::Sgd<float>& sgd, std::uint32_t epoch, std::uint64_t step) {
  io::Checkpoint c = io::sr_checkpoint(mc, net);
  if (baseline) {
    c.kind = io::ModelKind::VdsrBaseline;
    c.arch = {mc.depth_middle, 0, 1, mc.base_channels, 3};
  }
  c.epoch = epoch;
  c.step = step;
  io::append_state(c, "optim.velocity.", sgd.velocity());
  return c;
}

metrics::Upscaler upscaler(nn::Sequential<float>& net) {
  return [&net](const Tensor& x) { return net.forward(x, nn::Mode::Eval); };
}

Image8 gray_image(const ImagePlane& plane) {
  return {plane.width, plane.height, 1, pipeline::quantize(plane)};
}

Image8 rgb_image(const pipeline::Rgb& rgb) {
  const auto r = pipeline::quantize(rgb.r), g = pipeline::quantize(rgb.g), b = pipeline::quantize(rgb.b);
  Image8 img{rgb.r.width, rgb.r.height, 3, std::vector<std::uint8_t>(r.size() * 3)};
  for (std::size_t i = 0; i < r.size(); ++i) {
    img.pixels[3 * i] = r[i];
    img.pixels[3 * i + 1] = g[i];
    img.pixels[3 * i + 2] = b[i];
  }
  return img;
}

Image8 as_channels(const Image8& img, std::size_t channels) {
  if (img.channels == channels) return img;
  Image8 out{img.width, img.height, channels, std::vector<std::uint8_t>(img.width * img.height * channels)};
  for (std::size_t i = 0; i < img.width * img.height; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      out.pixels[i * channels + c] = img.pixels[i * img.channels + std::min(c, img.channels - 1)];
  return out;
}

// Tiles equally sized images left to right with a white gutter.
Image8 hconcat(const std::vector<Image8>& parts, std::size_t gutter = 4) {
  std::size_t channels = 1;
  for (const auto& p : parts) channels = std::max(channels, p.channels);
  std::size_t w = 0, h = 0;
  for (const auto& p : parts) {
    w += p.width;
    h = std::max(h, p.height);
  }
  w += gutter * (parts.size() - 1);
  Image8 out{w, h, channels, std::vector<std::uint8_t>(w * h * channels, 255)};
  std::size_t x0 = 0;
  for (const auto& p : parts) {
    const Image8 q = as_channels(p, channels);
    for (std::size_t y = 0; y < q.height; ++y)
      std::copy_n(q.pixels.data() + y * q.width * channels, q.width * channels,
                  out.pixels.data() + (y * w + x0) * channels);
    x0 += q.width + gutter;
  }
  return out;
}

Image8 crop_image(const Image8& img, std::size_t w, std::size_t h) {
  Image8 out{w, h, img.channels, std::vector<std::uint8_t>(w * h * img.channels)};
  for (std::size_t y = 0; y < h; ++y)
    std::copy_n(img.pixels.data() + y * img.width * img.channels, w * img.channels,
                out.pixels.data() + y * w * img.channels);
  return out;
}

struct MnistFiles {
  fs::path train_images, train_labels, test_images, test_labels;
};

MnistFiles mnist_files(const RunConfig& cfg) {
  const fs::path dir = cfg.maybe("mnist_dir") ? fs::path(*cfg.maybe("mnist_dir")) : cfg.data_root() / "mnist";
  require_dir(dir, "MNIST");
  return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", dir / "t10k-images-idx3-ubyte",
          dir / "t10k-labels-idx1-ubyte"};
}

pipeline::MnistSet mnist_train(const RunConfig& cfg) {
  const auto f = mnist_files(cfg);
  return pipeline::load_mnist(f.train_images, f.train_labels, cfg.count("train_images", 0));
}

pipeline::MnistSet mnist_test(const RunConfig& cfg) {
  const auto f = mnist_files(cfg);
  return pipeline::load_mnist(f.test_images, f.test_labels, cfg.count("test_images", 0));
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

void write_loss_csv(const fs::path& path, const srcgan::GanLossTrace& trace) {
  auto f = open_out(path);
  f << "iteration,d_loss,g_loss\n";
  for (std::size_t i = 0; i < trace.d_loss.size(); ++i)
    f << (i + 1) << ',' << csv_number(trace.d_loss[i]) << ',' << csv_number(trace.g_loss[i]) << '\n';
}

Image8 digit_row(const Tensor& images, std::size_t count) {
  const Shape s = images.shape();
  std::vector<Image8> cells;
  for (std::size_t n = 0; n < count; ++n) {
    ImagePlane p(s.w, s.h, Range::Unit);
    for (std::size_t i = 0; i < s.plane(); ++i) p.data[i] = images[n * s.item() + i];
    cells.push_back(gray_image(p));
  }
  return hconcat(cells, 2);
}

Image8 vstack(const std::vector<Image8>& rows, std::size_t gutter = 2) {
  std::size_t w = 0, h = 0;
  for (const auto& r : rows) {
    w = std::max(w, r.width);
    h += r.height;
  }
  h += gutter * (rows.size() - 1);
  Image8 out{w, h, 1, std::vector<std::uint8_t>(w * h, 255)};
  std::size_t y0 = 0;
  for (const auto& r : rows) {
    for (std::size_t y = 0; y < r.height; ++y) std::copy_n(r.pixels.data() + y * r.width, r.width, out.pixels.data() + (y0 + y) * w);
    y0 += r.height + gutter;
  }
  return out;
}

Tensor nearest_upscale(const Tensor& lr, std::size_t factor) {
  nn::UpsampleNearest<float> up(factor);
  return up.forward(lr, nn::Mode::Eval);
}

}  // namespace

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

models::ModelConfig model_config(const RunConfig& cfg) {
  models::ModelConfig mc;
  mc.depth_middle = static_cast<std::uint32_t>(cfg.count("depth_middle", mc.depth_middle));
  mc.block_width = static_cast<std::uint32_t>(cfg.count("block_width", mc.block_width));
  mc.cardinality = static_cast<std::uint32_t>(cfg.count("cardinality", mc.cardinality));
  mc.base_channels = static_cast<std::uint32_t>(cfg.count("base_channels", mc.base_channels));
  mc.kernel = static_cast<std::uint32_t>(cfg.count("kernel", mc.kernel));
  mc.with_bias = cfg.flag("bias", mc.with_bias);
  return mc;
}

optim::SgdConfig sgd_config(const RunConfig& cfg) {
  optim::SgdConfig sc;
  sc.lr = cfg.number("lr", sc.lr);
  sc.momentum = cfg.number("momentum", sc.momentum);
  sc.weight_decay = cfg.number("weight_decay", sc.weight_decay);
  sc.clip_theta = cfg.number("clip_theta", sc.clip_theta);
  const std::string mode = cfg.str("clip_mode", "fixed");
  if (mode == "none") {
    sc.clip_mode = optim::ClipMode::None;
  } else if (mode == "fixed") {
    sc.clip_mode = optim::ClipMode::Fixed;
  } else if (mode == "adjustable") {
    sc.clip_mode = optim::ClipMode::Adjustable;
  } else {
    fail(ErrorCode::Usage, "clip_mode must be none, fixed or adjustable");
  }
  return sc;
}

optim::LrSchedule lr_schedule(const RunConfig& cfg) {
  optim::LrSchedule s;
  s.initial_lr = cfg.number("lr", s.initial_lr);
  s.decay_factor = cfg.number("lr_decay_factor", s.decay_factor);
  s.decay_every_epochs = static_cast<std::uint32_t>(cfg.count("lr_decay_epochs", s.decay_every_epochs));
  s.validate();
  return s;
}

srcgan::GanConfig gan_settings(const RunConfig& cfg) {
  srcgan::GanConfig g;
  g.conditioned = cfg.flag("conditioned", g.conditioned);
  g.saturating = cfg.flag("saturating", g.saturating);
  g.epochs = cfg.count("epochs", g.epochs);
  g.batch_size = cfg.count("batch_size", g.batch_size);
  g.lr = cfg.number("lr", g.lr);
  g.d_lr = cfg.number("d_lr", g.d_lr);
  g.beta1 = cfg.number("beta1", g.beta1);
  g.beta2 = cfg.number("beta2", g.beta2);
  g.leaky_slope = cfg.number("leaky_slope", g.leaky_slope);
  g.real_label = cfg.number("real_label", g.real_label);
  g.instance_noise = cfg.number("instance_noise", g.instance_noise);
  g.seed = cfg.count("seed", g.seed);
  g.g_width = cfg.count("g_width", g.g_width);
  g.g_width_out = cfg.count("g_width_out", g.g_width_out);
  g.d_width1 = cfg.count("d_width1", g.d_width1);
  g.d_width2 = cfg.count("d_width2", g.d_width2);
  return g;
}

std::string count_params_table(const std::vector<std::uint32_t>& widths, const models::ModelConfig& base) {
  std::string out = "width,cardinality,bias,block_grouped,block_dense,blocks,model_grouped,model_dense\n";
  for (const std::uint32_t w : widths) {
    for (const bool bias : {false, true}) {
      models::ModelConfig mc = base;
      mc.block_width = w;
      mc.with_bias = bias;
      mc.validate();
      auto grouped = models::build_block<float>(mc.base_channels, w, mc.cardinality, mc.kernel, bias);
      auto dense = models::build_block<float>(mc.base_channels, w, 1, mc.kernel, bias);
      auto model_g = models::build_vdsr_resnext<float>(mc);
      mc.cardinality = 1;
      auto model_d = models::build_vdsr_resnext<float>(mc);
      out += std::to_string(w) + ',' + std::to_string(base.cardinality) + ',' + (bias ? "yes" : "no") + ',' +
             std::to_string(models::count_parameters(grouped, bias)) + ',' +
             std::to_string(models::count_parameters(dense, bias)) + ',' + std::to_string(base.blocks()) + ',' +
             std::to_string(models::count_parameters(model_g, bias)) + ',' +
             std::to_string(models::count_parameters(model_d, bias)) + '\n';
    }
  }
  return out;
}

void cmd_prepare_data(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  pipeline::DatasetOptions opt;
  opt.image_dir = cfg.maybe("src") ? fs::path(*cfg.maybe("src")) : cfg.data_root() / "T91_B200";
  require_dir(opt.image_dir, "source image");
  opt.scales = cfg.int_list("scales", opt.scales);
  opt.patch = cfg.count("patch", opt.patch);
  opt.stride = cfg.count("stride", opt.stride);
  opt.augment = cfg.flag("augment", opt.augment);
  opt.seed = cfg.count("seed", opt.seed);
  const fs::path manifest_path = cfg.required("manifest");
  if (cfg.flag("verbose", false)) log << "scanning " << opt.image_dir.string() << '\n';
  const auto manifest = pipeline::make_sr_manifest(opt);
  pipeline::write_manifest(manifest_path, manifest);
  out << "patches " << manifest.records.size() << '\n';
}

io::Checkpoint initial_sr_checkpoint(const RunConfig& cfg) {
  const bool baseline = is_baseline(cfg);
  const auto mc = model_config(cfg);
  auto net = build_model(mc, baseline);
  init_model(net, cfg);
  optim::Sgd<float> sgd(sgd_config(cfg));
  return sr_state(mc, baseline, net, sgd, 0, 0);
}

void cmd_init_model(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const fs::path path = cfg.required("out");
  io::save_checkpoint(path, initial_sr_checkpoint(cfg));
  out << "wrote " << path.string() << '\n';
}

void cmd_train_sr(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const fs::path out_dir = cfg.required("out_dir");
  const auto manifest = pipeline::read_manifest(cfg.required("manifest"));
  std::size_t n = manifest.records.size();
  if (const auto cap = cfg.count("max_patches", 0); cap > 0) n = std::min<std::size_t>(n, cap);
  if (n == 0) fail(ErrorCode::Io, "manifest has no patches");

  const std::uint64_t seed = cfg.count("seed", 1);
  const std::size_t epochs = cfg.count("epochs", 25);
  const std::size_t batch = cfg.count("batch_size", 128);
  const std::size_t max_iters = cfg.count("max_iters", 0);
  if (batch == 0) fail(ErrorCode::Usage, "batch_size must be positive");
  const auto schedule = lr_schedule(cfg);
  const bool verbose = cfg.flag("verbose", false);
  const auto val_dir = cfg.maybe("val_dir");
  const int val_scale = static_cast<int>(cfg.count("val_scale", 2));
  if (val_dir) require_dir(*val_dir, "validation");

  bool baseline = is_baseline(cfg);
  models::ModelConfig mc = model_config(cfg);
  nn::Sequential<float> net;
  optim::Sgd<float> sgd(sgd_config(cfg));
  std::uint32_t start_epoch = 0;
  std::uint64_t step = 0;
  const auto resume = cfg.maybe("resume");
  if (resume) {
    const auto ckpt = io::load_checkpoint(*resume);
    baseline = ckpt.kind == io::ModelKind::VdsrBaseline;
    mc = io::sr_config(ckpt);
    net = io::load_sr_model(ckpt);
    sgd.velocity() = io::restore_state(ckpt, "optim.velocity.");
    start_epoch = ckpt.epoch;
    step = ckpt.step;
  } else {
    net = build_model(mc, baseline);
    init_model(net, cfg);
    io::save_checkpoint(out_dir / epoch_file("model", 0), sr_state(mc, baseline, net, sgd, 0, 0));
  }

  const fs::path log_path = cfg.maybe("log") ? fs::path(*cfg.maybe("log")) : out_dir / "train_log.csv";
  const bool append = resume && fs::exists(log_path);
  auto csv = open_out(log_path, append);
  if (!append) csv << "epoch,iter,loss,lr,set5_psnr\n";

  pipeline::PatchSource source(manifest);
  std::optional<io::Checkpoint> last_good;
  const fs::path last_good_path = out_dir / "last_good.srfg";
  auto save_last_good = [&] {
    io::save_checkpoint(last_good_path, last_good ? *last_good
                                                  : sr_state(mc, baseline, net, sgd, static_cast<std::uint32_t>(start_epoch), step));
    log << "non-finite training state; last good checkpoint written to " << last_good_path.string() << '\n';
  };

  for (std::size_t epoch = start_epoch; epoch < epochs; ++epoch) {
    const double lr = optim::lr_at(schedule, static_cast<std::uint32_t>(epoch));
    sgd.config().lr = lr;
    const auto order = epoch_order(n, seed, epoch);
    std::size_t iters = (n + batch - 1) / batch;
    if (max_iters > 0) iters = std::min(iters, max_iters);
    for (std::size_t it = 0; it < iters; ++it) {
      const std::size_t begin = it * batch, end = std::min(n, begin + batch);
      std::vector<pipeline::SamplePair> pairs;
      pairs.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) pairs.push_back(source.materialize(manifest.records[order[k]]));
      std::vector<std::size_t> idx(pairs.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      const auto [input, target] = pipeline::batch_tensors(pairs, idx);

      double loss = 0.0;
      try {
        net.zero_grad();
        const Tensor pred = net.forward(input, nn::Mode::Train);
        const auto l = mse_loss(pred, target);
        loss = l.loss;
        if (!std::isfinite(loss)) fail(ErrorCode::Numeric, "non-finite loss at iteration " + std::to_string(step + 1));
        last_good = sr_state(mc, baseline, net, sgd, static_cast<std::uint32_t>(epoch), step);
        net.backward(l.grad);
        auto params = net.parameters();
        sgd.step(params);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Numeric) {
          csv.flush();
          save_last_good();
        }
        throw;
      }
      ++step;
      std::string psnr_cell;
      if (val_dir && it + 1 == iters) {
        net.clear_cache();
        metrics::EvalOptions eo;
        eo.scale = val_scale;
        eo.shave = static_cast<std::size_t>(val_scale);
        eo.threads = thread_count(cfg);
        psnr_cell = csv_number(metrics::evaluate_sr(upscaler(net), *val_dir, eo).mean_psnr());
      }
      csv << epoch << ',' << step << ',' << csv_number(loss) << ',' << csv_number(lr) << ',' << psnr_cell << '\n';
      if (verbose) log << "epoch " << epoch << " iter " << step << " loss " << csv_number(loss) << '\n';
    }
    net.clear_cache();
    csv.flush();
    io::save_checkpoint(out_dir / epoch_file("model", epoch + 1),
                        sr_state(mc, baseline, net, sgd, static_cast<std::uint32_t>(epoch + 1), step));
  }
  out << "trained " << step << " iterations; checkpoints in " << out_dir.string() << '\n';
}

void cmd_eval_sr(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto ckpt = io::load_checkpoint(cfg.required("checkpoint"));
  auto net = io::load_sr_model(ckpt);
  const fs::path dir = cfg.maybe("dataset") ? fs::path(*cfg.maybe("dataset")) : cfg.data_root() / "Set5";
  require_dir(dir, "evaluation");
  metrics::EvalOptions eo;
  eo.scale = static_cast<int>(cfg.count("scale", 2));
  eo.shave = cfg.count("shave", static_cast<std::uint64_t>(eo.scale));
  eo.quantize = cfg.flag("quantize", false);
  eo.threads = thread_count(cfg);
  const std::string csv = metrics::report_csv(metrics::evaluate_sr(upscaler(net), dir, eo));
  if (const auto path = cfg.maybe("out")) {
    open_out(*path) << csv;
  } else {
    out << csv;
  }
}

void cmd_upscale(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  auto net = io::load_sr_model(io::load_checkpoint(cfg.required("checkpoint")));
  const Image8 img = pipeline::read_image(cfg.required("input"));
  const std::size_t scale = cfg.count("scale", 2);
  if (scale < 2 || scale > 4) fail(ErrorCode::Usage, "scale must be 2, 3 or 4");
  const fs::path output = cfg.required("output");
  const std::size_t ow = img.width * scale, oh = img.height * scale;

  auto run_luma = [&](const ImagePlane& y_unit) {
    const ImagePlane up = pipeline::bicubic_resize(y_unit, ow, oh, true);
    Tensor pred = clamp(net.forward(pipeline::plane_to_tensor(up), nn::Mode::Eval), 0.0f, 1.0f);
    return std::pair{clamp(pipeline::plane_to_tensor(up), 0.0f, 1.0f), std::move(pred)};
  };

  Image8 result, bicubic;
  if (img.channels == 1) {
    const auto [bic, pred] = run_luma(pipeline::channel_plane(img, 0).to_range(Range::Unit));
    result = gray_image(pipeline::tensor_to_plane(pred, Range::Unit));
    bicubic = gray_image(pipeline::tensor_to_plane(bic, Range::Unit));
  } else {
    const auto ycc = pipeline::rgb_to_ycbcr(pipeline::channel_plane(img, 0).to_range(Range::Unit),
                                            pipeline::channel_plane(img, 1).to_range(Range::Unit),
                                            pipeline::channel_plane(img, 2).to_range(Range::Unit));
    const auto [bic, pred] = run_luma(ycc.y.to_range(Range::Unit));
    const ImagePlane cb = pipeline::bicubic_resize(ycc.cb, ow, oh, true);
    const ImagePlane cr = pipeline::bicubic_resize(ycc.cr, ow, oh, true);
    auto to_byte = [](const Tensor& t) { return pipeline::tensor_to_plane(t, Range::Unit).to_range(Range::Byte); };
    result = rgb_image(pipeline::ycbcr_to_rgb(to_byte(pred), cb, cr));
    bicubic = rgb_image(pipeline::ycbcr_to_rgb(to_byte(bic), cb, cr));
  }
  pipeline::write_png(output, result);
  out << "wrote " << output.string() << " (" << ow << "x" << oh << ")\n";

  if (const auto hr_path = cfg.maybe("compare")) {
    const Image8 hr = pipeline::read_image(*hr_path);
    const std::size_t w = std::min(ow, hr.width), h = std::min(oh, hr.height);
    const Image8 grid = hconcat({crop_image(bicubic, w, h), crop_image(result, w, h), crop_image(hr, w, h)});
    fs::path grid_path = output;
    grid_path.replace_extension();
    grid_path += "_compare.png";
    if (const auto p = cfg.maybe("compare_out")) grid_path = *p;
    pipeline::write_png(grid_path, grid);
    out << "wrote " << grid_path.string() << " (bicubic | model | ground truth)\n";
  }
}

void cmd_count_params(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  std::vector<std::uint32_t> widths;
  for (const int w : cfg.int_list("widths", {64, 128, 256})) {
    if (w <= 0) fail(ErrorCode::Usage, "widths must be positive");
    widths.push_back(static_cast<std::uint32_t>(w));
  }
  out << count_params_table(widths, model_config(cfg));
}

void cmd_train_srcgan(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const srcgan::GanConfig gc = gan_settings(cfg);
  const fs::path out_dir = cfg.required("out_dir");
  const std::string name = cfg.str("name", gc.conditioned ? "srcgan" : "vanilla");
  const fs::path log_path = cfg.maybe("log") ? fs::path(*cfg.maybe("log")) : out_dir / (name + "_loss.csv");
  const auto train = mnist_train(cfg);
  const bool verbose = cfg.flag("verbose", false);

  auto snapshot = [&](srcgan::GanTrainer& t, std::size_t epoch, std::uint64_t step) {
    io::Checkpoint c = io::gan_checkpoint(t.pair());
    c.epoch = static_cast<std::uint32_t>(epoch);
    c.step = step;
    io::append_state(c, "optim.generator.m.", t.g_optimizer().first_moment());
    io::append_state(c, "optim.generator.v.", t.g_optimizer().second_moment());
    io::append_state(c, "optim.discriminator.m.", t.d_optimizer().first_moment());
    io::append_state(c, "optim.discriminator.v.", t.d_optimizer().second_moment());
    return c;
  };

  srcgan::GanLossTrace trace;
  try {
    auto pair = srcgan::train_srcgan(train, gc, trace, [&](std::size_t epoch, srcgan::GanTrainer& t) {
      io::save_checkpoint(out_dir / epoch_file(name, epoch + 1), snapshot(t, epoch + 1, t.g_optimizer().steps()));
      if (verbose)
        log << name << " epoch " << epoch + 1 << " d_loss " << csv_number(trace.d_loss.back()) << " g_loss "
            << csv_number(trace.g_loss.back()) << '\n';
    });
    io::Checkpoint final_ckpt = io::gan_checkpoint(pair);
    final_ckpt.epoch = static_cast<std::uint32_t>(gc.epochs);
    final_ckpt.step = trace.d_loss.size();
    io::save_checkpoint(out_dir / (name + ".srfg"), final_ckpt);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Numeric) write_loss_csv(log_path, trace);
    throw;
  }
  write_loss_csv(log_path, trace);
  out << name << ": " << trace.d_loss.size() << " iterations; loss log " << log_path.string() << '\n';
}

void cmd_eval_srcgan(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  auto classifier = io::load_classifier(io::load_checkpoint(cfg.required("classifier")));
  auto srcgan_pair = io::load_gan(io::load_checkpoint(cfg.required("srcgan")));
  std::optional<srcgan::GanPair> vanilla;
  if (const auto p = cfg.maybe("vanilla")) vanilla = io::load_gan(io::load_checkpoint(*p));
  const auto test = mnist_test(cfg);
  const std::size_t scale = srcgan_pair.config.scale;
  const Tensor lr = pipeline::downscale_mnist(test, scale);
  const std::size_t side = test.images.shape().h;

  out << "model,accuracy\n";
  out << "SRCGAN," << percent(srcgan::classify_generated(classifier, srcgan_pair, test)) << '\n';
  if (vanilla) out << "SR Vanilla GAN," << percent(srcgan::classify_generated(classifier, *vanilla, test)) << '\n';
  out << "Bicubic," << percent(srcgan::classifier_accuracy(classifier, srcgan::bicubic_upscale_batch(lr, side), test.labels))
      << '\n';
  out << "Ground truth," << percent(srcgan::classifier_accuracy(classifier, test.images, test.labels)) << '\n';

  if (const auto grid_path = cfg.maybe("grid")) {
    const std::size_t count = std::min<std::size_t>(cfg.count("grid_count", 8), test.size());
    const auto head = test.head(count);
    const Tensor lr_head = pipeline::downscale_mnist(head, scale);
    std::vector<Image8> rows{digit_row(nearest_upscale(lr_head, scale), count),
                             digit_row(srcgan_pair.generate(lr_head, head.labels), count)};
    if (vanilla) rows.push_back(digit_row(vanilla->generate(lr_head, head.labels), count));
    rows.push_back(digit_row(head.images, count));
    pipeline::write_png(*grid_path, vstack(rows));
  }
}

void cmd_train_classifier(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  srcgan::ClassifierConfig cc;
  cc.epochs = cfg.count("epochs", cc.epochs);
  cc.batch_size = cfg.count("batch_size", cc.batch_size);
  cc.lr = cfg.number("lr", cc.lr);
  cc.seed = cfg.count("seed", cc.seed);
  const fs::path ckpt_path = cfg.required("out");
  const auto train = mnist_train(cfg);
  const auto test = mnist_test(cfg);
  const bool verbose = cfg.flag("verbose", false);

  std::optional<std::ofstream> csv;
  if (const auto p = cfg.maybe("log")) {
    csv = open_out(*p);
    *csv << "epoch,loss\n";
  }
  auto net = srcgan::train_classifier(train, cc, [&](std::size_t epoch, double loss) {
    if (csv) *csv << epoch + 1 << ',' << csv_number(loss) << '\n';
    if (verbose) log << "classifier epoch " << epoch + 1 << " loss " << csv_number(loss) << '\n';
  });
  const double acc = srcgan::classifier_accuracy(net, test.images, test.labels);
  io::Checkpoint c = io::classifier_checkpoint(net);
  c.epoch = static_cast<std::uint32_t>(cc.epochs);
  io::save_checkpoint(ckpt_path, c);
  out << "test_accuracy," << csv_number(acc) << '\n';
}

}  // namespace srforge::cli
