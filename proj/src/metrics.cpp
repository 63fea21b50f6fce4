#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "color.hpp"
#include "dataset.hpp"
#include "resize.hpp"

namespace srforge::metrics {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

ImagePlane shaved(const ImagePlane& p, std::size_t shave) {
  if (2 * shave >= p.width || 2 * shave >= p.height)
    fail(ErrorCode::Usage, "shave of " + std::to_string(shave) + " leaves no pixels");
  return shave == 0 ? p : p.crop(shave, shave, p.width - 2 * shave, p.height - 2 * shave);
}

void check_dims(const ImagePlane& a, const ImagePlane& b) {
  if (a.width != b.width || a.height != b.height)
    fail(ErrorCode::Usage, "metric inputs differ in size: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                               " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

std::vector<double> gaussian_taps() {
  std::vector<double> g(kWindow);
  const double c = (kWindow - 1) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-mode separable Gaussian filter.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                 const std::vector<double>& g) {
  const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(ow * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * src[y * w + x + k];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(ow * oh);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

ImagePlane to_byte_units(const ImagePlane& p, bool quantize) {
  ImagePlane out(p.width, p.height, pipeline::Range::Byte);
  const double k = p.range == pipeline::Range::Unit ? 255.0 : 1.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double v = p.data[i] * k;
    out.data[i] = quantize ? std::clamp(std::round(v), 0.0, 255.0) : v;
  }
  return out;
}

double mean_of(const std::vector<ImageScore>& rows, double ImageScore::*field) {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.*field;
  return s / static_cast<double>(rows.size());
}

ImageScore score_image(const Upscaler& model, const std::filesystem::path& file, const EvalOptions& options) {
  const ImagePlane y = pipeline::luma_plane(pipeline::read_image(file)).to_range(pipeline::Range::Unit);
  const pipeline::DegradedImage d = pipeline::degrade(y, options.scale);

  const Tensor input = pipeline::plane_to_tensor(d.lr_up);
  Tensor out = model(input);
  if (out.shape() != input.shape())
    fail(ErrorCode::Usage, "model output shape " + to_string(out.shape()) + " differs from input " + to_string(input.shape()));
  out = clamp(out, 0.0f, 1.0f);

  const ImagePlane gt = to_byte_units(d.hr, options.quantize);
  // Baseline goes through the same float/clamp path as the model output.
  const ImagePlane bic =
      to_byte_units(pipeline::tensor_to_plane(clamp(input, 0.0f, 1.0f), pipeline::Range::Unit), options.quantize);
  const ImagePlane pred = to_byte_units(pipeline::tensor_to_plane(out, pipeline::Range::Unit), options.quantize);

  ImageScore s;
  s.image = file.filename().string();
  s.psnr_db = psnr(pred, gt, 255.0, options.shave);
  s.ssim = ssim(pred, gt, 255.0, options.shave);
  s.bicubic_psnr_db = psnr(bic, gt, 255.0, options.shave);
  s.bicubic_ssim = ssim(bic, gt, 255.0, options.shave);
  return s;
}

std::string fmt(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

double psnr(const ImagePlane& a, const ImagePlane& b, double peak, std::size_t shave) {
  check_dims(a, b);
  const ImagePlane sa = shaved(a, shave), sb = shaved(b, shave);
  double sum = 0.0;
  for (std::size_t i = 0; i < sa.data.size(); ++i) {
    const double d = sa.data[i] - sb.data[i];
    sum += d * d;
  }
  if (sum == 0.0) return kInfinitePsnr;
  const double mse = sum / static_cast<double>(sa.data.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const ImagePlane& a, const ImagePlane& b, double peak, std::size_t shave) {
  check_dims(a, b);
  const ImagePlane sa = shaved(a, shave), sb = shaved(b, shave);
  const std::size_t w = sa.width, h = sa.height;
  if (w < kWindow || h < kWindow) fail(ErrorCode::Usage, "ssim needs at least 11x11 pixels after shaving");

  std::vector<double> aa(w * h), bb(w * h), ab(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    aa[i] = sa.data[i] * sa.data[i];
    bb[i] = sb.data[i] * sb.data[i];
    ab[i] = sa.data[i] * sb.data[i];
  }
  const auto g = gaussian_taps();
  const auto mu_a = filter_valid(sa.data, w, h, g);
  const auto mu_b = filter_valid(sb.data, w, h, g);
  const auto e_aa = filter_valid(aa, w, h, g);
  const auto e_bb = filter_valid(bb, w, h, g);
  const auto e_ab = filter_valid(ab, w, h, g);

  const double c1 = (kK1 * peak) * (kK1 * peak);
  const double c2 = (kK2 * peak) * (kK2 * peak);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double EvalReport::mean_psnr() const { return mean_of(images, &ImageScore::psnr_db); }
double EvalReport::mean_ssim() const { return mean_of(images, &ImageScore::ssim); }
double EvalReport::mean_bicubic_psnr() const { return mean_of(images, &ImageScore::bicubic_psnr_db); }
double EvalReport::mean_bicubic_ssim() const { return mean_of(images, &ImageScore::bicubic_ssim); }

EvalReport evaluate_sr(const Upscaler& model, const std::filesystem::path& dataset_dir, const EvalOptions& options) {
  if (options.scale < 2 || options.scale > 4) fail(ErrorCode::Usage, "scale must be 2, 3 or 4");
  const auto files = pipeline::list_images(dataset_dir);
  if (files.empty()) fail(ErrorCode::Io, "no images in " + dataset_dir.string());

  EvalReport report;
  report.dataset = dataset_dir.filename().string();
  if (report.dataset.empty()) report.dataset = dataset_dir.parent_path().filename().string();
  report.options = options;
  report.images.resize(files.size());

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(files.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < files.size(); ++i) report.images[i] = score_image(model, files[i], options);
    return report;
  }
  // Each worker owns a fixed stride of images; results land in file order.
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < files.size(); i += threads) report.images[i] = score_image(model, files[i], options);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "# dataset=" << report.dataset << " scale=" << report.options.scale << " shave=" << report.options.shave
     << " quantize=" << (report.options.quantize ? 1 : 0) << '\n';
  os << "image,psnr_db,ssim,bicubic_psnr_db,bicubic_ssim\n";
  for (const auto& r : report.images)
    os << r.image << ',' << fmt(r.psnr_db) << ',' << fmt(r.ssim) << ',' << fmt(r.bicubic_psnr_db) << ','
       << fmt(r.bicubic_ssim) << '\n';
  os << "mean," << fmt(report.mean_psnr()) << ',' << fmt(report.mean_ssim()) << ',' << fmt(report.mean_bicubic_psnr())
     << ',' << fmt(report.mean_bicubic_ssim()) << '\n';
  return os.str();
}

}  // namespace srforge::metrics
