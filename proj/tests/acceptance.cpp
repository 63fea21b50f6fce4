// Acceptance run: one [PASS]/[FAIL]/[SKIP] line per criterion.
//
//   acceptance                      run everything
//   acceptance --only <name>        one criterion; exit 0 pass, 1 fail, 77 skip
//
// Thresholds live in kTol below and nowhere else. Long runs leave their
// logs, checkpoints and tables under --work-dir.
#include <CLI11.hpp>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "checkpoint.hpp"
#include "checks.hpp"
#include "commands.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "mnist.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace srforge;
namespace fs = std::filesystem;

namespace {

namespace kTol {
constexpr double kTableSeconds = 1.0;
constexpr double kBranchAbs = 1e-5;
constexpr int kBranchInputs = 100;
constexpr double kBranchSeconds = 10.0;
constexpr double kGradRel = 1e-4;
constexpr int kGradInstances = 20;
constexpr double kGradSeconds = 120.0;
constexpr double kPsnrAbsDb = 1e-9;
constexpr double kSsimAbs = 1e-6;
constexpr double kDeskGainDb = 0.3;
constexpr std::size_t kDeskPatches = 10000;
constexpr std::size_t kDeskEpochs = 2;
constexpr double kDeskSeconds = 2 * 3600.0;
constexpr double kAnchorPatches = 370000.0;
constexpr double kAnchorRel = 0.10;
constexpr double kClassifierAcc = 0.97;
constexpr std::size_t kClassifierEpochs = 5;
constexpr double kClassifierSeconds = 30 * 60.0;
constexpr double kGanGapPoints = 5.0;
constexpr std::size_t kGanEpochs = 10;
constexpr std::size_t kGanImages = 10000;
}  // namespace kTol

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::string title;
  std::function<Outcome()> run;
};

fs::path g_work;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

using Settings = std::vector<std::pair<std::string, std::string>>;

std::string run_command(void (*cmd)(const cli::RunConfig&, std::ostream&, std::ostream&), const Settings& settings) {
  cli::RunConfig cfg;
  for (const auto& [k, v] : settings) cfg.set(k, v);
  std::ostringstream out;
  cmd(cfg, out, std::cerr);
  return out.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path mnist_dir() { return support::data_root() / "mnist"; }

// ---------------------------------------------------------------- criteria

Outcome table_counts() {
  Stopwatch sw;
  struct Row {
    std::uint32_t width;
    std::uint64_t dense, grouped;
  };
  const Row table[] = {{64, 110592, 74880}, {128, 294912, 152064}, {256, 884736, 313344}};
  bool ok = true;
  std::string detail;
  for (const Row& r : table) {
    auto grouped = models::build_block<float>(64, r.width, 32, 3, false);
    auto dense = models::build_block<float>(64, r.width, 1, 3, false);
    const auto g = models::count_parameters(grouped, false), d = models::count_parameters(dense, false);
    ok = ok && g == r.grouped && d == r.dense;
    detail += fmt("w%u %llu/%llu ", r.width, static_cast<unsigned long long>(d), static_cast<unsigned long long>(g));
  }
  const double t = sw.seconds();
  return verdict(ok && t < kTol::kTableSeconds, detail + fmt("in %.3f s", t));
}

Outcome branch_equivalence() {
  Stopwatch sw;
  const double worst = checks::branch_equivalence(128, kTol::kBranchInputs, 2024, false);
  const double t = sw.seconds();
  return verdict(worst < kTol::kBranchAbs && t < kTol::kBranchSeconds,
                 fmt("max |grouped - 32 branches| = %.3g over %d inputs (width 128) in %.2f s", worst,
                     kTol::kBranchInputs, t));
}

Outcome gradients() {
  Stopwatch sw;
  const auto items = checks::gradient_suite(99, kTol::kGradInstances);
  const double t = sw.seconds();
  bool ok = t < kTol::kGradSeconds;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& it : items) {
    ok = ok && it.instances >= kTol::kGradInstances && it.worst < kTol::kGradRel;
    if (it.worst >= worst) {
      worst = it.worst;
      worst_name = it.name;
    }
  }
  return verdict(ok, fmt("%zu layers/losses x %d instances, worst rel. error %.3g (%s) in %.1f s", items.size(),
                         kTol::kGradInstances, worst, worst_name.c_str(), t));
}

Outcome metric_oracles() {
  std::mt19937_64 rng(314);
  double worst_psnr = 0.0, worst_ssim = 0.0;
  bool identity = true;
  for (int i = 0; i < 50; ++i) {
    const std::size_t w = 11 + rng() % 40, h = 11 + rng() % 40;
    const auto a = oracle::random_plane(w, h, rng);
    auto b = a;
    std::normal_distribution<double> noise(0.0, 1.0 + static_cast<double>(rng() % 40));
    for (double& v : b.data) v = std::clamp(v + noise(rng), 0.0, 255.0);
    worst_psnr = std::max(worst_psnr, std::fabs(metrics::psnr(a, b) - oracle::psnr(a.data, b.data, 255.0)));
    worst_ssim = std::max(worst_ssim, std::fabs(metrics::ssim(a, b) - oracle::ssim(a.data, b.data, w, h, 255.0)));
    identity = identity && metrics::psnr(a, a) == metrics::kInfinitePsnr && metrics::ssim(a, a) == 1.0;
  }
  return verdict(worst_psnr < kTol::kPsnrAbsDb && worst_ssim < kTol::kSsimAbs && identity,
                 fmt("50 pairs: max PSNR diff %.3g dB, max SSIM diff %.3g, identity +inf/1.0 %s", worst_psnr,
                     worst_ssim, identity ? "exact" : "VIOLATED"));
}

Outcome desk_table() {
  const fs::path train_dir = support::data_root() / "T91_B200", set5 = support::data_root() / "Set5";
  if (!fs::is_directory(train_dir) || !fs::is_directory(set5))
    return {Verdict::Skip, "needs " + train_dir.string() + " and " + set5.string() + " (not present)"};
  Stopwatch sw;
  const fs::path dir = g_work / "desk";
  fs::create_directories(dir);
  const Settings model = {{"depth_middle", "18"}, {"block_width", "128"}, {"cardinality", "32"}, {"base_channels", "64"}};
  run_command(cli::cmd_prepare_data, {{"src", train_dir.string()},
                                      {"manifest", (dir / "patches_x2.txt").string()},
                                      {"scales", "2"},
                                      {"augment", "true"},
                                      {"seed", "1"}});
  Settings train = model;
  train.insert(train.end(), {{"manifest", (dir / "patches_x2.txt").string()},
                             {"out_dir", (dir / "run").string()},
                             {"max_patches", std::to_string(kTol::kDeskPatches)},
                             {"epochs", std::to_string(kTol::kDeskEpochs)},
                             {"batch_size", "64"},
                             {"seed", "1"},
                             {"verbose", "true"}});
  run_command(cli::cmd_train_sr, train);
  char ck[64];
  std::snprintf(ck, sizeof ck, "model_epoch_%03zu.srfg", kTol::kDeskEpochs);
  run_command(cli::cmd_eval_sr, {{"checkpoint", (dir / "run" / ck).string()},
                                 {"dataset", set5.string()},
                                 {"scale", "2"},
                                 {"out", (dir / "set5_x2.csv").string()}});
  Settings zero = model;
  zero.insert(zero.end(), {{"out", (dir / "zero.srfg").string()}, {"init", "zero"}});
  run_command(cli::cmd_init_model, zero);
  run_command(cli::cmd_eval_sr, {{"checkpoint", (dir / "zero.srfg").string()},
                                 {"dataset", set5.string()},
                                 {"scale", "2"},
                                 {"out", (dir / "set5_x2_zero.csv").string()}});
  const double t = sw.seconds();

  auto mean_row = [](const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("mean,", 0) == 0) break;
    std::vector<double> v;
    std::stringstream ss(line.substr(5));
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
    return v;
  };
  const auto trained = mean_row(dir / "set5_x2.csv");
  const auto zeroed = mean_row(dir / "set5_x2_zero.csv");
  const double gain = trained[0] - trained[2];
  const bool zero_exact = zeroed[0] == zeroed[2] && zeroed[1] == zeroed[3];
  return verdict(gain >= kTol::kDeskGainDb && zero_exact && t <= kTol::kDeskSeconds,
                 fmt("Set5 x2: model %.3f dB vs bicubic %.3f dB (gain %.3f); zero model == bicubic: %s; %.0f s",
                     trained[0], trained[2], gain, zero_exact ? "yes" : "no", t));
}

Outcome sr_anchor() {
  const fs::path src = support::data_root() / "T91_B200";
  if (!fs::is_directory(src)) return {Verdict::Skip, "needs the 291 training images in " + src.string() + " (not present)"};
  pipeline::DatasetOptions opt;
  opt.image_dir = src;
  const auto files = pipeline::list_images(src);
  const auto m = pipeline::make_sr_manifest(opt);
  pipeline::write_manifest(g_work / "anchor_manifest.txt", m);
  const double n = static_cast<double>(m.records.size());
  const double rel = std::fabs(n - kTol::kAnchorPatches) / kTol::kAnchorPatches;
  return verdict(files.size() == 291 && rel <= kTol::kAnchorRel,
                 fmt("%zu images -> %.0f patches (%.1f%% from 370,000)", files.size(), n, 100.0 * rel));
}

Outcome classifier() {
  if (!support::have_mnist()) return {Verdict::Skip, "MNIST IDX files not found under " + mnist_dir().string()};
  Stopwatch sw;
  const std::string out = run_command(cli::cmd_train_classifier, {{"mnist_dir", mnist_dir().string()},
                                                                  {"out", (g_work / "classifier.srfg").string()},
                                                                  {"log", (g_work / "classifier_loss.csv").string()},
                                                                  {"epochs", std::to_string(kTol::kClassifierEpochs)},
                                                                  {"batch_size", "128"},
                                                                  {"lr", "0.001"},
                                                                  {"seed", "1"}});
  const double t = sw.seconds();
  const double acc = std::stod(out.substr(out.find(',') + 1));
  return verdict(acc >= kTol::kClassifierAcc && t <= kTol::kClassifierSeconds,
                 fmt("test accuracy %.4f after %zu epochs on 60,000 images in %.0f s", acc,
                     kTol::kClassifierEpochs, t));
}

Outcome srcgan_gap() {
  if (!support::have_mnist()) return {Verdict::Skip, "MNIST IDX files not found under " + mnist_dir().string()};
  const fs::path dir = g_work / "gan_compare";
  const fs::path cls = dir / "classifier.srfg";
  if (!fs::exists(cls)) {
    run_command(cli::cmd_train_classifier, {{"mnist_dir", mnist_dir().string()},
                                            {"out", cls.string()},
                                            {"epochs", std::to_string(kTol::kClassifierEpochs)},
                                            {"seed", "1"}});
  }
  for (const char* conditioned : {"true", "false"}) {
    run_command(cli::cmd_train_srcgan, {{"mnist_dir", mnist_dir().string()},
                                        {"out_dir", dir.string()},
                                        {"epochs", std::to_string(kTol::kGanEpochs)},
                                        {"train_images", std::to_string(kTol::kGanImages)},
                                        {"conditioned", conditioned},
                                        {"seed", "1"},
                                        {"verbose", "true"}});
  }
  const std::string table = run_command(cli::cmd_eval_srcgan, {{"mnist_dir", mnist_dir().string()},
                                                               {"classifier", cls.string()},
                                                               {"srcgan", (dir / "srcgan.srfg").string()},
                                                               {"vanilla", (dir / "vanilla.srfg").string()},
                                                               {"grid", (dir / "samples.png").string()}});
  std::ofstream(dir / "accuracy.csv") << table;
  std::map<std::string, double> acc;
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) {
    const auto comma = line.find(',');
    if (line.rfind("model,", 0) == 0 || comma == std::string::npos) continue;
    acc[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  const double gap = acc["SRCGAN"] - acc["SR Vanilla GAN"];
  return verdict(gap >= kTol::kGanGapPoints,
                 fmt("SRCGAN %.2f%% vs vanilla %.2f%% (gap %.2f points; bicubic %.2f%%, ground truth %.2f%%)",
                     acc["SRCGAN"], acc["SR Vanilla GAN"], gap, acc["Bicubic"], acc["Ground truth"]));
}

// Lists every regular file below `root` with its bytes, keyed by relative path.
std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = support::read_bytes(e.path());
  return files;
}

Outcome determinism() {
  const fs::path dir = g_work / "determinism";
  fs::remove_all(dir);
  const fs::path images = dir / "images", mn = dir / "mnist";
  support::write_images(images, 3, 64, 56, 3);
  fs::create_directories(mn);
  pipeline::write_mnist(support::synthetic_mnist(400, 1), mn / "train-images-idx3-ubyte", mn / "train-labels-idx1-ubyte");
  pipeline::write_mnist(support::synthetic_mnist(100, 2), mn / "t10k-images-idx3-ubyte", mn / "t10k-labels-idx1-ubyte");

  const std::string cli = SRFORGE_CLI_PATH;
  int failures = 0;
  for (const char* run : {"run1", "run2"}) {
    const fs::path o = dir / run;
    fs::create_directories(o);
    const std::string common = " --threads 1 --seed 7";
    const std::string model = " --depth 3 --width 32 --cardinality 4 --base-channels 16";
    const std::vector<std::string> cmds = {
        "prepare-data --src " + images.string() + " --manifest " + (o / "patches.txt").string() +
            " --scales 2,3 --patch 21 --stride 21 --augment" + common,
        "train-sr --manifest " + (o / "patches.txt").string() + " --out-dir " + (o / "sr").string() + model +
            " --epochs 2 --batch-size 8 --max-patches 48 --lr 0.01 --val-dir " + images.string() + common,
        "eval-sr --checkpoint " + (o / "sr" / "model_epoch_002.srfg").string() + " --dataset " + images.string() +
            " --scale 2 --out " + (o / "eval.csv").string() + " --threads 1",
        "train-srcgan --mnist-dir " + mn.string() + " --out-dir " + (o / "gan").string() +
            " --epochs 1 --batch-size 64 --train-images 256" + common,
        "train-classifier --mnist-dir " + mn.string() + " --out " + (o / "classifier.srfg").string() + " --log " +
            (o / "classifier.csv").string() + " --epochs 1 --batch-size 64" + common,
    };
    for (const auto& c : cmds)
      if (shell(cli + " " + c + " > /dev/null 2>&1") != 0) {
        std::cerr << "command failed: " << c << '\n';
        ++failures;
      }
    // The manifest records its source root, which both runs share; nothing else is path dependent.
  }
  if (failures) return verdict(false, fmt("%d CLI commands failed", failures));
  const auto a = snapshot(dir / "run1"), b = snapshot(dir / "run2");
  std::size_t same = 0, csvs = 0, ckpts = 0;
  std::string differing;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it != b.end() && it->second == bytes) {
      ++same;
      csvs += fs::path(name).extension() == ".csv";
      ckpts += fs::path(name).extension() == ".srfg";
    } else {
      differing += name + " ";
    }
  }
  const bool ok = a.size() == b.size() && same == a.size() && csvs >= 4 && ckpts >= 5;
  return verdict(ok, fmt("%zu/%zu files byte-identical across two --threads 1 runs (%zu CSV, %zu checkpoints)%s%s",
                         same, a.size(), csvs, ckpts, differing.empty() ? "" : "; differ: ", differing.c_str()));
}

Outcome round_trip() {
  std::string detail;
  bool ok = true;
  {
    models::ModelConfig mc{.depth_middle = 18, .block_width = 128, .cardinality = 32};
    auto net = models::build_vdsr_resnext<float>(mc);
    nn::init_parameters(net, 11);
    const auto ckpt = io::sr_checkpoint(mc, net);
    const fs::path p = g_work / "round_trip.srfg", q = g_work / "round_trip_again.srfg";
    io::save_checkpoint(p, ckpt);
    const auto loaded = io::load_checkpoint(p);
    auto net2 = io::load_sr_model(loaded);
    io::save_checkpoint(q, io::sr_checkpoint(io::sr_config(loaded), net2));
    const bool same = support::read_bytes(p) == support::read_bytes(q) && loaded == ckpt;
    ok = ok && same;
    detail += fmt("checkpoint (%zu bytes) %s", support::read_bytes(p).size(), same ? "identical" : "DIFFERS");
  }
  if (!support::have_mnist()) return {ok ? Verdict::Skip : Verdict::Fail, detail + "; MNIST IDX files not present"};
  const fs::path d = mnist_dir();
  for (const char* part : {"train", "t10k"}) {
    const fs::path img = d / (std::string(part) + "-images-idx3-ubyte"), lab = d / (std::string(part) + "-labels-idx1-ubyte");
    const auto set = pipeline::load_mnist(img, lab);
    const fs::path img2 = g_work / (std::string(part) + "-images.idx"), lab2 = g_work / (std::string(part) + "-labels.idx");
    pipeline::write_mnist(set, img2, lab2);
    const bool same = support::read_bytes(img) == support::read_bytes(img2) && support::read_bytes(lab) == support::read_bytes(lab2);
    ok = ok && same;
    detail += fmt("; MNIST %s (%zu images) %s", part, set.size(), same ? "identical" : "DIFFERS");
    fs::remove(img2);
    fs::remove(lab2);
  }
  return verdict(ok, detail);
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"table_counts", "block parameter counts (no bias)", table_counts},
      {"branch_equivalence", "grouped block == explicit 32 branches", branch_equivalence},
      {"gradients", "analytic vs finite-difference gradients", gradients},
      {"metric_oracles", "PSNR/SSIM vs reference formulas", metric_oracles},
      {"desk_table", "desk-scale Set5 x2 gain over bicubic", desk_table},
      {"sr_anchor", "291-image patch count near 370k", sr_anchor},
      {"classifier", "MNIST classifier accuracy", classifier},
      {"srcgan_gap", "SRCGAN beats vanilla GAN on classifier accuracy", srcgan_gap},
      {"determinism", "byte-identical repeated CLI runs", determinism},
      {"round_trip", "checkpoint and MNIST IDX round trips", round_trip},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string only;
  std::string work = "acceptance_work";
  app.add_option("--only", only, "run a single criterion");
  app.add_option("--work-dir", work, "directory for logs and artifacts");
  CLI11_PARSE(app, argc, argv);
  g_work = work;
  fs::create_directories(g_work);

  int fails = 0, skips = 0, ran = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && c.name != only) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::Pass ? "[PASS]" : o.verdict == Verdict::Fail ? "[FAIL]" : "[SKIP]";
    std::cout << tag << ' ' << c.name << " - " << c.title << ": " << o.detail << std::endl;
    fails += o.verdict == Verdict::Fail;
    skips += o.verdict == Verdict::Skip;
  }
  if (ran == 0) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 2;
  }
  if (fails) return 1;
  if (!only.empty() && skips) return 77;
  return 0;
}
