#include <doctest.h>

#include <fstream>
#include <sstream>

#include "checkpoint.hpp"
#include "commands.hpp"
#include "dataset.hpp"
#include "image.hpp"
#include "support.hpp"

using namespace srforge;
using srforge::cli::RunConfig;
namespace fs = std::filesystem;

namespace {

using Command = void (*)(const RunConfig&, std::ostream&, std::ostream&);

std::string run(Command cmd, const std::vector<std::pair<std::string, std::string>>& settings) {
  RunConfig cfg;
  for (const auto& [k, v] : settings) cfg.set(k, v);
  std::ostringstream out, log;
  cmd(cfg, out, log);
  return out.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

const std::vector<std::pair<std::string, std::string>> kSmallModel = {
    {"depth_middle", "3"}, {"block_width", "32"}, {"cardinality", "4"}, {"base_channels", "16"}};

std::vector<std::pair<std::string, std::string>> with(std::vector<std::pair<std::string, std::string>> a,
                                                      const std::vector<std::pair<std::string, std::string>>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

struct SrFixture {
  support::TempDir tmp{"cmd"};
  fs::path images = tmp / "images";
  fs::path manifest = tmp / "patches.txt";

  SrFixture() {
    support::write_images(images, 2, 64, 64, 3);
    run(cli::cmd_prepare_data, {{"src", images.string()},
                                {"manifest", manifest.string()},
                                {"scales", "2,3"},
                                {"patch", "21"},
                                {"stride", "21"},
                                {"augment", "true"}});
  }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("prepare-data reports and writes the manifest") {
  SrFixture fx;
  const auto m = pipeline::read_manifest(fx.manifest);
  // 64x64: scale 2 gives 3x3 tiles, scale 3 crops to 63 giving 3x3 tiles.
  CHECK(m.records.size() == 2 * (9 + 9) * 8);
  CHECK(code_of([&] { run(cli::cmd_prepare_data, {{"src", (fx.tmp / "none").string()}, {"manifest", "x"}}); }) ==
        ErrorCode::Io);
}

TEST_CASE("a small model overfits a handful of patches") {
  SrFixture fx;
  const fs::path out = fx.tmp / "run";
  run(cli::cmd_train_sr, with(kSmallModel, {{"manifest", fx.manifest.string()},
                                            {"out_dir", out.string()},
                                            {"max_patches", "8"},
                                            {"batch_size", "8"},
                                            {"epochs", "500"},
                                            {"lr", "0.05"},
                                            {"lr_decay_epochs", "1000"},
                                            {"clip_mode", "adjustable"},
                                            {"weight_decay", "0"}}));
  const auto rows = read_csv(out / "train_log.csv");
  REQUIRE(rows.size() == 501);
  const double first = std::stod(rows[1][2]), last = std::stod(rows.back()[2]);
  INFO("first " << first << " last " << last);
  CHECK(last <= 0.1 * first);
  CHECK(fs::exists(out / "model_epoch_000.srfg"));
  CHECK(fs::exists(out / "model_epoch_500.srfg"));
}

TEST_CASE("learning rate column follows the staircase") {
  SrFixture fx;
  const fs::path out = fx.tmp / "run";
  run(cli::cmd_train_sr, with(kSmallModel, {{"manifest", fx.manifest.string()},
                                            {"out_dir", out.string()},
                                            {"max_patches", "4"},
                                            {"batch_size", "4"},
                                            {"epochs", "5"},
                                            {"lr", "0.01"},
                                            {"lr_decay_epochs", "2"}}));
  const auto rows = read_csv(out / "train_log.csv");
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == std::vector<std::string>{"epoch", "iter", "loss", "lr", "set5_psnr"});
  const double want[] = {0.01, 0.01, 0.001, 0.001, 0.0001};
  for (int e = 0; e < 5; ++e) CHECK(std::stod(rows[e + 1][3]) == doctest::Approx(want[e]));
}

TEST_CASE("resuming from an epoch checkpoint reproduces an uninterrupted run") {
  SrFixture fx;
  const auto common = with(kSmallModel, {{"manifest", fx.manifest.string()},
                                         {"max_patches", "24"},
                                         {"batch_size", "8"},
                                         {"lr", "0.01"},
                                         {"val_dir", fx.images.string()}});
  run(cli::cmd_train_sr, with(common, {{"out_dir", (fx.tmp / "full").string()}, {"epochs", "3"}}));
  run(cli::cmd_train_sr, with(common, {{"out_dir", (fx.tmp / "part").string()}, {"epochs", "1"}}));
  run(cli::cmd_train_sr, with(common, {{"out_dir", (fx.tmp / "part").string()},
                                       {"epochs", "3"},
                                       {"resume", (fx.tmp / "part" / "model_epoch_001.srfg").string()}}));
  for (const char* f : {"model_epoch_002.srfg", "model_epoch_003.srfg", "train_log.csv"})
    CHECK(support::read_bytes(fx.tmp / "full" / f) == support::read_bytes(fx.tmp / "part" / f));
  const auto rows = read_csv(fx.tmp / "full" / "train_log.csv");
  REQUIRE(rows.size() == 10);
  CHECK(rows[3][4].empty() == false);  // validation PSNR on each epoch's last iteration
  CHECK(rows[1][4].empty());
}

TEST_CASE("divergence stops with a numeric error and keeps the last good state") {
  SrFixture fx;
  const fs::path out = fx.tmp / "boom";
  const auto code = code_of([&] {
    run(cli::cmd_train_sr, with(kSmallModel, {{"manifest", fx.manifest.string()},
                                              {"out_dir", out.string()},
                                              {"max_patches", "8"},
                                              {"batch_size", "8"},
                                              {"epochs", "50"},
                                              {"lr", "1e12"},
                                              {"clip_mode", "none"}}));
  });
  CHECK(code == ErrorCode::Numeric);
  REQUIRE(fs::exists(out / "last_good.srfg"));
  const auto ckpt = io::load_checkpoint(out / "last_good.srfg");
  for (const auto& r : ckpt.records)
    for (float v : r.data) REQUIRE(std::isfinite(v));
}

TEST_CASE("an all-zero checkpoint evaluates exactly as bicubic") {
  SrFixture fx;
  const fs::path ckpt = fx.tmp / "zero.srfg";
  run(cli::cmd_init_model, with(kSmallModel, {{"out", ckpt.string()}, {"init", "zero"}}));
  run(cli::cmd_eval_sr, {{"checkpoint", ckpt.string()}, {"dataset", fx.images.string()}, {"scale", "3"},
                         {"out", (fx.tmp / "eval.csv").string()}});
  const auto rows = read_csv(fx.tmp / "eval.csv");
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][1] == rows[i][3]);
    CHECK(rows[i][2] == rows[i][4]);
  }
  const std::string printed = run(cli::cmd_eval_sr, {{"checkpoint", ckpt.string()}, {"dataset", fx.images.string()}});
  CHECK(printed.find("mean,") != std::string::npos);
}

TEST_CASE("upscale writes the enlarged image and the comparison strip") {
  SrFixture fx;
  const fs::path ckpt = fx.tmp / "m.srfg";
  run(cli::cmd_init_model, with(kSmallModel, {{"out", ckpt.string()}}));
  pipeline::write_png(fx.tmp / "lr.png", support::synthetic_image(20, 15, 3, 1));
  pipeline::write_png(fx.tmp / "hr.png", support::synthetic_image(60, 45, 3, 1));
  run(cli::cmd_upscale, {{"checkpoint", ckpt.string()},
                         {"input", (fx.tmp / "lr.png").string()},
                         {"output", (fx.tmp / "up.png").string()},
                         {"scale", "3"},
                         {"compare", (fx.tmp / "hr.png").string()}});
  const auto up = pipeline::read_image(fx.tmp / "up.png");
  CHECK(up.width == 60);
  CHECK(up.height == 45);
  CHECK(up.channels == 3);
  const auto strip = pipeline::read_image(fx.tmp / "up_compare.png");
  CHECK(strip.width == 3 * 60 + 2 * 4);
  CHECK(strip.height == 45);

  pipeline::write_png(fx.tmp / "g.png", support::synthetic_image(10, 10, 1, 2));
  run(cli::cmd_upscale, {{"checkpoint", ckpt.string()},
                         {"input", (fx.tmp / "g.png").string()},
                         {"output", (fx.tmp / "g_up.png").string()}});
  CHECK(pipeline::read_image(fx.tmp / "g_up.png").channels == 1);
  CHECK(code_of([&] {
          run(cli::cmd_upscale, {{"checkpoint", ckpt.string()},
                                 {"input", (fx.tmp / "g.png").string()},
                                 {"output", (fx.tmp / "x.png").string()},
                                 {"scale", "5"}});
        }) == ErrorCode::Usage);
}

TEST_CASE("count-params prints the table") {
  const std::string csv = run(cli::cmd_count_params, {{"widths", "64,128,256"}});
  CHECK(csv.find("64,32,no,74880,110592,6,450432,664704\n") != std::string::npos);
  CHECK(csv.find("128,32,no,152064,294912,") != std::string::npos);
  CHECK(csv.find("256,32,no,313344,884736,") != std::string::npos);
}

TEST_CASE("GAN and classifier commands on synthetic digits") {
  support::TempDir tmp("gancmd");
  const fs::path mn = tmp / "mnist";
  fs::create_directories(mn);
  pipeline::write_mnist(support::synthetic_mnist(200, 1), mn / "train-images-idx3-ubyte", mn / "train-labels-idx1-ubyte");
  pipeline::write_mnist(support::synthetic_mnist(60, 2), mn / "t10k-images-idx3-ubyte", mn / "t10k-labels-idx1-ubyte");
  const std::vector<std::pair<std::string, std::string>> common = {
      {"mnist_dir", mn.string()}, {"out_dir", (tmp / "out").string()}, {"epochs", "2"}, {"batch_size", "32"},
      {"train_images", "100"}};
  run(cli::cmd_train_srcgan, common);
  run(cli::cmd_train_srcgan, with(common, {{"conditioned", "false"}}));
  const auto rows = read_csv(tmp / "out" / "srcgan_loss.csv");
  REQUIRE(rows.size() == 1 + 2 * 3);
  CHECK(rows[0] == std::vector<std::string>{"iteration", "d_loss", "g_loss"});
  CHECK(rows.back()[0] == "6");
  CHECK(fs::exists(tmp / "out" / "vanilla.srfg"));
  CHECK(fs::exists(tmp / "out" / "srcgan_epoch_002.srfg"));

  const std::string acc = run(cli::cmd_train_classifier, {{"mnist_dir", mn.string()},
                                                          {"out", (tmp / "cls.srfg").string()},
                                                          {"epochs", "2"},
                                                          {"batch_size", "32"}});
  CHECK(acc.rfind("test_accuracy,", 0) == 0);

  const std::string table = run(cli::cmd_eval_srcgan, {{"mnist_dir", mn.string()},
                                                       {"classifier", (tmp / "cls.srfg").string()},
                                                       {"srcgan", (tmp / "out" / "srcgan.srfg").string()},
                                                       {"vanilla", (tmp / "out" / "vanilla.srfg").string()},
                                                       {"grid", (tmp / "grid.png").string()},
                                                       {"grid_count", "5"}});
  std::istringstream lines(table);
  std::vector<std::string> names;
  for (std::string line; std::getline(lines, line);) names.push_back(line.substr(0, line.find(',')));
  CHECK(names == std::vector<std::string>{"model", "SRCGAN", "SR Vanilla GAN", "Bicubic", "Ground truth"});
  const auto grid = pipeline::read_image(tmp / "grid.png");
  CHECK(grid.height == 4 * 28 + 3 * 2);
  CHECK(grid.width == 5 * 28 + 4 * 2);

  CHECK(code_of([&] { run(cli::cmd_train_srcgan, with(common, {{"mnist_dir", (tmp / "nope").string()}})); }) ==
        ErrorCode::Io);
}
