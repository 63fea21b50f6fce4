// Command-line front end. Everything below goes through the public C API.
#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "srforge/srforge.h"

namespace {

struct OptionSpec {
  const char* flag;
  const char* key;
  const char* help;
};

struct Switch {
  const char* flag;
  const char* key;
  const char* value;
  const char* help;
};

using Runner = srf_status (*)(const srf_config*);

struct Command {
  const char* name;
  const char* help;
  Runner run;
  std::vector<OptionSpec> options;
  std::vector<Switch> switches;
};

const std::vector<OptionSpec> kModelShape = {
    {"--model", "model", "resnext or vdsr"},
    {"--depth", "depth_middle", "middle layers (multiple of 3 for resnext)"},
    {"--width", "block_width", "block width"},
    {"--cardinality", "cardinality", "branches per block"},
    {"--base-channels", "base_channels", "channels between blocks"},
    {"--kernel", "kernel", "kernel size"},
};

std::vector<OptionSpec> join(std::vector<OptionSpec> a, const std::vector<OptionSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Command> commands() {
  return {
      {"prepare-data",
       "Tile source images into a patch manifest",
       srf_prepare_data,
       {{"--src", "src", "source image directory"},
        {"--manifest", "manifest", "output manifest path"},
        {"--scales", "scales", "comma-separated scales"},
        {"--patch", "patch", "patch size"},
        {"--stride", "stride", "tile stride"},
        {"--seed", "seed", "shuffle seed"}},
       {{"--augment", "augment", "true", "add the eight flips/rotations"},
        {"--no-augment", "augment", "false", "one orientation only"}}},
      {"train-sr",
       "Train a super-resolution model on a manifest",
       srf_train_sr,
       join({{"--manifest", "manifest", "patch manifest"},
             {"--out-dir", "out_dir", "checkpoint directory"},
             {"--log", "log", "CSV log path"},
             {"--epochs", "epochs", "epochs"},
             {"--batch-size", "batch_size", "batch size"},
             {"--lr", "lr", "initial learning rate"},
             {"--clip-theta", "clip_theta", "gradient clip bound"},
             {"--clip-mode", "clip_mode", "none, fixed or adjustable"},
             {"--max-patches", "max_patches", "use only the first N manifest records"},
             {"--max-iters", "max_iters", "cap iterations per epoch"},
             {"--val-dir", "val_dir", "validation images for per-epoch PSNR"},
             {"--resume", "resume", "checkpoint to continue from"},
             {"--init", "init", "he or zero"},
             {"--seed", "seed", "seed"}},
            kModelShape),
       {{"--verbose", "verbose", "true", "print progress"}}},
      {"eval-sr",
       "Score a checkpoint against bicubic on an image set",
       srf_eval_sr,
       {{"--checkpoint", "checkpoint", "model checkpoint"},
        {"--dataset", "dataset", "ground-truth image directory"},
        {"--scale", "scale", "2, 3 or 4"},
        {"--shave", "shave", "border pixels ignored (default: scale)"},
        {"--out", "out", "CSV path (default: stdout)"}},
       {{"--quantize", "quantize", "true", "round Y to integers before scoring"}}},
      {"upscale",
       "Upscale one image",
       srf_upscale,
       {{"--checkpoint", "checkpoint", "model checkpoint"},
        {"--input", "input", "low-resolution PNG/PPM/PGM"},
        {"--output", "output", "output PNG"},
        {"--scale", "scale", "2, 3 or 4"},
        {"--compare", "compare", "ground truth; writes a bicubic | model | truth strip"},
        {"--compare-out", "compare_out", "path for the comparison strip"}},
       {}},
      {"count-params",
       "Parameter counts for grouped and unbranched blocks",
       srf_count_params,
       {{"--widths", "widths", "comma-separated block widths"},
        {"--cardinality", "cardinality", "branches per block"},
        {"--base-channels", "base_channels", "channels between blocks"},
        {"--depth", "depth_middle", "middle layers"},
        {"--kernel", "kernel", "kernel size"}},
       {}},
      {"init-model",
       "Write an untrained super-resolution checkpoint",
       srf_init_model,
       join({{"--out", "out", "checkpoint path"}, {"--init", "init", "he or zero"}, {"--seed", "seed", "seed"}},
            kModelShape),
       {}},
      {"train-srcgan",
       "Train the conditional (or vanilla) MNIST super-resolution GAN",
       srf_train_srcgan,
       {{"--mnist-dir", "mnist_dir", "directory with the IDX files"},
        {"--out-dir", "out_dir", "checkpoint directory"},
        {"--log", "log", "loss CSV path"},
        {"--name", "name", "checkpoint file stem"},
        {"--epochs", "epochs", "epochs"},
        {"--batch-size", "batch_size", "batch size"},
        {"--lr", "lr", "generator Adam learning rate"},
        {"--d-lr", "d_lr", "discriminator Adam learning rate"},
        {"--train-images", "train_images", "use the first N training images"},
        {"--seed", "seed", "seed"}},
       {{"--no-condition", "conditioned", "false", "vanilla GAN: no label input"},
        {"--saturating", "saturating", "true", "literal log(1 - D(G)) generator loss"},
        {"--verbose", "verbose", "true", "print progress"}}},
      {"eval-srcgan",
       "Classifier accuracy on generated digits",
       srf_eval_srcgan,
       {{"--mnist-dir", "mnist_dir", "directory with the IDX files"},
        {"--classifier", "classifier", "classifier checkpoint"},
        {"--srcgan", "srcgan", "conditional GAN checkpoint"},
        {"--vanilla", "vanilla", "vanilla GAN checkpoint"},
        {"--test-images", "test_images", "use the first N test images"},
        {"--grid", "grid", "PNG sample grid path"},
        {"--grid-count", "grid_count", "digits per grid row"}},
       {}},
      {"train-classifier",
       "Train the MNIST digit classifier",
       srf_train_classifier,
       {{"--mnist-dir", "mnist_dir", "directory with the IDX files"},
        {"--out", "out", "checkpoint path"},
        {"--log", "log", "per-epoch loss CSV"},
        {"--epochs", "epochs", "epochs"},
        {"--batch-size", "batch_size", "batch size"},
        {"--lr", "lr", "generator Adam learning rate"},
        {"--d-lr", "d_lr", "discriminator Adam learning rate"},
        {"--train-images", "train_images", "use the first N training images"},
        {"--seed", "seed", "seed"}},
       {{"--verbose", "verbose", "true", "print progress"}}},
  };
}

struct Bound {
  const Command* command;
  std::map<std::string, std::string> values;  // keyed by option flag
  std::map<std::string, bool> switched;
  std::string config_file;
  std::vector<std::string> sets;
  std::string threads;
  std::string data_dir;
};

int fail_with(srf_status s, const std::string& context) {
  std::fprintf(stderr, "srforge: %s%s\n", context.c_str(), srf_last_error());
  return static_cast<int>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Super-resolution training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(srf_version()));

  const auto cmds = commands();
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& c : cmds) {
    auto b = std::make_unique<Bound>();
    b->command = &c;
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", b->config_file, "key = value settings file")->check(CLI::ExistingFile);
    sub->add_option("--set", b->sets, "override one setting: key=value (repeatable)");
    sub->add_option("--threads", b->threads, "worker threads; 1 gives fully deterministic runs");
    sub->add_option("--data-dir", b->data_dir, "data root (default: $SRFORGE_DATA_DIR)");
    for (const auto& o : c.options) sub->add_option(o.flag, b->values[o.flag], o.help);
    for (const auto& s : c.switches) sub->add_flag(s.flag, b->switched[s.flag], s.help);
    bound.push_back(std::move(b));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : SRF_USAGE;
  }

  for (std::size_t i = 0; i < cmds.size(); ++i) {
    CLI::App* sub = app.get_subcommand(cmds[i].name);
    if (!sub->parsed()) continue;
    const Bound& b = *bound[i];

    srf_config* raw = nullptr;
    if (const srf_status s = srf_config_create(&raw); s != SRF_OK) return fail_with(s, "");
    std::unique_ptr<srf_config, void (*)(srf_config*)> cfg(raw, srf_config_destroy);

    auto set = [&](const std::string& key, const std::string& value) {
      return srf_config_set(cfg.get(), key.c_str(), value.c_str());
    };
    if (!b.config_file.empty()) {
      if (const srf_status s = srf_config_load(cfg.get(), b.config_file.c_str()); s != SRF_OK) return fail_with(s, "");
    }
    // Flags override the file: generic --set first, then dedicated flags.
    for (const auto& kv : b.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "srforge: --set expects key=value, got '%s'\n", kv.c_str());
        return SRF_USAGE;
      }
      if (const srf_status s = set(kv.substr(0, eq), kv.substr(eq + 1)); s != SRF_OK) return fail_with(s, "");
    }
    if (!b.threads.empty()) set("threads", b.threads);
    if (!b.data_dir.empty()) set("data_dir", b.data_dir);
    for (const auto& o : cmds[i].options) {
      if (sub->get_option(o.flag)->count() == 0) continue;
      if (const srf_status s = set(o.key, b.values.at(o.flag)); s != SRF_OK) return fail_with(s, "");
    }
    for (const auto& sw : cmds[i].switches) {
      if (b.switched.at(sw.flag)) set(sw.key, sw.value);
    }

    const srf_status s = cmds[i].run(cfg.get());
    if (s != SRF_OK) return fail_with(s, std::string(cmds[i].name) + ": ");
    return 0;
  }
  return SRF_USAGE;
}
