#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace srforge::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      // shared
      "data_dir", "seed", "threads", "out_dir", "log", "verbose",
      // prepare-data
      "src", "manifest", "scales", "patch", "stride", "augment",
      // model shape
      "model", "depth_middle", "block_width", "cardinality", "base_channels", "kernel", "bias", "init",
      // train-sr
      "epochs", "batch_size", "lr", "lr_decay_factor", "lr_decay_epochs", "momentum", "weight_decay", "clip_mode",
      "clip_theta", "max_patches", "max_iters", "val_dir", "val_scale", "resume",
      // eval-sr / upscale
      "checkpoint", "dataset", "scale", "shave", "quantize", "out", "input", "output", "compare", "compare_out",
      // count-params
      "widths",
      // srcgan / classifier
      "mnist_dir", "train_images", "test_images", "conditioned", "saturating", "d_lr", "beta1", "beta2", "leaky_slope",
      "real_label", "instance_noise", "g_width", "g_width_out", "d_width1", "d_width2", "name", "srcgan", "vanilla",
      "classifier", "grid", "grid_count"};
  return keys;
}

bool RunConfig::is_known(const std::string& key) {
  const auto& k = known_keys();
  return std::find(k.begin(), k.end(), key) != k.end();
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  parse(ss.str(), path.string());
}

void RunConfig::parse(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::Usage, origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    try {
      set(key, trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!is_known(key)) fail(ErrorCode::Usage, "unknown config key '" + key + "'");
  values_[key] = value;
}

std::optional<std::string> RunConfig::maybe(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::str(const std::string& key, const std::string& fallback) const {
  return maybe(key).value_or(fallback);
}

std::string RunConfig::required(const std::string& key) const {
  const auto v = maybe(key);
  if (!v || v->empty()) fail(ErrorCode::Usage, "missing required setting '" + key + "'");
  return *v;
}

double RunConfig::number(const std::string& key, double fallback) const {
  const auto v = maybe(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size())
    fail(ErrorCode::Usage, "setting '" + key + "' expects a number, got '" + *v + "'");
  return out;
}

std::uint64_t RunConfig::count(const std::string& key, std::uint64_t fallback) const {
  const auto v = maybe(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size())
    fail(ErrorCode::Usage, "setting '" + key + "' expects a non-negative integer, got '" + *v + "'");
  return out;
}

bool RunConfig::flag(const std::string& key, bool fallback) const {
  const auto v = maybe(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
  if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
  fail(ErrorCode::Usage, "setting '" + key + "' expects true/false, got '" + *v + "'");
}

std::vector<int> RunConfig::int_list(const std::string& key, const std::vector<int>& fallback) const {
  const auto v = maybe(key);
  if (!v) return fallback;
  std::vector<int> out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    int x = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || ec != std::errc() || p != item.data() + item.size())
      fail(ErrorCode::Usage, "setting '" + key + "' expects a comma-separated integer list, got '" + *v + "'");
    out.push_back(x);
  }
  if (out.empty()) fail(ErrorCode::Usage, "setting '" + key + "' is empty");
  return out;
}

std::filesystem::path RunConfig::data_root() const {
  if (const auto v = maybe("data_dir")) return *v;
  if (const char* env = std::getenv("SRFORGE_DATA_DIR"); env && *env) return env;
  return "data";
}

}  // namespace srforge::cli
