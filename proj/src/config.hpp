#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace srforge::cli {

/// Plain-text `key = value` settings. Blank lines and lines starting with '#'
/// are ignored. Keys outside the known set are rejected on entry, so a typo in
/// a config file fails loudly instead of silently falling back to a default.
class RunConfig {
 public:
  /// Every key any command accepts.
  static const std::vector<std::string>& known_keys();
  static bool is_known(const std::string& key);

  /// Merges a file; later entries (and later set() calls) win.
  void load_file(const std::filesystem::path& path);
  void parse(const std::string& text, const std::string& origin = "<text>");
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& key, const std::string& fallback) const;
  std::optional<std::string> maybe(const std::string& key) const;
  std::string required(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<int> int_list(const std::string& key, const std::vector<int>& fallback) const;

  /// The data root: `data_dir` if set, else $SRFORGE_DATA_DIR, else "data".
  std::filesystem::path data_root() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace srforge::cli
