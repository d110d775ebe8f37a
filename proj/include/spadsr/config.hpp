#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace spadsr {

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::string_view s);

// Line-oriented configuration: `[section]` headers, `key = value` lines,
// `#` comments, blank lines ignored. Keys flatten to "section.key"
// ("key" alone before any section header). Later values win, so callers
// apply command-line overrides by calling set() after loading.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& dotted_key, const std::string& value);
  bool has(const std::string& dotted_key) const;

  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Sorted "key=value" lines; the input to hash().
  std::string canonical() const;
  /// Hex digest of the canonical form, for CSV provenance comments.
  std::string hash() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace spadsr
