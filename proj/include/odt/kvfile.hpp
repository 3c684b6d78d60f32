#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace odt {

/// Flat `key = value` text with dotted section prefixes. `#` starts a comment.
///
/// Every getter marks the key as consumed so callers can reject typos via
/// unused_keys() once a configuration has been fully read.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, std::string value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       const std::vector<std::string>& fallback) const;

  /// Copy of the entries under `prefix.` with the prefix stripped. Keys read
  /// from the copy count as consumed here only after absorb().
  KeyValueFile section(const std::string& prefix) const;
  void absorb(const KeyValueFile& section, const std::string& prefix) const;
  void mark_used(const std::string& key) const { used_.insert(key); }

  std::vector<std::string> unused_keys() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string origin() const { return origin_; }

  /// Canonical text: sorted `key = value` lines.
  std::string to_string() const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  std::string origin_ = "<string>";
  mutable std::set<std::string> used_;
};

std::vector<std::string> split(const std::string& text, char delim);
std::string trim(const std::string& text);
double parse_double(const std::string& text, const std::string& what);

}  // namespace odt
