#ifndef VEDGE_CONFIG_HPP_
#define VEDGE_CONFIG_HPP_

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vedge {

// Raised for malformed or invalid configuration. `line` is 0 when the
// problem is not tied to a particular line of input.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

// One `[name]` block of a config document. Getters throw ConfigError with
// the offending line when a value does not parse.
class ConfigSection {
 public:
  ConfigSection(std::string name, int line) : name_(std::move(name)), line_(line) {}

  const std::string& name() const noexcept { return name_; }
  int line() const noexcept { return line_; }
  const std::vector<ConfigEntry>& entries() const noexcept { return entries_; }

  void add(ConfigEntry entry);
  const ConfigEntry* find(std::string_view key) const;
  bool has(std::string_view key) const { return find(key) != nullptr; }

  std::string text(std::string_view key, std::string_view fallback) const;
  double number(std::string_view key, double fallback) const;
  double number(std::string_view key) const;
  long integer(std::string_view key, long fallback) const;
  bool boolean(std::string_view key, bool fallback) const;
  // Comma separated list of numbers; empty when the key is absent.
  std::vector<double> numbers(std::string_view key) const;
  // Comma separated list of raw tokens with surrounding blanks trimmed.
  std::vector<std::string> tokens(std::string_view key) const;

  // Rejects keys outside `allowed`; catches typos in hand-written files.
  void expect_only(std::initializer_list<std::string_view> allowed) const;

 private:
  std::string name_;
  int line_;
  std::vector<ConfigEntry> entries_;
};

// INI/TOML-style document: `[section]` headers, `key = value` lines, `#`
// comments. Values may be double-quoted. Keys before the first header live
// in a section with an empty name.
class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text);
  static ConfigDocument load(const std::filesystem::path& path);

  const ConfigSection* section(std::string_view name) const;
  // Returns an empty section when `name` is absent.
  const ConfigSection& section_or_empty(std::string_view name) const;
  const std::vector<ConfigSection>& sections() const noexcept { return sections_; }

 private:
  std::vector<ConfigSection> sections_;
};

double parse_number(std::string_view token, int line);

// Round-trip exact formatting (shortest representation that parses back to
// the same double).
std::string format_number(double value);
std::string format_numbers(const std::vector<double>& values);

// Writes `key = value` lines; used by scenario materialization.
class ConfigWriter {
 public:
  explicit ConfigWriter(std::ostream& os) : os_(os) {}
  ConfigWriter& comment(std::string_view text);
  ConfigWriter& section(std::string_view name);
  ConfigWriter& put(std::string_view key, std::string_view value);
  ConfigWriter& put(std::string_view key, double value);
  ConfigWriter& put(std::string_view key, const std::vector<double>& values);
  ConfigWriter& put_bool(std::string_view key, bool value);

 private:
  std::ostream& os_;
  bool first_section_ = true;
};

}  // namespace vedge

#endif  // VEDGE_CONFIG_HPP_
