#include "vedge/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vedge {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string located(const std::string& msg, int line) {
  return line > 0 ? "line " + std::to_string(line) + ": " + msg : msg;
}

std::string strip_comment(std::string_view line) {
  // '#' inside a quoted value is kept.
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find(',', start);
    if (pos == std::string_view::npos) pos = s.size();
    auto tok = trim(s.substr(start, pos - start));
    if (!tok.empty()) out.push_back(tok);
    start = pos + 1;
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(const std::string& what, int line)
    : std::runtime_error(located(what, line)), line_(line) {}

double parse_number(std::string_view token, int line) {
  token = trim(token);
  if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || token.empty() || std::isnan(value)) {
    throw ConfigError("expected a number, got '" + std::string(token) + "'", line);
  }
  return value;
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_numbers(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_number(values[i]);
  }
  return out;
}

void ConfigSection::add(ConfigEntry entry) {
  if (has(entry.key)) {
    throw ConfigError("duplicate key '" + entry.key + "' in [" + name_ + "]", entry.line);
  }
  entries_.push_back(std::move(entry));
}

const ConfigEntry* ConfigSection::find(std::string_view key) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const ConfigEntry& e) { return e.key == key; });
  return it == entries_.end() ? nullptr : &*it;
}

std::string ConfigSection::text(std::string_view key, std::string_view fallback) const {
  const auto* e = find(key);
  return e ? e->value : std::string(fallback);
}

double ConfigSection::number(std::string_view key, double fallback) const {
  const auto* e = find(key);
  return e ? parse_number(e->value, e->line) : fallback;
}

double ConfigSection::number(std::string_view key) const {
  const auto* e = find(key);
  if (!e) throw ConfigError("missing key '" + std::string(key) + "' in [" + name_ + "]", line_);
  return parse_number(e->value, e->line);
}

long ConfigSection::integer(std::string_view key, long fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  long value = 0;
  auto v = trim(e->value);
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("expected an integer for '" + e->key + "', got '" + e->value + "'", e->line);
  }
  return value;
}

bool ConfigSection::boolean(std::string_view key, bool fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  if (e->value == "true") return true;
  if (e->value == "false") return false;
  throw ConfigError("expected true/false for '" + e->key + "'", e->line);
}

std::vector<double> ConfigSection::numbers(std::string_view key) const {
  std::vector<double> out;
  const auto* e = find(key);
  if (!e) return out;
  for (auto tok : split_commas(e->value)) out.push_back(parse_number(tok, e->line));
  return out;
}

std::vector<std::string> ConfigSection::tokens(std::string_view key) const {
  std::vector<std::string> out;
  const auto* e = find(key);
  if (!e) return out;
  for (auto tok : split_commas(e->value)) out.emplace_back(tok);
  return out;
}

void ConfigSection::expect_only(std::initializer_list<std::string_view> allowed) const {
  for (const auto& e : entries_) {
    if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end()) {
      throw ConfigError("unknown key '" + e.key + "' in [" + name_ + "]", e.line);
    }
  }
}

ConfigDocument ConfigDocument::parse(std::string_view text) {
  ConfigDocument doc;
  doc.sections_.emplace_back("", 0);
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto stripped = strip_comment(raw);
    auto line = trim(stripped);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError("empty section name", line_no);
      if (doc.section(name)) {
        throw ConfigError("duplicate section [" + std::string(name) + "]", line_no);
      }
      doc.sections_.emplace_back(std::string(name), line_no);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') {
        throw ConfigError("unterminated string", line_no);
      }
      value = value.substr(1, value.size() - 2);
    }
    doc.sections_.back().add({std::string(key), std::string(value), line_no});
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const ConfigSection* ConfigDocument::section(std::string_view name) const {
  for (const auto& s : sections_) {
    if (s.name() == name) return &s;
  }
  return nullptr;
}

const ConfigSection& ConfigDocument::section_or_empty(std::string_view name) const {
  static const ConfigSection empty("", 0);
  const auto* s = section(name);
  return s ? *s : empty;
}

ConfigWriter& ConfigWriter::comment(std::string_view text) {
  os_ << "# " << text << '\n';
  return *this;
}

ConfigWriter& ConfigWriter::section(std::string_view name) {
  os_ << (first_section_ ? "" : "\n") << '[' << name << "]\n";
  first_section_ = false;
  return *this;
}

ConfigWriter& ConfigWriter::put(std::string_view key, std::string_view value) {
  os_ << key << " = " << value << '\n';
  return *this;
}

ConfigWriter& ConfigWriter::put(std::string_view key, double value) {
  return put(key, format_number(value));
}

ConfigWriter& ConfigWriter::put(std::string_view key, const std::vector<double>& values) {
  return put(key, format_numbers(values));
}

ConfigWriter& ConfigWriter::put_bool(std::string_view key, bool value) {
  return put(key, value ? "true" : "false");
}

}  // namespace vedge
