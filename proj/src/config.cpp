#include "gva/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "gva/errors.hpp"
#include "gva/io.hpp"

namespace gva {

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

bool bare_char(char c) { return ident_char(c) || c == '.' || c == '/' || c == '+'; }

bool valid_ident(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), ident_char);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

int bracket_depth(const std::string& s) {
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (quoted) continue;
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
  }
  return depth;
}

std::optional<ConfigValue> parse_number(const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  const char first = tok[0];
  if (!(std::isdigit(static_cast<unsigned char>(first)) || first == '-' || first == '+' || first == '.'))
    return std::nullopt;
  std::size_t i = (first == '-' || first == '+') ? 1 : 0;
  bool integral = i < tok.size();
  for (std::size_t k = i; k < tok.size(); ++k)
    if (!std::isdigit(static_cast<unsigned char>(tok[k]))) integral = false;
  if (integral) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (errno == 0 && end == tok.c_str() + tok.size()) return ConfigValue{static_cast<std::int64_t>(v)};
  }
  char* end = nullptr;
  const double d = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) return std::nullopt;
  return ConfigValue{d};
}

class ValueParser {
 public:
  ValueParser(const std::string& text, std::size_t line) : s_(text), line_(line) {}

  ConfigValue parse() {
    ConfigValue v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing text '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  ConfigValue value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '[') return list();
    if (c == '"') return quoted();
    std::size_t start = pos_;
    while (pos_ < s_.size() && bare_char(s_[pos_])) ++pos_;
    const std::string tok = s_.substr(start, pos_ - start);
    if (tok.empty()) fail(std::string("unexpected character '") + c + "'");
    if (tok == "true") return ConfigValue{true};
    if (tok == "false") return ConfigValue{false};
    if (auto num = parse_number(tok)) return *num;
    return ConfigValue{tok};
  }

  ConfigValue list() {
    ++pos_;
    ConfigValue::List items;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return ConfigValue{items};
    }
    while (true) {
      items.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return ConfigValue{items};
      }
      fail("expected ',' or ']' in array");
    }
  }

  ConfigValue quoted() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out += s_[pos_++];
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return ConfigValue{out};
  }

  const std::string& s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::string format_value(const ConfigValue& value) {
  struct Visitor {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      std::string s = format_real(d);
      if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
      return s;
    }
    std::string operator()(const std::string& s) const {
      const bool bare = !s.empty() && std::all_of(s.begin(), s.end(), bare_char) && s != "true" &&
                        s != "false" && !parse_number(s);
      if (bare) return s;
      std::string out = "\"";
      for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      return out + "\"";
    }
    std::string operator()(const ConfigValue::List& l) const {
      std::string out = "[";
      for (std::size_t i = 0; i < l.size(); ++i) {
        if (i) out += ", ";
        out += format_value(l[i]);
      }
      return out + "]";
    }
  };
  return std::visit(Visitor{}, value.v);
}

std::optional<double> as_real(const ConfigValue& v) {
  if (auto* i = std::get_if<std::int64_t>(&v.v)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&v.v)) return *d;
  return std::nullopt;
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw ConfigError("key '" + key + "': expected " + expected);
}

ConfigValue real_list(const std::vector<double>& v) {
  ConfigValue::List l;
  for (double x : v) l.push_back(ConfigValue{x});
  return ConfigValue{l};
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::size_t start_line = lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_ident(section))
        throw ConfigError("line " + std::to_string(lineno) + ": invalid section name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    while (bracket_depth(value) > 0 && std::getline(in, raw)) {
      ++lineno;
      value += " " + trim(strip_comment(raw));
    }
    if (bracket_depth(value) != 0)
      throw ConfigError("line " + std::to_string(start_line) + ": unbalanced brackets");
    if (!valid_ident(key)) throw ConfigError("line " + std::to_string(start_line) + ": invalid key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (c.has(full)) throw ConfigError("line " + std::to_string(start_line) + ": duplicate key '" + full + "'");
    c.entries_.emplace_back(full, ValueParser(value, start_line).parse());
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  try {
    return parse(read_text(path));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string Config::serialize() const {
  std::vector<std::string> sections{""};
  for (const auto& [key, _] : entries_) {
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    if (std::find(sections.begin(), sections.end(), sec) == sections.end()) sections.push_back(sec);
  }
  std::string out;
  for (const auto& sec : sections) {
    bool header = false;
    for (const auto& [key, value] : entries_) {
      const auto dot = key.find('.');
      const std::string ks = dot == std::string::npos ? "" : key.substr(0, dot);
      if (ks != sec) continue;
      if (!sec.empty() && !header) {
        out += (out.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
        header = true;
      }
      out += (dot == std::string::npos ? key : key.substr(dot + 1)) + " = " + format_value(value) + "\n";
    }
  }
  return out;
}

const ConfigValue* Config::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

void Config::set(const std::string& key, ConfigValue value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  entries_.emplace_back(key, std::move(value));
}

const ConfigValue* Config::touch(const std::string& key) const {
  if (std::find(touched_.begin(), touched_.end(), key) == touched_.end()) touched_.push_back(key);
  return find(key);
}

void Config::record(const std::string& key, const ConfigValue& value) const {
  for (auto& [k, v] : effective_)
    if (k == key) {
      v = value;
      return;
    }
  effective_.emplace_back(key, value);
}

double Config::real(const std::string& key, double def) const {
  double out = def;
  if (const ConfigValue* v = touch(key)) {
    auto r = as_real(*v);
    if (!r) type_error(key, "a number");
    out = *r;
  }
  record(key, ConfigValue{out});
  return out;
}

std::int64_t Config::integer(const std::string& key, std::int64_t def) const {
  std::int64_t out = def;
  if (const ConfigValue* v = touch(key)) {
    auto* i = std::get_if<std::int64_t>(&v->v);
    if (!i) type_error(key, "an integer");
    out = *i;
  }
  record(key, ConfigValue{out});
  return out;
}

std::size_t Config::count(const std::string& key, std::size_t def) const {
  const std::int64_t v = integer(key, static_cast<std::int64_t>(def));
  if (v < 0) throw ConfigError("key '" + key + "': must be >= 0");
  return static_cast<std::size_t>(v);
}

bool Config::boolean(const std::string& key, bool def) const {
  bool out = def;
  if (const ConfigValue* v = touch(key)) {
    auto* b = std::get_if<bool>(&v->v);
    if (!b) type_error(key, "true or false");
    out = *b;
  }
  record(key, ConfigValue{out});
  return out;
}

std::string Config::string(const std::string& key, const std::string& def) const {
  std::string out = def;
  if (const ConfigValue* v = touch(key)) {
    auto* s = std::get_if<std::string>(&v->v);
    if (!s) type_error(key, "a string");
    out = *s;
  }
  record(key, ConfigValue{out});
  return out;
}

std::vector<double> Config::reals(const std::string& key, const std::vector<double>& def) const {
  std::vector<double> out = def;
  if (const ConfigValue* v = touch(key)) {
    out.clear();
    if (auto r = as_real(*v)) {
      out.push_back(*r);
    } else if (auto* l = std::get_if<ConfigValue::List>(&v->v)) {
      for (const auto& item : *l) {
        auto x = as_real(item);
        if (!x) type_error(key, "an array of numbers");
        out.push_back(*x);
      }
    } else {
      type_error(key, "an array of numbers");
    }
  }
  record(key, real_list(out));
  return out;
}

std::vector<std::string> Config::strings(const std::string& key, const std::vector<std::string>& def) const {
  std::vector<std::string> out = def;
  if (const ConfigValue* v = touch(key)) {
    out.clear();
    if (auto* s = std::get_if<std::string>(&v->v)) {
      out.push_back(*s);
    } else if (auto* l = std::get_if<ConfigValue::List>(&v->v)) {
      for (const auto& item : *l) {
        auto* x = std::get_if<std::string>(&item.v);
        if (!x) type_error(key, "an array of strings");
        out.push_back(*x);
      }
    } else {
      type_error(key, "an array of strings");
    }
  }
  ConfigValue::List l;
  for (const auto& s : out) l.push_back(ConfigValue{s});
  record(key, ConfigValue{l});
  return out;
}

Matrix Config::matrix(const std::string& key, const Matrix& def) const {
  Matrix out = def;
  if (const ConfigValue* v = touch(key)) {
    auto* rows = std::get_if<ConfigValue::List>(&v->v);
    if (!rows || rows->empty()) type_error(key, "a nested array [[...], ...]");
    std::vector<std::vector<double>> m;
    for (const auto& r : *rows) {
      auto* cols = std::get_if<ConfigValue::List>(&r.v);
      if (!cols || cols->empty()) type_error(key, "a nested array [[...], ...]");
      std::vector<double> row;
      for (const auto& x : *cols) {
        auto d = as_real(x);
        if (!d) type_error(key, "numeric matrix entries");
        row.push_back(*d);
      }
      if (!m.empty() && row.size() != m.front().size()) throw ConfigError("key '" + key + "': ragged matrix rows");
      m.push_back(std::move(row));
    }
    out = Matrix::from_rows(m);
  }
  ConfigValue::List l;
  for (const auto& row : out.to_rows()) l.push_back(real_list(row));
  record(key, ConfigValue{l});
  return out;
}

void Config::reject_unknown() const {
  std::string unknown;
  for (const auto& [k, _] : entries_)
    if (std::find(touched_.begin(), touched_.end(), k) == touched_.end()) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty()) throw ConfigError("unknown key(s): " + unknown);
}

}  // namespace gva
