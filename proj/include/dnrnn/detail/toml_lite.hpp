#pragma once

// A small TOML subset: comments, bare/quoted keys, [table] and [[array]]
// headers (dotted names nest), strings, integers, floats, booleans and
// (possibly multi-line) arrays of those. Inline tables and dates are not
// supported.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dnrnn/error.hpp"

namespace dnrnn::toml {

struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array, Table> data;

  bool is_table() const { return std::holds_alternative<Table>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_number() const { return std::holds_alternative<std::int64_t>(data) || std::holds_alternative<double>(data); }
  bool is_integer() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }

  const Table& table() const { return std::get<Table>(data); }
  Table& table() { return std::get<Table>(data); }
  const Array& array() const { return std::get<Array>(data); }
  Array& array() { return std::get<Array>(data); }
  const std::string& string() const { return std::get<std::string>(data); }
  bool boolean() const { return std::get<bool>(data); }
  std::int64_t integer() const { return std::get<std::int64_t>(data); }
  double number() const {
    if (const auto* i = std::get_if<std::int64_t>(&data)) return static_cast<double>(*i);
    return std::get<double>(data);
  }
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Table parse() {
    Table root;
    Table* current = &root;
    while (skip_blank_lines()) {
      if (peek() == '[') {
        const bool array_header = text_.substr(pos_, 2) == "[[";
        pos_ += array_header ? 2 : 1;
        auto path = parse_key_path();
        skip_ws();
        if (!consume(array_header ? "]]" : "]")) fail("unterminated table header");
        current = open_table(root, path, array_header);
      } else {
        auto path = parse_key_path();
        skip_ws();
        if (!consume("=")) fail("expected '=' after key");
        skip_ws();
        Value v = parse_value();
        Table* target = current;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) target = &subtable(*target, path[i]);
        if (target->count(path.back())) fail("duplicate key '" + path.back() + "'");
        (*target)[path.back()] = std::move(v);
      }
      finish_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    std::ostringstream os;
    os << "line " << line_ << ": " << why;
    throw Error(ErrorCode::config, os.str());
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  bool consume(std::string_view s) {
    if (text_.substr(pos_, s.size()) == s) {
      pos_ += s.size();
      return true;
    }
    return false;
  }
  void skip_ws() {
    while (peek() == ' ' || peek() == '\t') ++pos_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (pos_ < text_.size() && peek() != '\n') ++pos_;
  }
  // Skips whitespace, comments and newlines; false at end of input.
  bool skip_blank_lines() {
    while (pos_ < text_.size()) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() == '\n') {
        ++pos_;
        ++line_;
        continue;
      }
      break;
    }
    return pos_ < text_.size();
  }
  void finish_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (pos_ < text_.size()) {
      if (peek() != '\n') fail("unexpected trailing characters");
      ++pos_;
      ++line_;
    }
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path;
    while (true) {
      skip_ws();
      if (peek() == '"' || peek() == '\'') {
        path.push_back(parse_string());
      } else {
        const auto start = pos_;
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-') ++pos_;
        if (pos_ == start) fail("expected a key");
        path.emplace_back(text_.substr(start, pos_ - start));
      }
      skip_ws();
      if (peek() != '.') break;
      ++pos_;
    }
    return path;
  }

  Table& subtable(Table& parent, const std::string& key) {
    auto [it, inserted] = parent.try_emplace(key, Value{Table{}});
    if (it->second.is_array() && !it->second.array().empty() && it->second.array().back().is_table())
      return it->second.array().back().table();
    if (!it->second.is_table()) fail("key '" + key + "' is not a table");
    return it->second.table();
  }

  Table* open_table(Table& root, const std::vector<std::string>& path, bool array_header) {
    Table* t = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) t = &subtable(*t, path[i]);
    const auto& last = path.back();
    if (!array_header) return &subtable(*t, last);
    auto [it, inserted] = t->try_emplace(last, Value{Array{}});
    if (!it->second.is_array()) fail("key '" + last + "' is not an array of tables");
    it->second.array().push_back(Value{Table{}});
    return &it->second.array().back().table();
  }

  std::string parse_string() {
    const char quote = peek();
    ++pos_;
    std::string out;
    while (true) {
      if (pos_ >= text_.size() || peek() == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        const char e = text_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  Value parse_value() {
    const char c = peek();
    if (c == '"' || c == '\'') return Value{parse_string()};
    if (c == '[') return parse_array();
    if (consume("true")) return Value{true};
    if (consume("false")) return Value{false};
    return parse_number();
  }

  Value parse_array() {
    ++pos_;
    Array items;
    while (true) {
      skip_array_space();
      if (peek() == ']') {
        ++pos_;
        break;
      }
      items.push_back(parse_value());
      skip_array_space();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        break;
      }
      fail("expected ',' or ']' in array");
    }
    return Value{std::move(items)};
  }

  void skip_array_space() {
    while (true) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() == '\n') {
        ++pos_;
        ++line_;
        continue;
      }
      if (pos_ >= text_.size()) fail("unterminated array");
      return;
    }
  }

  Value parse_number() {
    const auto start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                                   peek() == '.' || peek() == '_'))
      ++pos_;
    std::string token;
    for (char ch : text_.substr(start, pos_ - start))
      if (ch != '_') token += ch;
    if (token.empty()) fail("expected a value");
    std::string_view digits = token;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    const bool is_float = token.find_first_of(".eEn") != std::string::npos;  // n: inf/nan
    if (!is_float) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (ec == std::errc{} && p == digits.data() + digits.size()) return Value{v};
    } else {
      double v = 0;
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (ec == std::errc{} && p == digits.data() + digits.size()) return Value{v};
    }
    fail("invalid value '" + token + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

inline Table parse(std::string_view text) { return detail::Parser(text).parse(); }

inline Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace dnrnn::toml
