#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "kpaction/error.hpp"

namespace kpaction::detail {

/// Shortest decimal text that parses back to the same binary value.
template <class T>
void append_number(std::string& out, T value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, result.ptr);
}

template <class T>
std::string format_number(T value) {
  std::string s;
  append_number(s, value);
  return s;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Parses a flat JSON array of numbers, e.g. "[0.1, 2, -3e-5]".
/// Non-finite values are rejected. `line` is only used in error messages.
template <class T>
std::vector<T> parse_number_array(std::string_view text, std::size_t line) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    throw ParseError(line, "expected a JSON array of numbers");
  }
  text = text.substr(1, text.size() - 2);
  std::vector<T> values;
  if (trim(text).empty()) return values;

  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (true) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    // from_chars tolerates "inf"/"nan" spellings that JSON does not; reject
    // anything that does not start like a JSON number.
    if (p == end || !(*p == '-' || (*p >= '0' && *p <= '9'))) {
      if (p != end && (*p == 'n' || *p == 'N' || *p == 'i' || *p == 'I')) {
        throw ParseError(line, "non-finite value");
      }
      throw ParseError(line, "expected a number");
    }
    if (*p == '-' && p + 1 < end && (p[1] == 'n' || p[1] == 'N' || p[1] == 'i' || p[1] == 'I')) {
      throw ParseError(line, "non-finite value");
    }
    T value{};
    const auto [next, ec] = std::from_chars(p, end, value);
    if (ec == std::errc::result_out_of_range) throw ParseError(line, "value out of range");
    if (ec != std::errc{}) throw ParseError(line, "expected a number");
    if (!std::isfinite(value)) throw ParseError(line, "non-finite value");
    values.push_back(value);
    p = next;
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    if (p == end) break;
    if (*p != ',') throw ParseError(line, "expected ',' between values");
    ++p;
  }
  return values;
}

}  // namespace kpaction::detail
