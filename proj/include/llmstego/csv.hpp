#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>

namespace llmstego::csv {

/// Shortest round-trip representation; locale independent, so sweep
/// outputs are byte-identical across runs and machines.
inline std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
  requires std::is_integral_v<T>
std::string format(T v) {
  return std::to_string(v);
}

inline std::string format(std::string_view s) { return std::string(s); }
inline std::string format(const char* s) { return std::string(s); }

template <typename... Ts>
void write_row(std::ostream& out, const Ts&... fields) {
  bool first = true;
  ((out << (first ? "" : ",") << format(fields), first = false), ...);
  out << '\n';
}

}  // namespace llmstego::csv
