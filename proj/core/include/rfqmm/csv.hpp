/// @file csv.hpp
/// @brief Locale-independent number formatting for CSV outputs.
///
/// All CSV files use '\n' newlines and shortest round-trip float formatting
/// via std::to_chars, so identical values always produce identical bytes.
#pragma once

#include <charconv>
#include <string>

namespace rfqmm {

inline std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

inline void append_double(std::string& out, double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  out.append(buf, ptr);
}

}  // namespace rfqmm
