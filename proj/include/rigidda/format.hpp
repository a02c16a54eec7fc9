// Locale-independent shortest round-trip number formatting.
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <string>

namespace rigidda {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace rigidda
