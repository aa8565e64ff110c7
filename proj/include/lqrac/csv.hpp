#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace lqrac::csv {

/// Shortest round-trippable decimal ('.' separator, locale independent).
inline std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace lqrac::csv
