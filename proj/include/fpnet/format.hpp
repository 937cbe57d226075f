#pragma once

#include <cstdio>
#include <string>

namespace fpnet {

/// Round-trippable decimal form (17 significant digits).
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace fpnet
