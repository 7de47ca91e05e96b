#include "harvestgame/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace harvestgame::io {

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;  // 64 bytes always suffice for a double
  return std::string(buf, ptr);
}

double round_to(double v, double quantum) {
  if (!(quantum > 0.0) || !std::isfinite(v)) return v;
  return std::round(v / quantum) * quantum;
}

}  // namespace harvestgame::io
