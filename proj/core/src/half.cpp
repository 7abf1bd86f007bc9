#include "leaftl/half.hpp"

#include <algorithm>
#include <cmath>

namespace leaftl::half {

namespace {
constexpr std::uint16_t kMaxFinite = 0x7BFF;
}

double decode(std::uint16_t bits) {
  const unsigned exponent = (bits >> 10) & 0x1F;
  const unsigned mantissa = bits & 0x3FF;
  const double sign = (bits & 0x8000) ? -1.0 : 1.0;
  if (exponent == 0) {
    return sign * std::ldexp(static_cast<double>(mantissa), -24);
  }
  if (exponent == 0x1F) {
    return mantissa ? std::nan("") : sign * INFINITY;
  }
  return sign * std::ldexp(static_cast<double>(mantissa | 0x400), static_cast<int>(exponent) - 25);
}

std::uint16_t floor_bits(double v) {
  if (!(v > 0.0)) {
    return 0;
  }
  // Binary search over the monotone bit patterns [0, kMaxFinite].
  std::uint32_t lo = 0;
  std::uint32_t hi = kMaxFinite;
  while (lo < hi) {
    const std::uint32_t mid = (lo + hi + 1) / 2;
    if (decode(static_cast<std::uint16_t>(mid)) <= v) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return static_cast<std::uint16_t>(lo);
}

std::uint16_t ceil_with_parity(double v, unsigned parity) {
  std::uint32_t b = floor_bits(v);
  if (decode(static_cast<std::uint16_t>(b)) < v) {
    ++b;
  }
  if ((b & 1U) != (parity & 1U)) {
    ++b;
  }
  return static_cast<std::uint16_t>(std::min<std::uint32_t>(b, kMaxFinite));
}

std::uint16_t nearest_with_parity(double v, unsigned parity) {
  std::uint32_t down = floor_bits(v);
  if ((down & 1U) != (parity & 1U)) {
    if (down == 0) {
      return static_cast<std::uint16_t>(parity & 1U);
    }
    --down;
  }
  const std::uint32_t up = ceil_with_parity(v, parity);
  const double d_down = std::fabs(v - decode(static_cast<std::uint16_t>(down)));
  const double d_up = std::fabs(decode(static_cast<std::uint16_t>(up)) - v);
  return static_cast<std::uint16_t>(d_down <= d_up ? down : up);
}

}  // namespace leaftl::half
