#pragma once

#include <cstdint>

namespace leaftl::half {

// IEEE 754 binary16 helpers restricted to the non-negative range used for
// segment slopes. For non-negative values the bit pattern order matches the
// numeric order, which the search helpers below rely on.

inline constexpr std::uint16_t kOne = 0x3C00;

double decode(std::uint16_t bits);

/// Largest non-negative half whose value is <= v (v clamped to [0, 65504]).
std::uint16_t floor_bits(double v);

/// Half with the requested mantissa LSB parity nearest to v; ties go to the
/// smaller value. Never returns a value above 1.0 when v <= 1.0 and a
/// candidate at or below 1.0 is at least as close.
std::uint16_t nearest_with_parity(double v, unsigned parity);

/// Smallest half with the requested parity whose value is >= v.
std::uint16_t ceil_with_parity(double v, unsigned parity);

}  // namespace leaftl::half
