#pragma once

#include <cmath>
#include <cstdint>

#include "leaftl/half.hpp"
#include "leaftl/plr.hpp"
#include "leaftl/types.hpp"

namespace leaftl {

/// The 8-byte in-DRAM form of a learned segment. Offsets are relative to the
/// owning 256-LPA group; the slope LSB flags the segment type.
struct EncodedSegment {
  std::uint8_t start = 0;
  std::uint8_t length = 0;
  std::uint16_t slope_bits = 0;
  std::int32_t intercept = 0;

  bool accurate() const { return slope_is_accurate(slope_bits); }
  std::uint8_t last() const { return static_cast<std::uint8_t>(start + length); }
  bool covers(std::uint8_t offset) const { return offset >= start && offset <= last(); }
  bool overlaps(const EncodedSegment& other) const {
    return start <= other.last() && other.start <= last();
  }
  std::int64_t predict(std::uint8_t offset) const {
    return static_cast<std::int64_t>(std::ceil(half::decode(slope_bits) * offset)) + intercept;
  }

  friend bool operator==(const EncodedSegment&, const EncodedSegment&) = default;
};

static_assert(sizeof(EncodedSegment) == 8, "segments must encode in exactly 8 bytes");

inline EncodedSegment encode(const FittedSegment& s) {
  return EncodedSegment{offset_in_group(s.start_lpa), static_cast<std::uint8_t>(s.length),
                        s.slope_bits, s.intercept};
}

}  // namespace leaftl
