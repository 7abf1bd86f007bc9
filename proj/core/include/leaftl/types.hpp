#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace leaftl {

using Lpa = std::uint32_t;
using Ppa = std::uint32_t;
using PayloadId = std::uint64_t;

inline constexpr Lpa kInvalidLpa = std::numeric_limits<Lpa>::max();
inline constexpr Ppa kInvalidPpa = std::numeric_limits<Ppa>::max();

/// LPAs are partitioned into groups of this many contiguous addresses; segment
/// start offsets and lengths are stored relative to their group in one byte.
inline constexpr std::uint32_t kGroupSize = 256;

inline constexpr std::uint32_t group_of(Lpa lpa) { return lpa / kGroupSize; }
inline constexpr std::uint8_t offset_in_group(Lpa lpa) {
  return static_cast<std::uint8_t>(lpa % kGroupSize);
}
inline constexpr Lpa group_base(std::uint32_t group) { return group * kGroupSize; }

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when the simulated hardware is driven into an impossible state
/// (programming a written page, reading an erased one).
class ModelViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// No free block can be produced even after garbage collection.
class CapacityExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace leaftl
