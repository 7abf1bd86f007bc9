#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "leaftl/types.hpp"

namespace leaftl {

struct MappingPoint {
  Lpa lpa = 0;
  Ppa ppa = 0;

  friend bool operator==(const MappingPoint&, const MappingPoint&) = default;
};

/// One learned linear segment over LPAs of a single 256-LPA group.
///
/// Predictions are evaluated on the group-relative offset x of an LPA:
///   ppa = ceil(slope * x) + intercept
/// which equals ceil(slope * x + intercept) since the intercept is integral.
/// `slope` always holds the decoded value of `slope_bits`, so quantizing it
/// again reproduces the stored encoding.
struct FittedSegment {
  Lpa start_lpa = 0;
  std::uint32_t length = 0;  // last member LPA minus start_lpa
  double slope = 0.0;
  std::uint16_t slope_bits = 0;
  std::int32_t intercept = 0;
  bool accurate = true;
  std::vector<Lpa> member_lpas;

  Lpa end_lpa() const { return start_lpa + length; }
  std::int64_t predict(Lpa lpa) const;
};

/// Learns gamma-bounded segments from a batch of mapping points sorted by
/// strictly increasing LPA. Segments never cross a group boundary and every
/// prediction for a member lies inside the PPA span of that segment's members,
/// so the OOB window of the predicted page always contains the true page.
/// Each group slice is learned with bounds 0, 1, 2, 4, ... up to gamma and the
/// cheapest encoding is kept.
///
/// Throws ContractViolation when LPAs are not strictly increasing.
std::vector<FittedSegment> learn_segments(std::span<const MappingPoint> points,
                                          std::uint32_t gamma);

/// Learns a batch in arrival order: the sequence is cut wherever the LPA stops
/// increasing and each run is learned independently. This is the baseline the
/// pre-flush sort is measured against.
std::vector<FittedSegment> learn_segments_unsorted(std::span<const MappingPoint> points,
                                                   std::uint32_t gamma);

/// 16-bit half-precision slope whose mantissa LSB carries the segment type:
/// 0 for accurate, 1 for approximate.
std::uint16_t quantize_slope(double slope, bool accurate);
double decode_slope(std::uint16_t bits);
inline bool slope_is_accurate(std::uint16_t bits) { return (bits & 1U) == 0; }

/// Re-quantizes `segment.slope` and checks every member against the gamma
/// bound (and exactness, plus the stride rule, for accurate segments).
bool requantize_check(const FittedSegment& segment, std::span<const MappingPoint> points,
                      std::uint32_t gamma);

/// Membership stride of an accurate segment: ceil(1 / slope); 0 for a
/// single-point segment.
std::uint32_t accurate_stride(std::uint16_t slope_bits);

}  // namespace leaftl
