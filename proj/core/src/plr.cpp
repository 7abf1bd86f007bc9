#include "leaftl/plr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "leaftl/half.hpp"

namespace leaftl {

namespace {

// Sparse segments span many offsets they do not index. In the group table
// they overlap newer segments and get demoted, stacking levels for a few
// bytes saved, so they are only kept when dense or long.
constexpr std::size_t kMaxDenseStride = 4;
constexpr std::size_t kMaxApproxSpanPerMember = 2;

bool dense_enough(Lpa stride, std::size_t members) {
  return stride <= kMaxDenseStride || members >= stride;
}

struct Encoding {
  std::uint16_t bits = 0;
  std::int32_t intercept = 0;
  bool accurate = true;
};

std::int64_t predict_at(std::uint16_t bits, std::int32_t intercept, std::uint8_t offset) {
  const double k = half::decode(bits);
  return static_cast<std::int64_t>(std::ceil(k * offset)) + intercept;
}

// Anchors the line on the first member so that its prediction is exact.
std::optional<std::int32_t> anchored_intercept(std::uint16_t bits, const MappingPoint& first) {
  const double k = half::decode(bits);
  const std::int64_t i = static_cast<std::int64_t>(first.ppa) -
                         static_cast<std::int64_t>(std::ceil(k * offset_in_group(first.lpa)));
  if (i < std::numeric_limits<std::int32_t>::min() || i > std::numeric_limits<std::int32_t>::max()) {
    return std::nullopt;
  }
  return static_cast<std::int32_t>(i);
}

bool constant_stride(std::span<const MappingPoint> p) {
  if (p.size() < 2) {
    return true;
  }
  const Lpa d = p[1].lpa - p[0].lpa;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].lpa - p[i - 1].lpa != d) {
      return false;
    }
  }
  return true;
}

bool unit_ppa_steps(std::span<const MappingPoint> p) {
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].ppa != p[i - 1].ppa + 1) {
      return false;
    }
  }
  return true;
}

// Index of the first member the encoding mispredicts beyond gamma, or
// p.size() if all members pass.
std::size_t first_violation(std::span<const MappingPoint> p, std::uint16_t bits,
                            std::int32_t intercept, bool accurate, std::uint32_t gamma) {
  const std::int64_t g = accurate ? 0 : gamma;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::int64_t pred = predict_at(bits, intercept, offset_in_group(p[i].lpa));
    const std::int64_t err = pred - static_cast<std::int64_t>(p[i].ppa);
    if (err < -g || err > g) {
      return i;
    }
  }
  return p.size();
}

bool stride_matches(std::span<const MappingPoint> p, std::uint16_t bits) {
  if (p.size() < 2) {
    return true;
  }
  return constant_stride(p) && accurate_stride(bits) == p[1].lpa - p[0].lpa;
}

std::optional<Encoding> fit_accurate(std::span<const MappingPoint> p) {
  const Lpa d = p[1].lpa - p[0].lpa;
  if (!dense_enough(d, p.size())) return std::nullopt;
  const std::uint16_t bits = half::ceil_with_parity(1.0 / static_cast<double>(d), 0);
  if (accurate_stride(bits) != d) {
    return std::nullopt;
  }
  const auto intercept = anchored_intercept(bits, p.front());
  if (!intercept || first_violation(p, bits, *intercept, true, 0) != p.size()) {
    return std::nullopt;
  }
  return Encoding{bits, *intercept, true};
}

std::optional<Encoding> fit_approximate(std::span<const MappingPoint> p, double lo, double hi,
                                        std::uint32_t gamma) {
  const auto& first = p.front();
  const auto& last = p.back();
  const double dx = static_cast<double>(last.lpa - first.lpa);
  const double dy = static_cast<double>(last.ppa) - static_cast<double>(first.ppa);
  // Keep the last prediction at or below the last member so predicted pages
  // stay inside the programmed batch.
  const double upper = std::min({hi, 1.0, dy / dx});
  const double lower = std::max(lo, half::decode(1));
  if (upper < lower) {
    return std::nullopt;
  }
  std::uint16_t bits = half::nearest_with_parity((lower + upper) / 2.0, 1);
  if (half::decode(bits) < lower || half::decode(bits) > upper) {
    bits = half::ceil_with_parity(lower, 1);
    if (half::decode(bits) > upper) {
      return std::nullopt;
    }
  }
  const auto intercept = anchored_intercept(bits, first);
  if (!intercept) {
    return std::nullopt;
  }
  if (first_violation(p, bits, *intercept, false, gamma) != p.size()) {
    return std::nullopt;
  }
  if (predict_at(bits, *intercept, offset_in_group(last.lpa)) > static_cast<std::int64_t>(last.ppa)) {
    return std::nullopt;
  }
  return Encoding{bits, *intercept, false};
}

FittedSegment make_segment(std::span<const MappingPoint> p, const Encoding& e) {
  FittedSegment s;
  s.start_lpa = p.front().lpa;
  s.length = p.back().lpa - p.front().lpa;
  s.slope_bits = e.bits;
  s.slope = half::decode(e.bits);
  s.intercept = e.intercept;
  s.accurate = e.accurate;
  s.member_lpas.reserve(p.size());
  for (const auto& pt : p) {
    s.member_lpas.push_back(pt.lpa);
  }
  return s;
}

FittedSegment single_point(const MappingPoint& pt) {
  FittedSegment s;
  s.start_lpa = pt.lpa;
  s.length = 0;
  s.slope = 0.0;
  s.slope_bits = 0;
  s.intercept = static_cast<std::int32_t>(pt.ppa);
  s.accurate = true;
  s.member_lpas = {pt.lpa};
  return s;
}

// Exact learning: constant LPA stride with consecutive PPAs.
std::size_t take_accurate(std::span<const MappingPoint> p, std::vector<FittedSegment>& out) {
  if (p.size() < 2 || p[1].ppa != p[0].ppa + 1) {
    out.push_back(single_point(p[0]));
    return 1;
  }
  const Lpa d = p[1].lpa - p[0].lpa;
  std::size_t m = 2;
  while (m < p.size() && p[m].lpa - p[m - 1].lpa == d && p[m].ppa == p[m - 1].ppa + 1) {
    ++m;
  }
  auto run = p.first(m);
  if (auto e = fit_accurate(run)) {
    out.push_back(make_segment(run, *e));
    return m;
  }
  // The slope and intercept only depend on the stride and the first member,
  // so any prefix ending before the first mispredicted member is exact too.
  const std::uint16_t bits = half::ceil_with_parity(1.0 / static_cast<double>(d), 0);
  if (const auto intercept = anchored_intercept(bits, run.front());
      intercept && accurate_stride(bits) == d) {
    const std::size_t f = first_violation(run, bits, *intercept, true, 0);
    if (f >= 2 && dense_enough(d, f)) {
      out.push_back(make_segment(run.first(f), Encoding{bits, *intercept, true}));
      return f;
    }
  }
  out.push_back(single_point(p[0]));
  return 1;
}


// Gamma-bounded learning with a slope cone anchored on the first point.
std::size_t take_approximate(std::span<const MappingPoint> p, std::uint32_t gamma,
                             std::vector<FittedSegment>& out) {
  const double g = static_cast<double>(gamma);
  std::vector<double> lo_at(p.size(), 0.0);
  std::vector<double> hi_at(p.size(), 0.0);
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::size_t m = 1;
  while (m < p.size()) {
    const double dx = static_cast<double>(p[m].lpa - p[0].lpa);
    const double dy = static_cast<double>(p[m].ppa) - static_cast<double>(p[0].ppa);
    const double nlo = std::max(lo, (dy - g) / dx);
    const double nhi = std::min(hi, (dy + g) / dx);
    if (nlo > nhi || nlo > 1.0 || nhi <= 0.0) {
      break;
    }
    lo = lo_at[m] = nlo;
    hi = hi_at[m] = nhi;
    ++m;
  }
  for (std::size_t len = m; len >= 2; --len) {
    auto run = p.first(len);
    if (constant_stride(run) && unit_ppa_steps(run)) {
      if (auto e = fit_accurate(run)) {
        out.push_back(make_segment(run, *e));
        return len;
      }
    }
    if (run.back().lpa - run.front().lpa + 1 > kMaxApproxSpanPerMember * len) {
      continue;
    }
    if (auto e = fit_approximate(run, lo_at[len - 1], hi_at[len - 1], gamma)) {
      out.push_back(make_segment(run, *e));
      return len;
    }
  }
  out.push_back(single_point(p[0]));
  return 1;
}

// Table bytes the segments add: 8 each, plus the CRB run of every
// approximate one.
std::size_t encoded_cost(const std::vector<FittedSegment>& segments) {
  std::size_t bytes = 0;
  for (const auto& s : segments) {
    bytes += 8 + (s.accurate ? 0 : 1 + s.member_lpas.size());
  }
  return bytes;
}

}  // namespace

std::int64_t FittedSegment::predict(Lpa lpa) const {
  return predict_at(slope_bits, intercept, offset_in_group(lpa));
}

std::uint16_t quantize_slope(double slope, bool accurate) {
  return half::nearest_with_parity(slope, accurate ? 0U : 1U);
}

double decode_slope(std::uint16_t bits) { return half::decode(bits); }

std::uint32_t accurate_stride(std::uint16_t slope_bits) {
  const double k = half::decode(slope_bits);
  if (k <= 0.0) {
    return 0;
  }
  return static_cast<std::uint32_t>(std::ceil(1.0 / k));
}

bool requantize_check(const FittedSegment& segment, std::span<const MappingPoint> points,
                      std::uint32_t gamma) {
  const std::uint16_t bits = quantize_slope(segment.slope, segment.accurate);
  if (first_violation(points, bits, segment.intercept, segment.accurate, gamma) != points.size()) {
    return false;
  }
  return !segment.accurate || points.size() < 2 || stride_matches(points, bits);
}

std::vector<FittedSegment> learn_segments(std::span<const MappingPoint> points,
                                          std::uint32_t gamma) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].lpa <= points[i - 1].lpa) {
      throw ContractViolation("learn_segments: LPAs must be strictly increasing");
    }
  }
  std::vector<FittedSegment> out;
  std::size_t i = 0;
  while (i < points.size()) {
    const std::uint32_t group = group_of(points[i].lpa);
    std::size_t end = i + 1;
    while (end < points.size() && group_of(points[end].lpa) == group) {
      ++end;
    }
    const auto slice = points.subspan(i, end - i);
    std::vector<FittedSegment> best;
    std::size_t best_cost = 0;
    for (std::uint32_t g = 0;; g = g == 0 ? 1 : std::min(gamma, 2 * g)) {
      std::vector<FittedSegment> candidate;
      for (std::size_t k = 0; k < slice.size();) {
        k += g == 0 ? take_accurate(slice.subspan(k), candidate)
                    : take_approximate(slice.subspan(k), g, candidate);
      }
      const std::size_t cost = encoded_cost(candidate);
      if (best.empty() || cost < best_cost) {
        best = std::move(candidate);
        best_cost = cost;
      }
      if (g >= gamma) break;
    }
    out.insert(out.end(), std::make_move_iterator(best.begin()), std::make_move_iterator(best.end()));
    i = end;
  }
  return out;
}

std::vector<FittedSegment> learn_segments_unsorted(std::span<const MappingPoint> points,
                                                   std::uint32_t gamma) {
  std::vector<FittedSegment> out;
  std::size_t begin = 0;
  while (begin < points.size()) {
    std::size_t end = begin + 1;
    while (end < points.size() && points[end].lpa > points[end - 1].lpa) {
      ++end;
    }
    auto run = learn_segments(points.subspan(begin, end - begin), gamma);
    out.insert(out.end(), std::make_move_iterator(run.begin()), std::make_move_iterator(run.end()));
    begin = end;
  }
  return out;
}

}  // namespace leaftl
