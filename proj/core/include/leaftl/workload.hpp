#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leaftl/types.hpp"

namespace leaftl {

enum class OpType { Read, Write };

struct TraceEvent {
  std::uint64_t timestamp_ns = 0;
  OpType op = OpType::Write;
  std::uint64_t offset = 0;  // bytes
  std::uint64_t size = 0;    // bytes

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<TraceEvent> events;
  std::vector<ParseIssue> issues;  // lines skipped in lenient mode
};

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// MSR Cambridge CSV: Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime.
/// Timestamps are Windows FILETIME ticks (100 ns). Malformed lines are
/// skipped and reported in lenient mode and throw TraceParseError in strict
/// mode.
ParseResult parse_msr(std::istream& in, bool strict = false);
/// Throws std::runtime_error when the file cannot be opened.
ParseResult parse_msr_file(const std::string& path, bool strict = false);
void write_msr(std::ostream& out, std::span<const TraceEvent> events);

enum class SynthKind { Sequential, Random, Strided, Zipf, Mixed };

struct SynthSpec {
  SynthKind kind = SynthKind::Sequential;
  std::uint64_t count = 0;
  std::uint64_t seed = 1;
  std::uint64_t pages = 1;  // address space, in pages
  std::uint32_t page_size = 4096;
  std::uint64_t stride = 2;   // strided
  double theta = 0.99;        // zipf exponent
  double sequential_ratio = 0.5;  // mixed: share of sequential ops
  double read_ratio = 0.0;    // share of ops issued as reads
};

/// "sequential", "random", "strided:K", "zipf:THETA", "mixed:RATIO"; the
/// parameter is optional. Throws std::invalid_argument.
void parse_synth_kind(std::string_view text, SynthSpec& spec);
std::string describe(const SynthSpec& spec);

/// Page-aligned single-page events, deterministic for a given spec.
/// Throws std::invalid_argument on bad parameters.
std::vector<TraceEvent> synth(const SynthSpec& spec);

/// Wraps offsets modulo the capacity, floors them to a page boundary and
/// clips sizes so every request fits.
std::vector<TraceEvent> scale_to_capacity(std::span<const TraceEvent> events,
                                          std::uint64_t capacity_bytes, std::uint32_t page_size);

/// Pages touched by one request.
struct PageRange {
  Lpa first = 0;
  std::uint32_t count = 0;
};
PageRange split_pages(const TraceEvent& event, std::uint32_t page_size);

/// Bounded Zipf sampler over ranks 1..n (rejection-inversion).
class ZipfSampler {
 public:
  ZipfSampler(std::uint64_t n, double theta);
  /// `uniform` draws from [0, 1).
  template <typename Uniform>
  std::uint64_t operator()(Uniform&& uniform) const {
    for (;;) {
      const double u = h_integral_n_ + uniform() * (h_integral_x1_ - h_integral_n_);
      const double x = h_integral_inverse(u);
      double k = std::floor(x + 0.5);
      if (k < 1) k = 1;
      if (k > static_cast<double>(n_)) k = static_cast<double>(n_);
      if (k - x <= s_ || u >= h_integral(k + 0.5) - h(k)) {
        return static_cast<std::uint64_t>(k);
      }
    }
  }

 private:
  double h(double x) const;
  double h_integral(double x) const;
  double h_integral_inverse(double x) const;

  std::uint64_t n_;
  double theta_;
  double h_integral_x1_;
  double h_integral_n_;
  double s_;
};

}  // namespace leaftl
