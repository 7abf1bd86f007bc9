#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "leaftl/ftl.hpp"
#include "leaftl/mapping_table.hpp"
#include "leaftl/workload.hpp"

namespace leaftl {

inline constexpr int kMetricsSchemaVersion = 1;

struct SimOptions {
  bool oracle = true;
  /// Crash and recover once this many trace writes have been applied.
  std::optional<std::uint64_t> crash_after_writes;
  /// After recovery, read back every written LPA and compare with the oracle.
  bool verify_after_recovery = false;
  std::uint64_t sample_every = 10'000;  // page ops between mapping-size samples; 0 disables
  std::uint64_t warmup_writes = 0;      // sequential page writes before the trace
  std::uint64_t seed = 0;               // echoed in failure reports
};

struct LatencySummary {
  std::uint64_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

struct Metrics {
  std::string ftl;
  std::uint32_t gamma = 0;
  std::uint64_t ops = 0;
  FtlCounters counters;  // measured part only (warm-up excluded)
  std::uint64_t flash_reads = 0;
  std::uint64_t flash_writes = 0;
  std::uint64_t flash_erases = 0;
  LatencySummary read_latency;
  LatencySummary write_latency;
  LatencySummary all_latency;
  std::uint64_t mapping_bytes = 0;
  std::uint64_t peak_mapping_bytes = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> mapping_series;  // (op, bytes)
  double waf = 0.0;
  double misprediction_ratio = 0.0;
  double cache_hit_ratio = 0.0;
  double top_level_ratio = 0.0;
  std::uint32_t erase_min = 0;
  std::uint32_t erase_max = 0;
  // LeaFTL table shape; zero for the baselines.
  std::uint64_t segments = 0;
  std::uint64_t levels = 0;
  std::uint64_t crb_bytes = 0;
};

struct OracleFailure {
  std::uint64_t op_index = 0;  // ops applied before the failing one
  Lpa lpa = 0;
  PayloadId expected = 0;
  PayloadId actual = 0;
  bool mapped = false;
  std::uint64_t seed = 0;
  std::string message;
};

struct RunResult {
  Metrics metrics;
  std::optional<OracleFailure> failure;
  std::optional<RecoveryReport> recovery;
};

/// Replays `events` (already scaled to the device) against a fresh FTL.
/// Throws CapacityExhausted when a request lies beyond the logical capacity
/// or the device runs out of blocks.
RunResult run(FtlKind kind, const FtlConfig& config, std::span<const TraceEvent> events,
              const SimOptions& options);

struct CompareRow {
  std::string label;
  std::uint64_t mapping_bytes = 0;
  double memory_reduction = 1.0;  // reference mapping bytes / this run's
  double latency_speedup = 1.0;   // reference mean latency / this run's
  double waf_delta = 0.0;         // this run's WAF minus the reference
};

struct CompareReport {
  std::vector<RunResult> runs;
  std::vector<CompareRow> rows;  // ratios relative to the first run
};

CompareReport compare(std::span<const FtlKind> kinds, const FtlConfig& config,
                      std::span<const TraceEvent> events, const SimOptions& options);
std::vector<CompareRow> compare_rows(std::span<const RunResult> runs);

struct LearnStats {
  std::uint32_t gamma = 0;
  std::uint64_t writes = 0;   // page writes taken from the trace
  std::uint64_t batches = 0;  // buffer flushes
  std::uint64_t segments = 0; // segments learned, before any merging
  std::uint64_t accurate = 0;
  std::uint64_t approximate = 0;
  /// Bucket i counts segments indexing between 2^(i-1)+1 and 2^i mappings
  /// (bucket 0 is single-point segments); 9 buckets up to 256.
  std::vector<std::uint64_t> segment_members;
  /// Bucket 0 counts groups with an empty CRB; bucket i >= 1 counts groups
  /// whose CRB takes at most 2^(i-1) bytes and more than half of that.
  /// Only groups holding segments are counted; 11 buckets up to 512.
  std::vector<std::uint64_t> crb_bytes_per_group;
  MappingFootprint table;  // final table after a compaction
};

/// Runs the write stream through the buffer and learner only: every
/// `batch_pages` distinct LPAs are sorted, given consecutive PPAs and learned.
/// Reads are ignored; offsets must lie below `logical_pages`.
LearnStats learn_stats(std::span<const TraceEvent> events, std::uint32_t gamma,
                       std::uint32_t batch_pages, std::uint64_t logical_pages,
                       std::uint32_t page_size);

/// Applies `f(name, value&)` to every integer counter.
template <typename Counters, typename F>
void for_each_counter(Counters& c, F&& f) {
  f("host_reads", c.host_reads);
  f("host_writes", c.host_writes);
  f("host_pages_flushed", c.host_pages_flushed);
  f("unmapped_reads", c.unmapped_reads);
  f("buffer_hits", c.buffer_hits);
  f("cache_hits", c.cache_hits);
  f("cache_misses", c.cache_misses);
  f("mispredictions", c.mispredictions);
  f("extra_reads", c.extra_reads);
  f("max_extra_reads_per_read", c.max_extra_reads_per_read);
  f("invalidation_reads", c.invalidation_reads);
  f("translation_reads", c.translation_reads);
  f("translation_writes", c.translation_writes);
  f("group_evictions", c.group_evictions);
  f("group_loads", c.group_loads);
  f("gc_invocations", c.gc_invocations);
  f("gc_victims", c.gc_victims);
  f("gc_pages_moved", c.gc_pages_moved);
  f("wl_swaps", c.wl_swaps);
  f("wl_pages_moved", c.wl_pages_moved);
  f("compactions", c.compactions);
  f("snapshots", c.snapshots);
  f("recoveries", c.recoveries);
  f("recovery_blocks_relearned", c.recovery_blocks_relearned);
  f("recovery_reads", c.recovery_reads);
}

/// JSON documents (schema in docs/formats.md); keys are emitted in sorted
/// order so identical runs produce identical text.
std::string to_json(const Metrics& metrics, int indent = 2);
std::string to_json(const RunResult& result, int indent = 2);
std::string to_json(const CompareReport& report, int indent = 2);
std::string to_json(const LearnStats& stats, int indent = 2);
std::string metrics_csv_header();
std::string metrics_csv_row(const Metrics& metrics);

}  // namespace leaftl
