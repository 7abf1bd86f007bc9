#include <algorithm>

#include <gtest/gtest.h>

#include "leaftl/sim.hpp"

using namespace leaftl;

namespace {

FtlConfig small_device() {
  FtlConfig c;
  c.geometry.channels = 4;
  c.geometry.blocks_per_channel = 32;
  c.geometry.pages_per_block = 256;
  c.geometry.oob_size = 256;
  c.dram_bytes = 64ULL << 20;
  c.compaction_interval = 0;
  c.snapshot_interval = 0;
  c.snapshot_on_gc = false;
  return c;
}

std::vector<TraceEvent> workload(const std::string& kind, std::uint64_t count, std::uint64_t pages,
                                 double read_ratio = 0.0, std::uint64_t seed = 1) {
  SynthSpec s;
  parse_synth_kind(kind, s);
  s.count = count;
  s.pages = pages;
  s.read_ratio = read_ratio;
  s.seed = seed;
  return synth(s);
}

std::size_t csv_fields(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST(Run, EmptyTrace) {
  const auto r = run(FtlKind::LeaFtl, small_device(), {}, {});
  EXPECT_FALSE(r.failure);
  EXPECT_EQ(r.metrics.ops, 0u);
  EXPECT_EQ(r.metrics.flash_writes, 0u);
  EXPECT_EQ(r.metrics.waf, 0.0);
  EXPECT_EQ(r.metrics.mapping_bytes, 0u);
}

TEST(Run, SequentialFillHasUnitWaf) {
  const auto cfg = small_device();
  const auto events = workload("sequential", 256 * 64, cfg.geometry.logical_pages());
  for (auto kind : {FtlKind::LeaFtl, FtlKind::Dftl, FtlKind::Sftl}) {
    const auto r = run(kind, cfg, events, {});
    EXPECT_FALSE(r.failure) << to_string(kind);
    EXPECT_DOUBLE_EQ(r.metrics.waf, 1.0) << to_string(kind);
    EXPECT_EQ(r.metrics.counters.gc_invocations, 0u);
  }
}

TEST(Run, LeaFtlIsFarSmallerOnSequentialWrites) {
  const auto cfg = small_device();
  const auto events = workload("sequential", 256 * 64, cfg.geometry.logical_pages());
  const auto lea = run(FtlKind::LeaFtl, cfg, events, {});
  const auto dftl = run(FtlKind::Dftl, cfg, events, {});
  EXPECT_EQ(dftl.metrics.mapping_bytes, 8u * 256 * 64);
  EXPECT_LT(lea.metrics.mapping_bytes * 50, dftl.metrics.mapping_bytes);
}

TEST(Run, OracleAcceptsMixedTrafficUnderGc) {
  auto cfg = small_device();
  cfg.gamma = 8;
  const auto events = workload("random", 60000, cfg.geometry.logical_pages(), 0.4);
  for (auto kind : {FtlKind::LeaFtl, FtlKind::Dftl, FtlKind::Sftl}) {
    const auto r = run(kind, cfg, events, {});
    EXPECT_FALSE(r.failure) << to_string(kind);
    EXPECT_GT(r.metrics.counters.gc_invocations, 0u);
    EXPECT_GT(r.metrics.waf, 1.0);
  }
}

TEST(Run, RequestPastCapacityThrows) {
  const auto cfg = small_device();
  const std::vector<TraceEvent> events{{0, OpType::Write, cfg.geometry.logical_pages() * 4096, 4096}};
  EXPECT_THROW(run(FtlKind::LeaFtl, cfg, events, {}), CapacityExhausted);
}

TEST(Run, IdenticalInputsGiveIdenticalJson) {
  auto cfg = small_device();
  cfg.gamma = 4;
  const auto events = workload("zipf:0.9", 30000, cfg.geometry.logical_pages(), 0.5);
  const auto a = to_json(run(FtlKind::LeaFtl, cfg, events, {}));
  const auto b = to_json(run(FtlKind::LeaFtl, cfg, events, {}));
  EXPECT_EQ(a, b);
}

TEST(Run, CrashMidTraceRecoversEquivalentState) {
  auto cfg = small_device();
  cfg.snapshot_interval = 5000;
  const auto events = workload("mixed:0.5", 40000, cfg.geometry.logical_pages(), 0.3);
  for (auto kind : {FtlKind::LeaFtl, FtlKind::Dftl, FtlKind::Sftl}) {
    SimOptions o;
    o.crash_after_writes = 12345;
    o.verify_after_recovery = true;
    const auto r = run(kind, cfg, events, o);
    EXPECT_FALSE(r.failure) << to_string(kind) << ": " << (r.failure ? r.failure->message : "");
    ASSERT_TRUE(r.recovery);
    EXPECT_EQ(r.metrics.counters.recoveries, 1u);
  }
}

TEST(Run, WarmupIsExcludedFromMetrics) {
  const auto cfg = small_device();
  SimOptions o;
  o.warmup_writes = 4096;
  const auto events = workload("sequential", 256, cfg.geometry.logical_pages());
  const auto r = run(FtlKind::Dftl, cfg, events, o);
  EXPECT_EQ(r.metrics.counters.host_writes, 256u);
  EXPECT_EQ(r.metrics.ops, 256u);
}

TEST(Compare, SameFtlTwiceGivesUnitRatios) {
  const auto cfg = small_device();
  const auto events = workload("zipf:0.8", 20000, cfg.geometry.logical_pages(), 0.5);
  const std::vector<FtlKind> kinds{FtlKind::Dftl, FtlKind::Dftl};
  const auto rep = compare(kinds, cfg, events, {});
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.rows[1].memory_reduction, 1.0);
  EXPECT_DOUBLE_EQ(rep.rows[1].latency_speedup, 1.0);
  EXPECT_DOUBLE_EQ(rep.rows[1].waf_delta, 0.0);
}

TEST(Compare, LargerGammaNeverGrowsTheTable) {
  auto cfg = small_device();
  const auto events = workload("random", 20000, cfg.geometry.logical_pages());
  cfg.gamma = 0;
  const auto exact = run(FtlKind::LeaFtl, cfg, events, {});
  cfg.gamma = 8;
  const auto loose = run(FtlKind::LeaFtl, cfg, events, {});
  EXPECT_LE(loose.metrics.segments, exact.metrics.segments);
}

TEST(Output, JsonCarriesSchemaAndCounters) {
  const auto cfg = small_device();
  const auto r = run(FtlKind::Sftl, cfg, workload("sequential", 1000, cfg.geometry.logical_pages(), 0.5), {});
  const auto json = to_json(r);
  for (const char* key : {"\"schema_version\"", "\"ftl\"", "\"waf\"", "\"mapping_bytes\"",
                          "\"host_writes\"", "\"latency_us\""}) {
    EXPECT_NE(json.find(key), std::string::npos) << key;
  }
}

TEST(Output, CsvRowMatchesHeader) {
  const auto cfg = small_device();
  const auto r = run(FtlKind::LeaFtl, cfg, workload("sequential", 1000, cfg.geometry.logical_pages()), {});
  const auto header = metrics_csv_header();
  const auto row = metrics_csv_row(r.metrics);
  EXPECT_EQ(csv_fields(header), csv_fields(row));
  EXPECT_EQ(header.rfind("schema_version,ftl,", 0), 0u);
}

TEST(LearnStatsTest, SequentialGroupsAreOneSegmentEach) {
  const auto events = workload("sequential", 256 * 16, 1 << 16);
  const auto s = learn_stats(events, 0, 256, 1 << 16, 4096);
  EXPECT_EQ(s.writes, 256u * 16);
  EXPECT_EQ(s.batches, 16u);
  EXPECT_EQ(s.segments, 16u);
  EXPECT_EQ(s.accurate, 16u);
  ASSERT_EQ(s.segment_members.size(), 9u);
  EXPECT_EQ(s.segment_members[8], 16u);
  EXPECT_EQ(s.table.segments, 16u);
}

TEST(LearnStatsTest, BucketsCoverEverySegment) {
  const auto events = workload("random", 20000, 1 << 14);
  const auto s = learn_stats(events, 4, 256, 1 << 14, 4096);
  std::uint64_t total = 0;
  for (auto n : s.segment_members) total += n;
  EXPECT_EQ(total, s.segments);
  EXPECT_EQ(s.accurate + s.approximate, s.segments);
  ASSERT_EQ(s.crb_bytes_per_group.size(), 11u);
}
