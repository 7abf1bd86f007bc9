#include <random>

#include <gtest/gtest.h>

#include "leaftl/group_table.hpp"
#include "leaftl/mapping_table.hpp"
#include "oracle.hpp"

using namespace leaftl;

namespace {

EncodedSegment accurate(std::uint8_t start, std::uint8_t last, double slope, std::int32_t intercept) {
  return EncodedSegment{start, static_cast<std::uint8_t>(last - start), quantize_slope(slope, true),
                        intercept};
}

EncodedSegment approximate(std::uint8_t start, std::uint8_t last, double slope,
                           std::int32_t intercept) {
  return EncodedSegment{start, static_cast<std::uint8_t>(last - start), quantize_slope(slope, false),
                        intercept};
}

std::vector<std::uint8_t> bits_of(const std::vector<bool>& bm) {
  std::vector<std::uint8_t> out;
  for (bool b : bm) out.push_back(b ? 1 : 0);
  return out;
}

// The running example: [0,63] then [200,255], [16,31], approximate [75,82]
// and approximate [72,80].
struct Fig9 {
  GroupTable t;
  EncodedSegment s0_63 = accurate(0, 63, 1.0, 1000);
  EncodedSegment s200_255 = accurate(200, 255, 1.0, 2000);
  EncodedSegment s16_31 = accurate(16, 31, 1.0, 3000);
  EncodedSegment s75_82 = approximate(75, 82, 0.5, 4000);
  EncodedSegment s72_80 = approximate(72, 80, 0.375, 5000);

  void t1() {
    t.insert(s0_63, {});
    t.insert(s200_255, {});
  }
  void t2() { t.insert(s16_31, {}); }
  void t3() {
    const std::vector<std::uint8_t> m{75, 78, 80, 82};
    t.insert(s75_82, m);
  }
  void t4() {
    const std::vector<std::uint8_t> m{72, 74, 80};
    t.insert(s72_80, m);
  }
};

}  // namespace

TEST(Crb, InsertLookupAndSize) {
  Crb crb;
  const std::vector<std::uint8_t> a{75, 78, 80, 82};
  EXPECT_TRUE(crb.insert_run(a).empty());
  EXPECT_EQ(crb.owner(78), 75);
  EXPECT_FALSE(crb.owner(76));
  EXPECT_EQ(crb.byte_size(), 5u);
  const std::vector<std::uint8_t> b{72, 74, 80};
  // 80 moves to the new run; the older run keeps its first offset.
  EXPECT_TRUE(crb.insert_run(b).empty());
  EXPECT_EQ(crb.owner(80), 72);
  EXPECT_EQ(crb.owner(78), 75);
  EXPECT_EQ(crb.offset_count(), 6u);
  EXPECT_EQ(crb.check_invariants(), "");
}

TEST(Crb, ClaimingTheFirstOffsetShiftsTheRun) {
  Crb crb;
  const std::vector<std::uint8_t> a{10, 12, 14};
  crb.insert_run(a);
  const std::vector<std::uint8_t> b{10, 11};
  const auto shifts = crb.insert_run(b);
  ASSERT_EQ(shifts.size(), 1u);
  EXPECT_EQ(shifts[0].old_start, 10);
  EXPECT_EQ(shifts[0].new_start, 12);
  EXPECT_EQ(shifts[0].new_last, 14);
  EXPECT_TRUE(crb.has_run(12));
  EXPECT_EQ(crb.check_invariants(), "");
}

TEST(Crb, FullyClaimedRunVanishes) {
  Crb crb;
  const std::vector<std::uint8_t> a{20, 21};
  crb.insert_run(a);
  const std::vector<std::uint8_t> b{19, 20, 21, 22};
  const auto shifts = crb.insert_run(b);
  ASSERT_EQ(shifts.size(), 1u);
  EXPECT_FALSE(shifts[0].new_start);
  EXPECT_EQ(crb.run_count(), 1u);
}

TEST(Crb, SerializeRoundTrip) {
  Crb crb;
  std::mt19937 rng(3);
  for (int i = 0; i < 40; ++i) {
    std::vector<std::uint8_t> run;
    std::uint32_t o = rng() % 200;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n && o < 256; ++k, o += 1 + rng() % 4) run.push_back(static_cast<std::uint8_t>(o));
    crb.insert_run(run);
  }
  std::vector<std::uint8_t> bytes;
  crb.serialize(bytes);
  EXPECT_EQ(bytes.size(), crb.byte_size());
  EXPECT_EQ(Crb::parse(bytes), crb);
  EXPECT_EQ(crb.check_invariants(), "");
}

TEST(Crb, RejectsBadRuns) {
  Crb crb;
  EXPECT_THROW(crb.insert_run({}), ContractViolation);
  const std::vector<std::uint8_t> down{5, 3};
  EXPECT_THROW(crb.insert_run(down), ContractViolation);
}

TEST(GroupTable, DisjointInsertStaysOnTop) {
  Fig9 f;
  f.t1();
  ASSERT_EQ(f.t.level_count(), 1u);
  ASSERT_EQ(f.t.levels()[0].size(), 2u);
  EXPECT_EQ(f.t.levels()[0][0].start, 0);
  EXPECT_EQ(f.t.levels()[0][1].start, 200);
}

TEST(GroupTable, OverlappedSegmentMovesDown) {
  Fig9 f;
  f.t1();
  f.t2();
  ASSERT_EQ(f.t.level_count(), 2u);
  EXPECT_EQ(f.t.levels()[0].size(), 2u);
  ASSERT_EQ(f.t.levels()[1].size(), 1u);
  EXPECT_EQ(f.t.levels()[1][0], f.s0_63);
  for (unsigned o = 0; o < 64; ++o) {
    const auto hit = f.t.lookup(static_cast<std::uint8_t>(o));
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->ppa, o >= 16 && o <= 31 ? 3000 + o : 1000 + o);
  }
}

TEST(GroupTable, LookupFallsThroughToLowerLevel) {
  Fig9 f;
  f.t1();
  f.t2();
  const auto hit = f.t.lookup(50);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->level, 1u);
  EXPECT_TRUE(hit->accurate);
  EXPECT_EQ(hit->ppa, 1050);
}

TEST(GroupTable, ApproximateOverlapDemotes) {
  Fig9 f;
  f.t1();
  f.t2();
  f.t3();
  f.t4();
  EXPECT_TRUE(f.t.crb().has_run(72));
  EXPECT_TRUE(f.t.crb().has_run(75));
  bool found = false;
  for (std::size_t l = 1; l < f.t.level_count(); ++l) {
    for (const auto& s : f.t.levels()[l]) found |= s.start == 75;
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(f.t.check_invariants(), "");
}

TEST(GroupTable, CrbPicksTheOwningSegment) {
  Fig9 f;
  f.t1();
  f.t2();
  f.t3();
  f.t4();
  const auto hit = f.t.lookup(78);
  ASSERT_TRUE(hit);
  EXPECT_GE(hit->level, 1u);
  EXPECT_FALSE(hit->accurate);
  EXPECT_EQ(hit->ppa, f.s75_82.predict(78));
  EXPECT_EQ(f.t.lookup(80)->ppa, f.s72_80.predict(80));
  EXPECT_FALSE(f.t.lookup(76));
  EXPECT_FALSE(f.t.lookup(150));
}

TEST(GroupTable, HasLpaAccurateStride) {
  GroupTable t;
  const auto s = accurate(100, 106, 0.5, 0);
  t.insert(s, {});
  EXPECT_TRUE(t.has_lpa(s, 102));
  EXPECT_FALSE(t.has_lpa(s, 103));
  EXPECT_FALSE(t.has_lpa(s, 99));
  EXPECT_EQ(bits_of(t.get_bitmap(s, 100, 106)), (std::vector<std::uint8_t>{1, 0, 1, 0, 1, 0, 1}));
  EXPECT_EQ(bits_of(t.get_bitmap(s, 10, 20)), std::vector<std::uint8_t>(11, 0));
}

TEST(GroupTable, HasLpaApproximateUsesCrb) {
  GroupTable t;
  const auto s = approximate(75, 82, 0.5, 0);
  const std::vector<std::uint8_t> m{75, 78, 80, 82};
  t.insert(s, m);
  EXPECT_FALSE(t.has_lpa(s, 76));
  EXPECT_TRUE(t.has_lpa(s, 78));

  GroupTable u;
  const auto r = approximate(72, 80, 0.375, 0);
  const std::vector<std::uint8_t> rm{72, 74, 80};
  u.insert(r, rm);
  EXPECT_EQ(bits_of(u.get_bitmap(r, 72, 80)), (std::vector<std::uint8_t>{1, 0, 1, 0, 0, 0, 0, 0, 1}));
}

TEST(GroupTable, MergeRemovesFullyCoveredSegment) {
  GroupTable t;
  auto old = approximate(72, 80, 0.375, 0);
  const std::vector<std::uint8_t> m{72, 74, 80};
  t.insert(old, m);
  const auto fresh = accurate(32, 90, 1.0, 0);
  EXPECT_TRUE(t.seg_merge(fresh, old));
}

TEST(GroupTable, MergeKeepsPartiallyCoveredSegment) {
  GroupTable t;
  auto old = accurate(0, 63, 1.0, 0);
  const auto fresh = accurate(16, 31, 1.0, 0);
  EXPECT_FALSE(t.seg_merge(fresh, old));
  EXPECT_EQ(old.start, 0);
  EXPECT_EQ(old.last(), 63);
}

TEST(GroupTable, MergeOfDisjointSegmentsIsNoop) {
  GroupTable t;
  auto old = accurate(0, 63, 1.0, 0);
  const auto before = old;
  EXPECT_FALSE(t.seg_merge(accurate(100, 120, 1.0, 0), old));
  EXPECT_EQ(old, before);
}

TEST(GroupTable, CompactionDropsOutdatedSegments) {
  Fig9 f;
  f.t1();
  f.t2();
  f.t3();
  f.t4();
  f.t.insert(accurate(32, 90, 1.0, 6000), {});
  std::vector<std::optional<std::int64_t>> before(256);
  for (unsigned o = 0; o < 256; ++o) {
    if (auto h = f.t.lookup(static_cast<std::uint8_t>(o))) before[o] = h->ppa;
  }
  const auto levels = f.t.level_count();
  const auto bytes = f.t.byte_size();
  f.t.compact();
  EXPECT_EQ(f.t.check_invariants(), "");
  EXPECT_LT(f.t.level_count(), levels);
  EXPECT_LT(f.t.byte_size(), bytes);
  for (unsigned o = 0; o < 256; ++o) {
    const auto h = f.t.lookup(static_cast<std::uint8_t>(o));
    ASSERT_EQ(h.has_value(), before[o].has_value()) << o;
    if (h) EXPECT_EQ(h->ppa, *before[o]) << o;
  }
}

TEST(GroupTable, CompactingOneLevelChangesNothing) {
  Fig9 f;
  f.t1();
  const GroupTable before = f.t;
  f.t.compact();
  EXPECT_EQ(f.t, before);
}

TEST(GroupTable, SerializeRoundTrip) {
  Fig9 f;
  f.t1();
  f.t2();
  f.t3();
  f.t4();
  const auto bytes = f.t.serialize();
  EXPECT_EQ(GroupTable::deserialize(bytes), f.t);
}

TEST(GroupTable, RejectsInconsistentMembers) {
  GroupTable t;
  const std::vector<std::uint8_t> wrong{10, 11};
  EXPECT_THROW(t.insert(accurate(10, 14, 0.5, 0), wrong), ContractViolation);
  EXPECT_THROW(t.insert(approximate(10, 14, 0.5, 0), wrong), ContractViolation);
}

TEST(MappingTable, Footprint) {
  MappingTable t(1024);
  EXPECT_EQ(t.memory_footprint().total(), 0u);
  FittedSegment s;
  s.start_lpa = 300;
  s.intercept = 5;
  s.member_lpas = {300};
  t.insert(s);
  const auto fp = t.memory_footprint();
  EXPECT_EQ(fp.segment_bytes, 8u);
  EXPECT_EQ(fp.crb_bytes, 0u);
  EXPECT_EQ(fp.overhead_bytes, GroupTable::kLevelOverheadBytes);
  EXPECT_EQ(t.bytes(), fp.total());
}

TEST(MappingTable, SequentialFillIsOneSegmentPerGroup) {
  constexpr std::uint32_t kPages = 1u << 20;
  MappingTable t(kPages);
  std::vector<Lpa> lpas;
  for (Lpa base = 0; base < kPages; base += 256) {
    lpas.clear();
    for (Lpa l = base; l < base + 256; ++l) lpas.push_back(l);
    t.insert_all(learn_segments(oracle::make_batch(lpas, base), 0));
  }
  const std::size_t groups = kPages / 256;
  EXPECT_EQ(t.bytes(), groups * (8 + GroupTable::kLevelOverheadBytes));
}

TEST(MappingTable, RandomWritesMatchFlatMap) {
  std::mt19937_64 rng(21);
  for (std::uint32_t gamma : {0u, 4u, 16u}) {
    constexpr std::uint32_t kPages = 8192;
    MappingTable t(kPages);
    oracle::FlatMap flat;
    Ppa next = 0;
    for (int batch = 0; batch < 40; ++batch) {
      const auto b = oracle::make_batch(oracle::random_lpas(rng, kPages, 256), next);
      next += 256;
      t.insert_all(learn_segments(b, gamma));
      flat.apply(b);
    }
    ASSERT_EQ(t.check_invariants(), "");
    std::map<Lpa, std::int64_t> before;
    for (const auto& [lpa, ppa] : flat.all()) {
      const auto p = t.lookup(lpa);
      ASSERT_TRUE(p) << lpa;
      const std::int64_t err = p->ppa - static_cast<std::int64_t>(ppa);
      EXPECT_LE(std::abs(err), p->accurate ? 0 : static_cast<std::int64_t>(gamma)) << lpa;
      before[lpa] = p->ppa;
    }
    const auto bytes = t.bytes();
    t.seg_compact();
    ASSERT_EQ(t.check_invariants(), "");
    EXPECT_LE(t.bytes(), bytes);
    for (const auto& [lpa, ppa] : before) {
      const auto p = t.lookup(lpa);
      ASSERT_TRUE(p);
      EXPECT_EQ(p->ppa, ppa) << lpa;
    }
    for (Lpa l = 0; l < kPages; ++l) {
      if (!flat.get(l)) EXPECT_FALSE(t.lookup(l)) << l;
    }
  }
}

TEST(MappingTable, RejectsCrossGroupSegment) {
  MappingTable t(1024);
  FittedSegment s;
  s.start_lpa = 250;
  s.length = 10;
  s.slope_bits = quantize_slope(1.0, true);
  s.slope = 1.0;
  EXPECT_THROW(t.insert(s), ContractViolation);
}

TEST(MappingTable, TakeAndPutGroupKeepsByteCount) {
  MappingTable t(2048);
  std::vector<Lpa> lpas{3, 4, 5, 600, 602, 604};
  t.insert_all(learn_segments(oracle::make_batch(lpas, 0), 0));
  const auto bytes = t.bytes();
  auto g = t.take_group(2);
  EXPECT_LT(t.bytes(), bytes);
  EXPECT_FALSE(t.lookup(600));
  t.put_group(2, std::move(g));
  EXPECT_EQ(t.bytes(), bytes);
  EXPECT_EQ(t.lookup(602)->ppa, 4);
}
