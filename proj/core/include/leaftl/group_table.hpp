#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leaftl/crb.hpp"
#include "leaftl/segment.hpp"

namespace leaftl {

struct LookupHit {
  std::int64_t ppa = 0;
  bool accurate = true;
  std::uint32_t level = 0;  // 0 is the newest level
};

/// Log-structured segment table of one 256-LPA group.
///
/// Level 0 holds the newest segments. Segments within a level are sorted by
/// start offset and never overlap; segments in different levels may overlap,
/// and the shallowest segment indexing an offset wins.
class GroupTable {
 public:
  /// Fixed bookkeeping charge per level.
  static constexpr std::size_t kLevelOverheadBytes = 16;

  using Level = std::vector<EncodedSegment>;

  /// Inserts a freshly learned segment at level 0. `members` lists the group
  /// offsets the segment indexes; it is required for approximate segments and
  /// validated against the stride rule for accurate ones.
  void insert(const EncodedSegment& segment, std::span<const std::uint8_t> members);

  /// Inserts `segment` into `level`, merging and demoting every overlapped
  /// segment there. When `registered` is true an approximate segment's run is
  /// already present in the CRB (the segment is being moved by compaction).
  void seg_update(EncodedSegment segment, std::span<const std::uint8_t> members,
                  std::size_t level, bool registered = false);

  std::optional<LookupHit> lookup(std::uint8_t offset) const;

  bool has_lpa(const EncodedSegment& segment, std::uint8_t offset) const;

  /// Bit i is set iff has_lpa(segment, start + i).
  std::vector<bool> get_bitmap(const EncodedSegment& segment, std::uint8_t start,
                               std::uint8_t end) const;

  /// Invalidates the offsets of `older` that `newer` indexes, tightening
  /// `older` to its surviving members. Returns true when nothing survives
  /// (the segment is removable). Slope and intercept are never touched.
  bool seg_merge(const EncodedSegment& newer, EncodedSegment& older);

  void compact();

  const std::vector<Level>& levels() const { return levels_; }
  const Crb& crb() const { return crb_; }
  bool empty() const { return levels_.empty(); }
  std::size_t segment_count() const;
  std::size_t level_count() const { return levels_.size(); }
  std::size_t segment_bytes() const { return segment_count() * sizeof(EncodedSegment); }
  std::size_t crb_bytes() const { return crb_.byte_size(); }
  std::size_t overhead_bytes() const { return levels_.size() * kLevelOverheadBytes; }
  std::size_t byte_size() const { return segment_bytes() + crb_bytes() + overhead_bytes(); }

  /// Translation-page payload, little-endian:
  ///   u16 level_count; per level: u16 n, n x 8-byte segments;
  ///   u16 crb_length; crb bytes.
  std::vector<std::uint8_t> serialize() const;
  static GroupTable deserialize(std::span<const std::uint8_t> bytes);

  std::string check_invariants() const;

  friend bool operator==(const GroupTable&, const GroupTable&) = default;

 private:
  OffsetSet members_of(const EncodedSegment& segment) const;
  void apply_shift(const Crb::Shift& shift);
  void drop_empty_levels(std::size_t keep);
  bool conflicts(const Level& level, const EncodedSegment& segment) const;
  static void insert_sorted(Level& level, const EncodedSegment& segment);

  std::vector<Level> levels_;
  Crb crb_;
};

}  // namespace leaftl
