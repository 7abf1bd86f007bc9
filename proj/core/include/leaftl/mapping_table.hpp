#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leaftl/group_table.hpp"
#include "leaftl/plr.hpp"

namespace leaftl {

struct MappingFootprint {
  std::size_t segment_bytes = 0;
  std::size_t crb_bytes = 0;
  std::size_t overhead_bytes = 0;
  std::size_t segments = 0;
  std::size_t levels = 0;

  std::size_t total() const { return segment_bytes + crb_bytes + overhead_bytes; }
};

struct Prediction {
  std::int64_t ppa = 0;
  bool accurate = true;
  std::uint32_t levels_probed = 1;
};

/// Learned mapping table: one GroupTable per 256-LPA group.
///
/// Readers may share a table; inserts and compaction need exclusive access.
class MappingTable {
 public:
  explicit MappingTable(std::uint64_t logical_pages = 0);

  void insert(const FittedSegment& segment);
  void insert_all(std::span<const FittedSegment> segments);

  std::optional<Prediction> lookup(Lpa lpa) const;

  /// Compacts every group; returns the number of groups touched.
  std::size_t seg_compact();

  MappingFootprint memory_footprint() const;
  std::size_t bytes() const { return bytes_; }

  std::size_t group_count() const { return groups_.size(); }
  const GroupTable& group(std::uint32_t id) const { return groups_.at(id); }
  std::size_t group_bytes(std::uint32_t id) const { return groups_.at(id).byte_size(); }

  /// Swaps a whole group in or out (translation-page persistence).
  GroupTable take_group(std::uint32_t id);
  void put_group(std::uint32_t id, GroupTable table);

  std::string check_invariants() const;

 private:
  GroupTable& mutable_group(std::uint32_t id);

  std::vector<GroupTable> groups_;
  std::size_t bytes_ = 0;
};

}  // namespace leaftl
