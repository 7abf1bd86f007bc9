#pragma once

#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace leaftl {

using OffsetSet = std::bitset<256>;

/// Conflict resolution buffer of one LPA group.
///
/// Holds, for every approximate segment of the group, the sorted list of group
/// offsets it indexes. Runs are ordered by their first offset, which is also
/// the start offset of the owning segment. An offset appears in at most one
/// run. Runs of segments from different levels may interleave, so the
/// concatenation is only nearly sorted.
class Crb {
 public:
  /// A run whose first offset moved, or that became empty, because a newer
  /// run claimed some of its offsets.
  struct Shift {
    std::uint8_t old_start = 0;
    std::optional<std::uint8_t> new_start;  // empty when the run vanished
    std::uint8_t new_last = 0;
  };

  /// Adds a run for a new approximate segment. Offsets already owned by older
  /// runs are taken away from them first; the affected runs are reported.
  std::vector<Shift> insert_run(std::span<const std::uint8_t> offsets);

  /// Removes `drop` from the run starting at `run_start`. Returns the run's new
  /// shape, or a Shift with empty new_start if it vanished.
  Shift remove_offsets(std::uint8_t run_start, const OffsetSet& drop);

  void erase_run(std::uint8_t run_start);

  /// Start offset of the run containing `offset`.
  std::optional<std::uint8_t> owner(std::uint8_t offset) const;
  OffsetSet members(std::uint8_t run_start) const;
  bool has_run(std::uint8_t run_start) const;

  bool empty() const { return runs_.empty(); }
  std::size_t run_count() const { return runs_.size(); }
  std::size_t offset_count() const;

  /// Encoded size: one length byte per run plus one byte per offset.
  std::size_t byte_size() const { return offset_count() + runs_.size(); }

  /// Appends the encoded form: per run, (length - 1) then the offsets.
  void serialize(std::vector<std::uint8_t>& out) const;
  static Crb parse(std::span<const std::uint8_t> bytes);

  /// Empty string when all structural invariants hold.
  std::string check_invariants() const;

  const std::vector<std::vector<std::uint8_t>>& runs() const { return runs_; }

  friend bool operator==(const Crb&, const Crb&) = default;

 private:
  std::vector<std::vector<std::uint8_t>>::iterator find_run(std::uint8_t run_start);
  std::vector<std::vector<std::uint8_t>>::const_iterator find_run(std::uint8_t run_start) const;

  std::vector<std::vector<std::uint8_t>> runs_;
};

}  // namespace leaftl
