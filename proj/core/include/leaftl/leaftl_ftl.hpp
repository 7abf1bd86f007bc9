#pragma once

#include <cstdint>
#include <list>
#include <vector>

#include "leaftl/ftl.hpp"
#include "leaftl/mapping_table.hpp"

namespace leaftl {

/// Learned FTL: flush batches are learned into segments of a log-structured
/// per-group table. Groups can be evicted to translation pages (tracked by
/// the global mapping directory) and are relearned from OOB metadata after a
/// crash.
class LeaFtl final : public Ftl {
 public:
  explicit LeaFtl(const FtlConfig& config);

  FtlKind kind() const override { return FtlKind::LeaFtl; }
  std::uint64_t mapping_bytes() const override { return table_.bytes() + evicted_bytes_; }
  std::uint64_t resident_mapping_bytes() const override { return table_.bytes(); }
  void compact() override;

  const MappingTable& table() const { return table_; }
  bool group_resident(std::uint32_t group) const { return resident_.at(group); }
  /// Groups with an entry in the global mapping directory.
  std::size_t gmd_entries() const;

  /// Writes the group to its translation page and drops it from DRAM.
  void evict_group(std::uint32_t group);
  /// Reads the group back; adds one translation read to `latency_us`.
  void load_group(std::uint32_t group, double& latency_us);

 protected:
  std::optional<Translation> translate(Lpa lpa, double& latency_us, bool host) override;
  void install(std::span<const MappingPoint> points) override;
  void on_snapshot() override;
  void on_crash() override;
  void restore_snapshot() override;
  bool incremental_recovery() const override { return true; }
  void shrink_mapping(std::uint64_t limit) override;
  std::string check_mapping() const override;

 private:
  void touch(std::uint32_t group);
  void forget(std::uint32_t group);
  void shrink_except(std::uint64_t limit, std::optional<std::uint32_t> keep);

  MappingTable table_;
  std::vector<bool> resident_;
  std::uint64_t evicted_bytes_ = 0;
  std::vector<std::uint32_t> evicted_size_;

  // Translation pages, one per group, addressed through the directory.
  std::vector<std::vector<std::uint8_t>> tpages_;
  std::vector<bool> in_gmd_;
  std::vector<bool> dirty_;

  // Last snapshot of the whole table.
  std::vector<std::vector<std::uint8_t>> snap_;
  std::vector<std::uint32_t> snap_size_;
  std::vector<bool> in_snap_;
  std::vector<bool> snap_dirty_;

  std::list<std::uint32_t> lru_;  // resident, non-empty groups; front is most recent
  std::vector<std::list<std::uint32_t>::iterator> lru_pos_;
  std::vector<bool> in_lru_;
};

}  // namespace leaftl
