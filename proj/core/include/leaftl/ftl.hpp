#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "leaftl/flash.hpp"
#include "leaftl/plr.hpp"

namespace leaftl {

enum class FtlKind { LeaFtl, Dftl, Sftl };

std::string to_string(FtlKind kind);
/// Accepts "leaftl", "dftl", "sftl" (case-insensitive).
std::optional<FtlKind> parse_ftl_kind(std::string_view name);

enum class DramPolicy {
  MappingFirst,  // the mapping table may use all of DRAM
  Capped,        // mapping table limited to 80% of DRAM, the rest is data cache
};

struct FtlConfig {
  Geometry geometry;
  Latencies latencies;
  std::uint32_t gamma = 0;
  std::uint64_t dram_bytes = 1ULL << 30;
  DramPolicy dram_policy = DramPolicy::Capped;
  std::uint64_t buffer_bytes = 8ULL << 20;
  std::uint64_t compaction_interval = 1'000'000;  // host page writes; 0 disables
  std::uint64_t snapshot_interval = 1'000'000;    // host page writes; 0 disables
  bool snapshot_on_gc = true;
  double gc_trigger = 0.15;  // free-block fraction that starts GC
  double gc_stop = 0.25;     // free-block fraction that ends GC
  std::uint32_t wear_threshold = 0;  // max-min erase count spread; 0 disables

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct FtlCounters {
  std::uint64_t host_reads = 0;
  std::uint64_t host_writes = 0;
  std::uint64_t host_pages_flushed = 0;
  std::uint64_t unmapped_reads = 0;
  std::uint64_t buffer_hits = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t mispredictions = 0;
  std::uint64_t extra_reads = 0;  // corrective reads after a misprediction
  std::uint64_t max_extra_reads_per_read = 0;
  std::uint64_t invalidation_reads = 0;
  std::uint64_t translation_reads = 0;
  std::uint64_t translation_writes = 0;
  std::uint64_t group_evictions = 0;
  std::uint64_t group_loads = 0;
  std::uint64_t gc_invocations = 0;
  std::uint64_t gc_victims = 0;
  std::uint64_t gc_pages_moved = 0;
  std::uint64_t wl_swaps = 0;
  std::uint64_t wl_pages_moved = 0;
  std::uint64_t compactions = 0;
  std::uint64_t snapshots = 0;
  std::uint64_t recoveries = 0;
  std::uint64_t recovery_blocks_relearned = 0;
  std::uint64_t recovery_reads = 0;
  double background_us = 0.0;
  /// lookup_levels[i] counts translations that resolved after probing i+1 levels.
  std::vector<std::uint64_t> lookup_levels;
};

struct ReadResult {
  bool mapped = false;
  PayloadId payload = 0;
  double latency_us = 0.0;
  bool cache_hit = false;
  bool mispredicted = false;
  std::uint32_t flash_reads = 0;  // data-area reads charged to this request
};

struct WriteResult {
  double latency_us = 0.0;
};

struct RecoveryReport {
  bool from_snapshot = false;
  std::uint64_t blocks_relearned = 0;
  std::uint64_t pages_scanned = 0;
};

/// Shared engine: write buffer, data cache, block allocation, GC, wear
/// leveling, DRAM budget and crash handling. Subclasses own the mapping
/// scheme through translate() and install().
class Ftl {
 public:
  explicit Ftl(const FtlConfig& config);
  virtual ~Ftl() = default;
  Ftl(const Ftl&) = delete;
  Ftl& operator=(const Ftl&) = delete;

  virtual FtlKind kind() const = 0;

  WriteResult write(Lpa lpa, PayloadId payload);
  ReadResult read(Lpa lpa);

  /// Programs whatever the write buffer holds, even a partial block.
  void flush();
  void run_gc();
  bool wear_level();
  void snapshot();
  /// Power loss: the buffer is drained by its hold-up energy, every other
  /// piece of DRAM state is lost.
  void crash();
  RecoveryReport recover();

  /// Current mapping-table size, resident or not.
  virtual std::uint64_t mapping_bytes() const = 0;
  /// Part of the mapping table held in DRAM.
  virtual std::uint64_t resident_mapping_bytes() const = 0;
  virtual void compact() {}

  std::uint64_t logical_pages() const { return logical_pages_; }
  const FtlConfig& config() const { return config_; }
  const FlashDevice& flash() const { return flash_; }
  const FtlCounters& counters() const { return counters_; }
  std::size_t free_blocks() const { return free_count_; }
  std::size_t cache_pages() const { return cache_.size(); }
  std::size_t cache_capacity_pages() const;
  std::size_t buffered_pages() const { return buffer_.size(); }
  bool has_snapshot() const { return has_snapshot_; }

  /// flash writes (host + relocation) per host page flushed; 0 before any flush.
  double waf() const;

  /// Full check of flash invariants, the free pool, and mapping-specific
  /// invariants. Empty string when consistent.
  std::string check_invariants() const;

 protected:
  struct Translation {
    std::int64_t ppa = 0;
    bool exact = true;
    std::uint32_t levels_probed = 1;
  };

  /// Maps `lpa` to a physical page. `latency_us` accumulates translation
  /// metadata reads. Host lookups set `host` so level statistics are kept.
  virtual std::optional<Translation> translate(Lpa lpa, double& latency_us, bool host) = 0;
  /// Records new locations for points sorted by LPA, all in one block.
  virtual void install(std::span<const MappingPoint> points) = 0;
  virtual void on_snapshot() {}
  virtual void on_crash() = 0;
  /// Restores the mapping persisted by the last snapshot.
  virtual void restore_snapshot() {}
  virtual bool incremental_recovery() const { return false; }
  /// Brings the resident mapping under `limit` bytes.
  virtual void shrink_mapping(std::uint64_t limit) = 0;
  virtual std::string check_mapping() const { return {}; }

  std::uint64_t mapping_limit() const;
  void enforce_budget();

  FtlCounters counters_;
  FtlConfig config_;

 private:
  struct BufferEntry {
    Lpa lpa;
    PayloadId payload;
  };
  struct BlockSnapshot {
    std::uint32_t erase_count = 0;
    std::uint64_t seq = 0;
    std::vector<bool> valid;
  };

  void flush_pages(std::size_t count);
  /// Programs `pages` (sorted by LPA) into one free block and installs them.
  /// Host flushes invalidate the previous copies first; relocations do not,
  /// since their source block is erased.
  void place_sorted(std::span<const PageWrite> pages, bool invalidate_old,
                    std::optional<std::uint32_t> target);
  std::optional<Ppa> locate_current(Lpa lpa, bool strict);
  void invalidate_previous(Lpa lpa, bool strict);
  std::uint32_t allocate_block();
  std::uint32_t take_free(std::uint32_t block);
  void release_free(std::uint32_t block);
  void rebuild_free_pool();
  std::optional<std::uint32_t> pick_victim() const;
  std::size_t gc_stop_blocks() const;
  void relocate(std::vector<PageWrite>& staging, bool final_chunk, std::uint64_t& moved);
  void after_flush();
  void mark_block(std::uint32_t block) { block_dirty_[block] = true; }
  void invalidate_page(Ppa ppa);
  void replay_block(std::uint32_t block);

  void cache_insert(Lpa lpa, PayloadId payload);
  void cache_erase(Lpa lpa);
  void trim_cache();

  FlashDevice flash_;
  std::uint64_t logical_pages_;
  std::size_t flush_threshold_;

  std::vector<BufferEntry> buffer_;
  std::unordered_map<Lpa, std::size_t> buffer_index_;

  std::list<std::pair<Lpa, PayloadId>> cache_lru_;  // front is most recent
  std::unordered_map<Lpa, std::list<std::pair<Lpa, PayloadId>>::iterator> cache_;

  std::vector<std::set<std::pair<std::uint32_t, std::uint32_t>>> free_sets_;  // per channel
  std::vector<bool> is_free_;
  std::size_t free_count_ = 0;
  std::uint32_t next_channel_ = 0;
  bool in_gc_ = false;
  double foreground_us_ = 0.0;

  std::uint64_t writes_since_compaction_ = 0;
  std::uint64_t writes_since_snapshot_ = 0;

  bool has_snapshot_ = false;
  std::vector<BlockSnapshot> snap_blocks_;
  std::vector<bool> block_dirty_;
};

std::unique_ptr<Ftl> make_ftl(FtlKind kind, const FtlConfig& config);

}  // namespace leaftl
