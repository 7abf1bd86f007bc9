#pragma once

#include <cstdint>
#include <list>
#include <vector>

#include "leaftl/ftl.hpp"

namespace leaftl {

/// Page-level mapping split into 4 KB translation pages of 512 entries, with
/// an LRU cache of translation pages in DRAM. The full map stands in for the
/// translation pages on flash; misses and dirty evictions are charged as
/// translation reads and writes.
class PageMapFtl : public Ftl {
 public:
  static constexpr std::uint32_t kEntryBytes = 8;
  static constexpr std::uint32_t kEntriesPerPage = 512;

  explicit PageMapFtl(const FtlConfig& config);

  std::uint64_t resident_mapping_bytes() const override { return resident_bytes_; }
  std::uint64_t mapped_entries() const { return mapped_; }
  std::size_t cached_translation_pages() const { return lru_.size(); }
  std::size_t translation_pages() const { return tpage_mapped_.size(); }

 protected:
  std::optional<Translation> translate(Lpa lpa, double& latency_us, bool host) override;
  void install(std::span<const MappingPoint> points) override;
  void on_snapshot() override;
  void on_crash() override;
  void shrink_mapping(std::uint64_t limit) override;
  std::string check_mapping() const override;

  /// DRAM cost of holding translation page `tp`.
  virtual std::uint64_t tpage_cost(std::uint32_t tp) const;
  /// Called around every entry update, with the page holding `lpa`.
  virtual void before_update(Lpa) {}
  virtual void after_update(Lpa) {}

  Ppa entry(Lpa lpa) const { return map_[lpa]; }
  /// Re-reads the DRAM cost of a cached page after its contents changed.
  void recost(std::uint32_t tp, std::uint64_t old_cost);
  bool cached(std::uint32_t tp) const { return cached_[tp]; }

 private:
  void ensure_cached(std::uint32_t tp, double& latency_us);
  void evict_one(std::optional<std::uint32_t> keep);

  std::vector<Ppa> map_;
  std::uint64_t mapped_ = 0;
  std::vector<std::uint32_t> tpage_mapped_;
  std::vector<bool> cached_;
  std::vector<bool> dirty_;
  std::list<std::uint32_t> lru_;
  std::vector<std::list<std::uint32_t>::iterator> lru_pos_;
  std::uint64_t resident_bytes_ = 0;
};

class Dftl final : public PageMapFtl {
 public:
  explicit Dftl(const FtlConfig& config) : PageMapFtl(config) {}
  FtlKind kind() const override { return FtlKind::Dftl; }
  std::uint64_t mapping_bytes() const override { return kEntryBytes * mapped_entries(); }
};

}  // namespace leaftl
