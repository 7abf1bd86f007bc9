#include "leaftl/dftl.hpp"

#include <algorithm>

namespace leaftl {

PageMapFtl::PageMapFtl(const FtlConfig& config) : Ftl(config) {
  map_.assign(logical_pages(), kInvalidPpa);
  const std::size_t pages = (logical_pages() + kEntriesPerPage - 1) / kEntriesPerPage;
  tpage_mapped_.assign(pages, 0);
  cached_.assign(pages, false);
  dirty_.assign(pages, false);
  lru_pos_.resize(pages);
}

std::uint64_t PageMapFtl::tpage_cost(std::uint32_t) const {
  return static_cast<std::uint64_t>(kEntriesPerPage) * kEntryBytes;
}

void PageMapFtl::recost(std::uint32_t tp, std::uint64_t old_cost) {
  if (cached_[tp]) {
    resident_bytes_ = resident_bytes_ - old_cost + tpage_cost(tp);
  }
}

void PageMapFtl::evict_one(std::optional<std::uint32_t> keep) {
  std::uint32_t victim = lru_.back();
  if (keep && victim == *keep) {
    lru_.splice(lru_.begin(), lru_, lru_pos_[victim]);
    victim = lru_.back();
  }
  if (dirty_[victim]) {
    ++counters_.translation_writes;
    counters_.background_us += config_.latencies.write_us;
    dirty_[victim] = false;
  }
  resident_bytes_ -= tpage_cost(victim);
  cached_[victim] = false;
  lru_.pop_back();
}

void PageMapFtl::ensure_cached(std::uint32_t tp, double& latency_us) {
  if (cached_[tp]) {
    lru_.splice(lru_.begin(), lru_, lru_pos_[tp]);
    return;
  }
  if (tpage_mapped_[tp] > 0) {
    ++counters_.translation_reads;
    latency_us += config_.latencies.read_us;
  }
  cached_[tp] = true;
  lru_.push_front(tp);
  lru_pos_[tp] = lru_.begin();
  resident_bytes_ += tpage_cost(tp);
  const std::uint64_t limit = mapping_limit();
  while (resident_bytes_ > limit && lru_.size() > 1) {
    evict_one(tp);
  }
}

std::optional<Ftl::Translation> PageMapFtl::translate(Lpa lpa, double& latency_us, bool host) {
  const std::uint32_t tp = lpa / kEntriesPerPage;
  if (tpage_mapped_[tp] == 0) return std::nullopt;
  ensure_cached(tp, latency_us);
  const Ppa p = map_[lpa];
  if (p == kInvalidPpa) return std::nullopt;
  if (host) {
    auto& hist = counters_.lookup_levels;
    if (hist.empty()) hist.resize(1, 0);
    ++hist[0];
  }
  return Translation{p, true, 1};
}

void PageMapFtl::install(std::span<const MappingPoint> points) {
  double latency = 0.0;
  for (const auto& pt : points) {
    const std::uint32_t tp = pt.lpa / kEntriesPerPage;
    ensure_cached(tp, latency);
    const std::uint64_t old_cost = tpage_cost(tp);
    before_update(pt.lpa);
    if (map_[pt.lpa] == kInvalidPpa) {
      ++mapped_;
      ++tpage_mapped_[tp];
    }
    map_[pt.lpa] = pt.ppa;
    after_update(pt.lpa);
    recost(tp, old_cost);
    dirty_[tp] = true;
  }
  counters_.background_us += latency;
}

void PageMapFtl::on_snapshot() {
  for (std::uint32_t tp : lru_) {
    if (dirty_[tp]) {
      ++counters_.translation_writes;
      counters_.background_us += config_.latencies.write_us;
      dirty_[tp] = false;
    }
  }
}

void PageMapFtl::on_crash() {
  std::fill(map_.begin(), map_.end(), kInvalidPpa);
  std::fill(tpage_mapped_.begin(), tpage_mapped_.end(), 0);
  mapped_ = 0;
  std::fill(cached_.begin(), cached_.end(), false);
  std::fill(dirty_.begin(), dirty_.end(), false);
  lru_.clear();
  resident_bytes_ = 0;
}

void PageMapFtl::shrink_mapping(std::uint64_t limit) {
  while (resident_bytes_ > limit && !lru_.empty()) {
    evict_one(std::nullopt);
  }
}

std::string PageMapFtl::check_mapping() const {
  std::uint64_t mapped = 0;
  std::uint64_t resident = 0;
  for (std::uint32_t tp = 0; tp < tpage_mapped_.size(); ++tp) {
    std::uint32_t n = 0;
    const std::size_t lo = static_cast<std::size_t>(tp) * kEntriesPerPage;
    const std::size_t hi = std::min(map_.size(), lo + kEntriesPerPage);
    for (std::size_t i = lo; i < hi; ++i) {
      if (map_[i] != kInvalidPpa) {
        ++n;
        if (!flash().is_valid(map_[i]) || flash().stored_lpa(map_[i]) != i) {
          return "entry for lpa " + std::to_string(i) + " does not point at its live page";
        }
      }
    }
    if (n != tpage_mapped_[tp]) return "translation page count out of sync";
    mapped += n;
    if (cached_[tp]) resident += tpage_cost(tp);
  }
  if (mapped != mapped_) return "mapped entry count out of sync";
  if (resident != resident_bytes_) return "resident byte count out of sync";
  return {};
}

}  // namespace leaftl
