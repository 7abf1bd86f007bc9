#include "leaftl/leaftl_ftl.hpp"

#include <algorithm>

namespace leaftl {

LeaFtl::LeaFtl(const FtlConfig& config) : Ftl(config), table_(logical_pages()) {
  const std::size_t groups = table_.group_count();
  resident_.assign(groups, true);
  evicted_size_.assign(groups, 0);
  tpages_.resize(groups);
  in_gmd_.assign(groups, false);
  dirty_.assign(groups, false);
  snap_.resize(groups);
  snap_size_.assign(groups, 0);
  in_snap_.assign(groups, false);
  snap_dirty_.assign(groups, false);
  lru_pos_.resize(groups);
  in_lru_.assign(groups, false);
}

std::size_t LeaFtl::gmd_entries() const {
  return static_cast<std::size_t>(std::count(in_gmd_.begin(), in_gmd_.end(), true));
}

void LeaFtl::touch(std::uint32_t group) {
  if (in_lru_[group]) {
    lru_.splice(lru_.begin(), lru_, lru_pos_[group]);
  } else {
    lru_.push_front(group);
    lru_pos_[group] = lru_.begin();
    in_lru_[group] = true;
  }
}

void LeaFtl::forget(std::uint32_t group) {
  if (in_lru_[group]) {
    lru_.erase(lru_pos_[group]);
    in_lru_[group] = false;
  }
}

void LeaFtl::evict_group(std::uint32_t group) {
  if (!resident_.at(group)) return;
  const std::size_t bytes = table_.group_bytes(group);
  if (bytes == 0) {
    forget(group);
    return;
  }
  if (dirty_[group] || !in_gmd_[group]) {
    tpages_[group] = table_.group(group).serialize();
    in_gmd_[group] = true;
    dirty_[group] = false;
    ++counters_.translation_writes;
    counters_.background_us += config_.latencies.write_us;
  }
  table_.take_group(group);
  resident_[group] = false;
  evicted_size_[group] = static_cast<std::uint32_t>(bytes);
  evicted_bytes_ += bytes;
  forget(group);
  ++counters_.group_evictions;
}

void LeaFtl::load_group(std::uint32_t group, double& latency_us) {
  if (resident_.at(group)) return;
  if (in_gmd_[group]) {
    table_.put_group(group, GroupTable::deserialize(tpages_[group]));
    ++counters_.translation_reads;
    latency_us += config_.latencies.read_us;
  }
  resident_[group] = true;
  evicted_bytes_ -= evicted_size_[group];
  evicted_size_[group] = 0;
  ++counters_.group_loads;
  touch(group);
  shrink_except(mapping_limit(), group);
}

void LeaFtl::shrink_except(std::uint64_t limit, std::optional<std::uint32_t> keep) {
  while (table_.bytes() > limit && !lru_.empty()) {
    const std::uint32_t victim = lru_.back();
    if (keep && victim == *keep) {
      if (lru_.size() == 1) break;
      lru_.splice(lru_.begin(), lru_, lru_pos_[victim]);
      continue;
    }
    evict_group(victim);
  }
}

void LeaFtl::shrink_mapping(std::uint64_t limit) { shrink_except(limit, std::nullopt); }

std::optional<Ftl::Translation> LeaFtl::translate(Lpa lpa, double& latency_us, bool host) {
  const std::uint32_t g = group_of(lpa);
  if (!resident_[g]) load_group(g, latency_us);
  if (in_lru_[g]) touch(g);
  const auto p = table_.lookup(lpa);
  if (!p) return std::nullopt;
  if (host) {
    auto& hist = counters_.lookup_levels;
    if (hist.size() < p->levels_probed) hist.resize(p->levels_probed, 0);
    ++hist[p->levels_probed - 1];
  }
  return Translation{p->ppa, p->accurate, p->levels_probed};
}

void LeaFtl::install(std::span<const MappingPoint> points) {
  const auto segments = learn_segments(points, config_.gamma);
  for (const auto& s : segments) {
    const std::uint32_t g = group_of(s.start_lpa);
    if (!resident_[g]) {
      double latency = 0.0;
      load_group(g, latency);
      counters_.background_us += latency;
    }
    table_.insert(s);
    dirty_[g] = true;
    snap_dirty_[g] = true;
    touch(g);
  }
}

void LeaFtl::compact() {
  ++counters_.compactions;
  table_.seg_compact();
  // Evicted groups are compacted through their translation pages.
  for (std::uint32_t g = 0; g < resident_.size(); ++g) {
    if (resident_[g] || !in_gmd_[g]) continue;
    GroupTable t = GroupTable::deserialize(tpages_[g]);
    if (t.level_count() <= 1) continue;
    t.compact();
    const auto bytes = static_cast<std::uint32_t>(t.byte_size());
    ++counters_.translation_reads;
    counters_.background_us += config_.latencies.read_us;
    if (bytes == evicted_size_[g]) continue;
    tpages_[g] = t.serialize();
    evicted_bytes_ = evicted_bytes_ - evicted_size_[g] + bytes;
    evicted_size_[g] = bytes;
    snap_dirty_[g] = true;
    ++counters_.translation_writes;
    counters_.background_us += config_.latencies.write_us;
  }
}

void LeaFtl::on_snapshot() {
  std::uint64_t bytes = 0;
  for (std::uint32_t g = 0; g < snap_dirty_.size(); ++g) {
    if (!snap_dirty_[g]) continue;
    if (resident_[g]) {
      snap_[g] = table_.group(g).serialize();
      snap_size_[g] = static_cast<std::uint32_t>(table_.group_bytes(g));
    } else {
      snap_[g] = tpages_[g];
      snap_size_[g] = evicted_size_[g];
    }
    in_snap_[g] = true;
    bytes += snap_[g].size();
    snap_dirty_[g] = false;
  }
  const std::uint64_t page = config_.geometry.page_size;
  const std::uint64_t pages = (bytes + page - 1) / page;
  counters_.translation_writes += pages;
  counters_.background_us += static_cast<double>(pages) * config_.latencies.write_us;
}

void LeaFtl::on_crash() {
  table_ = MappingTable(logical_pages());
  std::fill(resident_.begin(), resident_.end(), true);
  std::fill(evicted_size_.begin(), evicted_size_.end(), 0);
  evicted_bytes_ = 0;
  for (auto& t : tpages_) t.clear();
  std::fill(in_gmd_.begin(), in_gmd_.end(), false);
  std::fill(dirty_.begin(), dirty_.end(), false);
  lru_.clear();
  std::fill(in_lru_.begin(), in_lru_.end(), false);
}

void LeaFtl::restore_snapshot() {
  // The snapshot doubles as the translation pages: every persisted group
  // starts evicted and is loaded on first use.
  for (std::uint32_t g = 0; g < in_snap_.size(); ++g) {
    if (!in_snap_[g] || snap_size_[g] == 0) continue;
    tpages_[g] = snap_[g];
    in_gmd_[g] = true;
    resident_[g] = false;
    evicted_size_[g] = snap_size_[g];
    evicted_bytes_ += snap_size_[g];
  }
}

std::string LeaFtl::check_mapping() const {
  if (auto err = table_.check_invariants(); !err.empty()) return err;
  std::uint64_t evicted = 0;
  for (std::uint32_t g = 0; g < resident_.size(); ++g) {
    if (!resident_[g]) {
      evicted += evicted_size_[g];
      if (table_.group_bytes(g) != 0) return "evicted group " + std::to_string(g) + " still resident";
    }
  }
  if (evicted != evicted_bytes_) return "evicted byte count out of sync";
  return {};
}

}  // namespace leaftl
