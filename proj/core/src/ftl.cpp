#include "leaftl/ftl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "leaftl/dftl.hpp"
#include "leaftl/leaftl_ftl.hpp"
#include "leaftl/sftl.hpp"

namespace leaftl {

std::string to_string(FtlKind kind) {
  switch (kind) {
    case FtlKind::LeaFtl:
      return "leaftl";
    case FtlKind::Dftl:
      return "dftl";
    case FtlKind::Sftl:
      return "sftl";
  }
  return "unknown";
}

std::optional<FtlKind> parse_ftl_kind(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "leaftl") return FtlKind::LeaFtl;
  if (s == "dftl") return FtlKind::Dftl;
  if (s == "sftl") return FtlKind::Sftl;
  return std::nullopt;
}

void FtlConfig::validate() const {
  geometry.validate(gamma);
  if (latencies.read_us < 0 || latencies.write_us < 0 || latencies.erase_us < 0) {
    throw std::invalid_argument("latencies must be non-negative");
  }
  if (dram_bytes == 0) throw std::invalid_argument("dram must be positive");
  if (buffer_bytes < geometry.page_size) {
    throw std::invalid_argument("buffer must hold at least one page");
  }
  if (!(gc_trigger > 0.0 && gc_trigger < 1.0)) {
    throw std::invalid_argument("gc_trigger must be in (0, 1)");
  }
  if (!(gc_stop > gc_trigger && gc_stop <= 1.0)) {
    throw std::invalid_argument("gc_stop must be in (gc_trigger, 1]");
  }
  if (geometry.logical_pages() == 0) {
    throw std::invalid_argument("device has no logical pages");
  }
}

Ftl::Ftl(const FtlConfig& config)
    : config_(config),
      flash_(config.geometry, config.latencies, config.gamma),
      logical_pages_(config.geometry.logical_pages()) {
  config_.validate();
  flush_threshold_ = std::min<std::size_t>(config_.geometry.pages_per_block,
                                           config_.buffer_bytes / config_.geometry.page_size);
  const std::uint32_t blocks = config_.geometry.total_blocks();
  free_sets_.resize(config_.geometry.channels);
  is_free_.assign(blocks, false);
  block_dirty_.assign(blocks, false);
  snap_blocks_.resize(blocks);
  for (auto& s : snap_blocks_) {
    s.valid.assign(config_.geometry.pages_per_block, false);
  }
  rebuild_free_pool();
}

std::uint64_t Ftl::mapping_limit() const {
  if (config_.dram_policy == DramPolicy::Capped) {
    return config_.dram_bytes / 10 * 8 + (config_.dram_bytes % 10) * 8 / 10;
  }
  return config_.dram_bytes;
}

std::size_t Ftl::cache_capacity_pages() const {
  const std::uint64_t used = resident_mapping_bytes();
  if (used >= config_.dram_bytes) return 0;
  return static_cast<std::size_t>((config_.dram_bytes - used) / config_.geometry.page_size);
}

void Ftl::enforce_budget() {
  shrink_mapping(mapping_limit());
  trim_cache();
}

double Ftl::waf() const {
  if (counters_.host_pages_flushed == 0) return 0.0;
  return static_cast<double>(flash_.writes()) / static_cast<double>(counters_.host_pages_flushed);
}

// ---- data cache -----------------------------------------------------------

void Ftl::cache_insert(Lpa lpa, PayloadId payload) {
  if (cache_capacity_pages() == 0) return;
  auto it = cache_.find(lpa);
  if (it != cache_.end()) {
    it->second->second = payload;
    cache_lru_.splice(cache_lru_.begin(), cache_lru_, it->second);
    return;
  }
  cache_lru_.emplace_front(lpa, payload);
  cache_.emplace(lpa, cache_lru_.begin());
  trim_cache();
}

void Ftl::cache_erase(Lpa lpa) {
  auto it = cache_.find(lpa);
  if (it == cache_.end()) return;
  cache_lru_.erase(it->second);
  cache_.erase(it);
}

void Ftl::trim_cache() {
  const std::size_t cap = cache_capacity_pages();
  while (cache_.size() > cap) {
    cache_.erase(cache_lru_.back().first);
    cache_lru_.pop_back();
  }
}

// ---- host interface ---------------------------------------------------------

WriteResult Ftl::write(Lpa lpa, PayloadId payload) {
  if (lpa >= logical_pages_) {
    throw std::out_of_range("write: lpa " + std::to_string(lpa) + " beyond logical capacity");
  }
  ++counters_.host_writes;
  ++writes_since_compaction_;
  ++writes_since_snapshot_;
  cache_erase(lpa);
  if (auto it = buffer_index_.find(lpa); it != buffer_index_.end()) {
    buffer_[it->second].payload = payload;
  } else {
    buffer_index_.emplace(lpa, buffer_.size());
    buffer_.push_back({lpa, payload});
  }
  WriteResult r;
  if (buffer_.size() >= flush_threshold_) {
    const double before = foreground_us_;
    flush_pages(buffer_.size());
    r.latency_us = foreground_us_ - before;
  }
  return r;
}

ReadResult Ftl::read(Lpa lpa) {
  if (lpa >= logical_pages_) {
    throw std::out_of_range("read: lpa " + std::to_string(lpa) + " beyond logical capacity");
  }
  ++counters_.host_reads;
  ReadResult r;
  if (auto it = buffer_index_.find(lpa); it != buffer_index_.end()) {
    ++counters_.buffer_hits;
    r.mapped = true;
    r.cache_hit = true;
    r.payload = buffer_[it->second].payload;
    return r;
  }
  if (auto it = cache_.find(lpa); it != cache_.end()) {
    ++counters_.cache_hits;
    cache_lru_.splice(cache_lru_.begin(), cache_lru_, it->second);
    r.mapped = true;
    r.cache_hit = true;
    r.payload = it->second->second;
    return r;
  }
  ++counters_.cache_misses;

  double latency = 0.0;
  const auto t = translate(lpa, latency, true);
  if (!t) {
    ++counters_.unmapped_reads;
    r.latency_us = latency;
    return r;
  }
  if (t->ppa < 0 || static_cast<std::uint64_t>(t->ppa) >= flash_.geometry().total_pages()) {
    throw ModelViolation("translation of lpa " + std::to_string(lpa) + " left the device");
  }
  const auto predicted = static_cast<Ppa>(t->ppa);
  Ppa actual = predicted;
  if (t->exact) {
    const PageRead page = flash_.read_page_header(predicted);
    latency += page.elapsed_us;
    r.flash_reads = 1;
    if (page.lpa != lpa) {
      throw ModelViolation("exact translation of lpa " + std::to_string(lpa) +
                           " reached a page holding lpa " + std::to_string(page.lpa));
    }
    r.payload = page.payload;
  } else {
    const CorrectionResult c = flash_.correct_misprediction(predicted, lpa);
    latency += c.elapsed_us;
    r.flash_reads = c.reads;
    actual = c.ppa;
    if (c.mispredicted) {
      const PageRead page = flash_.read_page_header(c.ppa);
      latency += page.elapsed_us;
      ++r.flash_reads;
      ++counters_.mispredictions;
      ++counters_.extra_reads;
      counters_.max_extra_reads_per_read = std::max<std::uint64_t>(counters_.max_extra_reads_per_read, 1);
      r.mispredicted = true;
      r.payload = page.payload;
    } else {
      r.payload = flash_.stored_payload(c.ppa);
    }
  }
  if (!flash_.is_valid(actual)) {
    throw ModelViolation("lpa " + std::to_string(lpa) + " translated to invalid ppa " +
                         std::to_string(actual));
  }
  r.mapped = true;
  r.latency_us = latency;
  cache_insert(lpa, r.payload);
  return r;
}

void Ftl::flush() {
  if (!buffer_.empty()) {
    flush_pages(buffer_.size());
  }
}

// ---- flush path -------------------------------------------------------------

void Ftl::flush_pages(std::size_t count) {
  count = std::min(count, buffer_.size());
  if (count == 0) return;
  std::vector<PageWrite> pages;
  pages.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    pages.push_back({buffer_[i].lpa, buffer_[i].payload});
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(count));
  buffer_index_.clear();
  for (std::size_t i = 0; i < buffer_.size(); ++i) {
    buffer_index_.emplace(buffer_[i].lpa, i);
  }
  std::sort(pages.begin(), pages.end(),
            [](const PageWrite& a, const PageWrite& b) { return a.lpa < b.lpa; });
  place_sorted(pages, true, std::nullopt);
  counters_.host_pages_flushed += count;
  after_flush();
}

void Ftl::place_sorted(std::span<const PageWrite> pages, bool invalidate_old,
                       std::optional<std::uint32_t> target) {
  const std::uint32_t block = target ? take_free(*target) : allocate_block();
  if (invalidate_old) {
    for (const auto& p : pages) {
      invalidate_previous(p.lpa, true);
    }
  }
  const ProgramResult res = flash_.program_block(block, pages);
  mark_block(block);
  counters_.background_us += res.elapsed_us;
  std::vector<MappingPoint> points;
  points.reserve(pages.size());
  for (std::size_t i = 0; i < pages.size(); ++i) {
    points.push_back({pages[i].lpa, static_cast<Ppa>(res.first_ppa + i)});
  }
  install(points);
  enforce_budget();
}

std::optional<Ppa> Ftl::locate_current(Lpa lpa, bool strict) {
  double latency = 0.0;
  const auto t = translate(lpa, latency, false);
  counters_.background_us += latency;
  if (!t) return std::nullopt;
  if (t->ppa < 0 || static_cast<std::uint64_t>(t->ppa) >= flash_.geometry().total_pages()) {
    if (strict) throw ModelViolation("translation of lpa " + std::to_string(lpa) + " left the device");
    return std::nullopt;
  }
  const auto p = static_cast<Ppa>(t->ppa);
  if (t->exact) {
    if (!strict && (!flash_.is_programmed(p) || flash_.stored_lpa(p) != lpa)) {
      return std::nullopt;
    }
    return p;
  }
  ++counters_.invalidation_reads;
  if (!flash_.is_programmed(p)) {
    if (strict) throw ModelViolation("approximate translation reached an erased page");
    return std::nullopt;
  }
  if (strict) {
    const CorrectionResult c = flash_.correct_misprediction(p, lpa);
    counters_.background_us += c.elapsed_us;
    return c.ppa;
  }
  const PageRead page = flash_.read_page(p);
  counters_.background_us += page.elapsed_us;
  return page.oob.locate(lpa, p);
}

void Ftl::invalidate_previous(Lpa lpa, bool strict) {
  const auto p = locate_current(lpa, strict);
  if (!p) return;
  if (flash_.is_valid(*p)) {
    invalidate_page(*p);
  } else if (strict) {
    throw ModelViolation("current mapping of lpa " + std::to_string(lpa) +
                         " points at an invalid page");
  }
}

void Ftl::invalidate_page(Ppa ppa) {
  flash_.invalidate(ppa);
  mark_block(flash_.block_of(ppa));
}

void Ftl::after_flush() {
  if (in_gc_) return;
  const auto trigger = static_cast<std::size_t>(
      std::ceil(config_.gc_trigger * config_.geometry.total_blocks()));
  if (free_count_ < trigger) {
    run_gc();
  }
  if (config_.wear_threshold > 0) {
    wear_level();
  }
  if (config_.compaction_interval > 0 && writes_since_compaction_ >= config_.compaction_interval) {
    writes_since_compaction_ = 0;
    compact();
  }
  if (config_.snapshot_interval > 0 && writes_since_snapshot_ >= config_.snapshot_interval) {
    snapshot();
  }
}

// ---- block pool -------------------------------------------------------------

void Ftl::rebuild_free_pool() {
  for (auto& s : free_sets_) s.clear();
  free_count_ = 0;
  for (std::uint32_t b = 0; b < config_.geometry.total_blocks(); ++b) {
    is_free_[b] = false;
    if (flash_.block(b).write_pointer == 0) {
      release_free(b);
    }
  }
}

std::uint32_t Ftl::take_free(std::uint32_t block) {
  if (!is_free_.at(block)) {
    throw ContractViolation("take_free: block " + std::to_string(block) + " is not free");
  }
  free_sets_[flash_.channel_of_block(block)].erase({flash_.block(block).erase_count, block});
  is_free_[block] = false;
  --free_count_;
  return block;
}

void Ftl::release_free(std::uint32_t block) {
  free_sets_[flash_.channel_of_block(block)].insert({flash_.block(block).erase_count, block});
  is_free_[block] = true;
  ++free_count_;
}

std::uint32_t Ftl::allocate_block() {
  if (free_count_ == 0) {
    if (in_gc_) {
      throw CapacityExhausted("no free block left for relocation");
    }
    const double before = counters_.background_us;
    run_gc();
    foreground_us_ += counters_.background_us - before;
    if (free_count_ == 0) {
      throw CapacityExhausted("no free block after garbage collection");
    }
  }
  const std::uint32_t channels = config_.geometry.channels;
  for (std::uint32_t i = 0; i < channels; ++i) {
    const std::uint32_t c = (next_channel_ + i) % channels;
    if (!free_sets_[c].empty()) {
      next_channel_ = (c + 1) % channels;
      return take_free(free_sets_[c].begin()->second);
    }
  }
  throw CapacityExhausted("free pool inconsistent");
}

// ---- garbage collection and wear leveling -----------------------------------

std::optional<std::uint32_t> Ftl::pick_victim() const {
  const std::uint32_t ppb = config_.geometry.pages_per_block;
  std::optional<std::uint32_t> best;
  std::uint32_t best_valid = ppb;
  for (std::uint32_t b = 0; b < config_.geometry.total_blocks(); ++b) {
    const auto& st = flash_.block(b);
    if (is_free_[b] || st.write_pointer == 0) continue;
    if (st.valid_pages < best_valid) {
      best_valid = st.valid_pages;
      best = b;
    }
  }
  return best;
}

std::size_t Ftl::gc_stop_blocks() const {
  const std::uint32_t total = config_.geometry.total_blocks();
  const std::uint32_t ppb = config_.geometry.pages_per_block;
  const auto trigger = static_cast<std::size_t>(std::ceil(config_.gc_trigger * total));
  const auto target = static_cast<std::size_t>(std::ceil(config_.gc_stop * total));
  std::uint64_t live = 0;
  for (const auto& b : flash_.blocks()) live += b.valid_pages;
  const std::size_t occupied = static_cast<std::size_t>((live + ppb - 1) / ppb);
  const std::size_t ceiling = total > occupied ? total - occupied : 0;
  if (ceiling <= trigger) {
    return free_count_ + 1;
  }
  return std::min(target, trigger + std::max<std::size_t>(1, (ceiling - trigger) / 2));
}

void Ftl::relocate(std::vector<PageWrite>& staging, bool final_chunk, std::uint64_t& moved) {
  const std::size_t ppb = config_.geometry.pages_per_block;
  std::sort(staging.begin(), staging.end(),
            [](const PageWrite& a, const PageWrite& b) { return a.lpa < b.lpa; });
  std::size_t pos = 0;
  while (staging.size() - pos >= ppb || (final_chunk && pos < staging.size())) {
    const std::size_t n = std::min(ppb, staging.size() - pos);
    place_sorted(std::span<const PageWrite>(staging).subspan(pos, n), false, std::nullopt);
    moved += n;
    pos += n;
  }
  staging.erase(staging.begin(), staging.begin() + static_cast<std::ptrdiff_t>(pos));
}

void Ftl::run_gc() {
  if (in_gc_) return;
  in_gc_ = true;
  ++counters_.gc_invocations;
  const std::size_t stop = gc_stop_blocks();
  std::vector<PageWrite> staging;
  std::uint64_t moved = 0;
  std::uint64_t victims = 0;
  try {
    while (free_count_ < stop) {
      const auto victim = pick_victim();
      if (!victim) break;
      ++victims;
      const auto& st = flash_.block(*victim);
      const Ppa base = flash_.first_ppa(*victim);
      for (std::uint32_t p = 0; p < st.write_pointer; ++p) {
        if (!st.valid[p]) continue;
        const PageRead page = flash_.read_page_header(base + p);
        counters_.background_us += page.elapsed_us;
        staging.push_back({page.lpa, page.payload});
      }
      counters_.background_us += flash_.erase_block(*victim);
      mark_block(*victim);
      release_free(*victim);
      relocate(staging, false, moved);
    }
    relocate(staging, true, moved);
  } catch (...) {
    in_gc_ = false;
    throw;
  }
  counters_.gc_victims += victims;
  counters_.gc_pages_moved += moved;
  in_gc_ = false;
  if (config_.snapshot_on_gc && victims > 0) {
    snapshot();
  }
}

bool Ftl::wear_level() {
  if (config_.wear_threshold == 0) return false;
  std::optional<std::uint32_t> cold;
  for (std::uint32_t b = 0; b < config_.geometry.total_blocks(); ++b) {
    if (is_free_[b] || flash_.block(b).write_pointer == 0) continue;
    if (!cold || flash_.block(b).erase_count < flash_.block(*cold).erase_count) cold = b;
  }
  std::optional<std::uint32_t> hot;
  for (const auto& set : free_sets_) {
    if (set.empty()) continue;
    const auto& last = *set.rbegin();
    if (!hot || last.first > flash_.block(*hot).erase_count) hot = last.second;
  }
  if (!cold || !hot) return false;
  const std::uint32_t cold_erases = flash_.block(*cold).erase_count;
  const std::uint32_t hot_erases = flash_.block(*hot).erase_count;
  if (hot_erases - std::min(hot_erases, cold_erases) <= config_.wear_threshold) return false;

  const auto& st = flash_.block(*cold);
  const Ppa base = flash_.first_ppa(*cold);
  std::vector<PageWrite> pages;
  for (std::uint32_t p = 0; p < st.write_pointer; ++p) {
    if (!st.valid[p]) continue;
    const PageRead page = flash_.read_page_header(base + p);
    counters_.background_us += page.elapsed_us;
    pages.push_back({page.lpa, page.payload});
  }
  counters_.background_us += flash_.erase_block(*cold);
  mark_block(*cold);
  if (!pages.empty()) {
    // Block contents are already LPA-sorted; keep that order.
    std::sort(pages.begin(), pages.end(),
              [](const PageWrite& a, const PageWrite& b) { return a.lpa < b.lpa; });
    place_sorted(pages, false, *hot);
  }
  release_free(*cold);
  ++counters_.wl_swaps;
  counters_.wl_pages_moved += pages.size();
  return true;
}

// ---- persistence ------------------------------------------------------------

void Ftl::snapshot() {
  ++counters_.snapshots;
  std::size_t dirty = 0;
  for (std::uint32_t b = 0; b < block_dirty_.size(); ++b) {
    if (!block_dirty_[b]) continue;
    const auto& st = flash_.block(b);
    snap_blocks_[b].erase_count = st.erase_count;
    snap_blocks_[b].seq = st.program_seq;
    snap_blocks_[b].valid = st.valid;
    block_dirty_[b] = false;
    ++dirty;
  }
  // Per-block record: erase count, sequence number and the PVT row.
  const std::uint64_t record = 12 + config_.geometry.pages_per_block / 8;
  const std::uint64_t pages = (dirty * record + config_.geometry.page_size - 1) / config_.geometry.page_size;
  counters_.translation_writes += pages;
  counters_.background_us += static_cast<double>(pages) * config_.latencies.write_us;
  on_snapshot();
  has_snapshot_ = true;
  writes_since_snapshot_ = 0;
}

void Ftl::crash() {
  flush();
  cache_.clear();
  cache_lru_.clear();
  flash_.clear_validity();
  on_crash();
  for (auto& s : free_sets_) s.clear();
  std::fill(is_free_.begin(), is_free_.end(), false);
  free_count_ = 0;
}

void Ftl::replay_block(std::uint32_t block) {
  const auto& st = flash_.block(block);
  const Ppa base = flash_.first_ppa(block);
  std::vector<MappingPoint> points;
  points.reserve(st.write_pointer);
  for (std::uint32_t p = 0; p < st.write_pointer; ++p) {
    points.push_back({flash_.stored_lpa(base + p), base + p});
  }
  counters_.recovery_reads += st.write_pointer;
  counters_.background_us += static_cast<double>(st.write_pointer) * config_.latencies.read_us;
  ++counters_.recovery_blocks_relearned;
  for (const auto& pt : points) {
    invalidate_previous(pt.lpa, false);
  }
  for (const auto& pt : points) {
    flash_.set_valid(pt.ppa);
  }
  mark_block(block);
  install(points);
  enforce_budget();
}

RecoveryReport Ftl::recover() {
  ++counters_.recoveries;
  rebuild_free_pool();
  RecoveryReport report;
  const std::uint64_t relearned_before = counters_.recovery_blocks_relearned;
  const std::uint64_t scanned_before = counters_.recovery_reads;

  std::vector<std::uint32_t> replay;
  if (incremental_recovery() && has_snapshot_) {
    report.from_snapshot = true;
    restore_snapshot();
    for (std::uint32_t b = 0; b < config_.geometry.total_blocks(); ++b) {
      const auto& st = flash_.block(b);
      if (st.write_pointer == 0) continue;
      const auto& snap = snap_blocks_[b];
      if (st.erase_count == snap.erase_count && st.program_seq == snap.seq) {
        const Ppa base = flash_.first_ppa(b);
        for (std::uint32_t p = 0; p < st.write_pointer; ++p) {
          if (snap.valid[p]) flash_.set_valid(base + p);
        }
      } else {
        replay.push_back(b);
      }
    }
  } else {
    for (std::uint32_t b = 0; b < config_.geometry.total_blocks(); ++b) {
      if (flash_.block(b).write_pointer > 0) replay.push_back(b);
    }
  }
  std::sort(replay.begin(), replay.end(), [&](std::uint32_t a, std::uint32_t b) {
    return flash_.block(a).program_seq < flash_.block(b).program_seq;
  });
  for (std::uint32_t b : replay) {
    replay_block(b);
  }
  std::fill(block_dirty_.begin(), block_dirty_.end(), true);
  enforce_budget();
  report.blocks_relearned = counters_.recovery_blocks_relearned - relearned_before;
  report.pages_scanned = counters_.recovery_reads - scanned_before;
  return report;
}

std::string Ftl::check_invariants() const {
  if (auto err = flash_.check_invariants(); !err.empty()) return err;
  std::size_t free = 0;
  for (std::uint32_t b = 0; b < is_free_.size(); ++b) {
    if (!is_free_[b]) continue;
    ++free;
    if (flash_.block(b).write_pointer != 0) {
      return "free block " + std::to_string(b) + " is programmed";
    }
  }
  if (free != free_count_) return "free block count out of sync";
  if (resident_mapping_bytes() > mapping_limit() ||
      resident_mapping_bytes() + cache_.size() * config_.geometry.page_size > config_.dram_bytes) {
    return "DRAM budget exceeded";
  }
  return check_mapping();
}

std::unique_ptr<Ftl> make_ftl(FtlKind kind, const FtlConfig& config) {
  switch (kind) {
    case FtlKind::LeaFtl:
      return std::make_unique<LeaFtl>(config);
    case FtlKind::Dftl:
      return std::make_unique<Dftl>(config);
    case FtlKind::Sftl:
      return std::make_unique<Sftl>(config);
  }
  throw std::invalid_argument("unknown FTL kind");
}

}  // namespace leaftl
