#include "leaftl/group_table.hpp"

#include <algorithm>
#include <cstring>

namespace leaftl {

namespace {

bool by_start(const EncodedSegment& a, const EncodedSegment& b) { return a.start < b.start; }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + 2 > in.size()) {
    throw std::runtime_error("GroupTable::deserialize: truncated payload");
  }
  const std::uint16_t v = static_cast<std::uint16_t>(in[pos] | (in[pos + 1] << 8));
  pos += 2;
  return v;
}

void put_segment(std::vector<std::uint8_t>& out, const EncodedSegment& s) {
  out.push_back(s.start);
  out.push_back(s.length);
  put_u16(out, s.slope_bits);
  const auto i = static_cast<std::uint32_t>(s.intercept);
  for (int b = 0; b < 4; ++b) {
    out.push_back(static_cast<std::uint8_t>((i >> (8 * b)) & 0xFF));
  }
}

EncodedSegment get_segment(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + 8 > in.size()) {
    throw std::runtime_error("GroupTable::deserialize: truncated segment");
  }
  EncodedSegment s;
  s.start = in[pos];
  s.length = in[pos + 1];
  s.slope_bits = static_cast<std::uint16_t>(in[pos + 2] | (in[pos + 3] << 8));
  std::uint32_t i = 0;
  for (int b = 0; b < 4; ++b) {
    i |= static_cast<std::uint32_t>(in[pos + 4 + static_cast<std::size_t>(b)]) << (8 * b);
  }
  s.intercept = static_cast<std::int32_t>(i);
  pos += 8;
  return s;
}

}  // namespace

OffsetSet GroupTable::members_of(const EncodedSegment& segment) const {
  OffsetSet set;
  if (!segment.accurate()) {
    return crb_.members(segment.start);
  }
  const std::uint32_t stride = accurate_stride(segment.slope_bits);
  if (stride == 0) {
    set.set(segment.start);
    return set;
  }
  for (std::uint32_t o = segment.start; o <= segment.last(); o += stride) {
    set.set(o);
  }
  return set;
}

bool GroupTable::has_lpa(const EncodedSegment& segment, std::uint8_t offset) const {
  if (!segment.covers(offset)) {
    return false;
  }
  if (!segment.accurate()) {
    const auto owner = crb_.owner(offset);
    return owner && *owner == segment.start;
  }
  const std::uint32_t stride = accurate_stride(segment.slope_bits);
  if (stride == 0) {
    return offset == segment.start;
  }
  return (offset - segment.start) % stride == 0;
}

std::vector<bool> GroupTable::get_bitmap(const EncodedSegment& segment, std::uint8_t start,
                                         std::uint8_t end) const {
  if (start > end) {
    throw ContractViolation("get_bitmap: start > end");
  }
  std::vector<bool> bm(static_cast<std::size_t>(end - start) + 1);
  for (unsigned o = start; o <= end; ++o) {
    bm[o - start] = has_lpa(segment, static_cast<std::uint8_t>(o));
  }
  return bm;
}

bool GroupTable::seg_merge(const EncodedSegment& newer, EncodedSegment& older) {
  const OffsetSet fresh = members_of(newer);
  const OffsetSet old = members_of(older);
  const OffsetSet survivors = old & ~fresh;
  if (!older.accurate()) {
    const OffsetSet stale = old & fresh;
    if (stale.any()) {
      crb_.remove_offsets(older.start, stale);
    }
  }
  if (survivors.none()) {
    if (!older.accurate()) {
      crb_.erase_run(older.start);
    }
    return true;
  }
  unsigned first = 0;
  while (!survivors.test(first)) {
    ++first;
  }
  unsigned last = 255;
  while (!survivors.test(last)) {
    --last;
  }
  older.start = static_cast<std::uint8_t>(first);
  older.length = static_cast<std::uint8_t>(last - first);
  return false;
}

void GroupTable::apply_shift(const Crb::Shift& shift) {
  for (auto& level : levels_) {
    auto it = std::find_if(level.begin(), level.end(), [&](const EncodedSegment& s) {
      return !s.accurate() && s.start == shift.old_start;
    });
    if (it == level.end()) {
      continue;
    }
    if (!shift.new_start) {
      level.erase(it);
    } else {
      it->start = *shift.new_start;
      it->length = static_cast<std::uint8_t>(shift.new_last - *shift.new_start);
    }
    return;
  }
}

void GroupTable::drop_empty_levels(std::size_t keep) {
  for (std::size_t i = levels_.size(); i-- > 0;) {
    if (i != keep && levels_[i].empty()) {
      levels_.erase(levels_.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
}

bool GroupTable::conflicts(const Level& level, const EncodedSegment& segment) const {
  auto it = std::upper_bound(level.begin(), level.end(), segment, by_start);
  if (it != level.begin() && std::prev(it)->overlaps(segment)) {
    return true;
  }
  return it != level.end() && it->overlaps(segment);
}

void GroupTable::insert_sorted(Level& level, const EncodedSegment& segment) {
  level.insert(std::upper_bound(level.begin(), level.end(), segment, by_start), segment);
}

void GroupTable::insert(const EncodedSegment& segment, std::span<const std::uint8_t> members) {
  if (static_cast<unsigned>(segment.start) + segment.length > 255) {
    throw ContractViolation("GroupTable::insert: segment exceeds its group");
  }
  if (!segment.accurate()) {
    if (members.empty() || members.front() != segment.start || members.back() != segment.last()) {
      throw ContractViolation("GroupTable::insert: members disagree with segment bounds");
    }
  } else if (!members.empty()) {
    const OffsetSet expected = members_of(segment);
    OffsetSet given;
    for (auto o : members) {
      given.set(o);
    }
    if (given != expected) {
      throw ContractViolation("GroupTable::insert: members disagree with accurate stride");
    }
  }
  seg_update(segment, members, 0);
}

void GroupTable::seg_update(EncodedSegment segment, std::span<const std::uint8_t> members,
                            std::size_t level, bool registered) {
  if (level > levels_.size()) {
    throw ContractViolation("GroupTable::seg_update: level out of range");
  }
  if (level == levels_.size()) {
    levels_.emplace_back();
  }

  bool shifted = false;
  if (!segment.accurate() && !registered) {
    // Claim the offsets first: older runs lose them, and an older run that
    // started on our first offset moves to its next member.
    for (const auto& shift : crb_.insert_run(members)) {
      apply_shift(shift);
      shifted = true;
    }
  }

  Level kept;
  Level demoted;
  for (const auto& existing : levels_[level]) {
    if (!existing.overlaps(segment)) {
      kept.push_back(existing);
      continue;
    }
    EncodedSegment victim = existing;
    if (seg_merge(segment, victim)) {
      continue;
    }
    (victim.overlaps(segment) ? demoted : kept).push_back(victim);
  }
  kept.push_back(segment);
  std::sort(kept.begin(), kept.end(), by_start);
  levels_[level] = std::move(kept);

  if (!demoted.empty()) {
    const std::size_t next = level + 1;
    const bool fresh =
        next == levels_.size() || std::any_of(demoted.begin(), demoted.end(), [&](const auto& v) {
          return conflicts(levels_[next], v);
        });
    if (fresh) {
      levels_.insert(levels_.begin() + static_cast<std::ptrdiff_t>(next), Level{});
    }
    for (const auto& v : demoted) {
      insert_sorted(levels_[next], v);
    }
  }

  if (shifted) {
    drop_empty_levels(level);
  }
}

std::optional<LookupHit> GroupTable::lookup(std::uint8_t offset) const {
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const auto& level = levels_[i];
    auto it = std::upper_bound(level.begin(), level.end(), offset,
                               [](std::uint8_t o, const EncodedSegment& s) { return o < s.start; });
    if (it == level.begin()) {
      continue;
    }
    --it;
    if (has_lpa(*it, offset)) {
      return LookupHit{it->predict(offset), it->accurate(), static_cast<std::uint32_t>(i)};
    }
  }
  return std::nullopt;
}

namespace {

// Fewest levels for segments whose member sets are disjoint and whose
// accepted offsets equal their members, so no level order is required.
struct Weighted {
  EncodedSegment segment;
  std::size_t members = 0;
};

// Peels levels off the top: each level is the non-overlapping subset holding
// the most members, so lookups mostly stop at the first levels.
std::vector<GroupTable::Level> layer_levels(std::vector<Weighted> rest) {
  std::vector<GroupTable::Level> levels;
  while (!rest.empty()) {
    std::sort(rest.begin(), rest.end(), [](const Weighted& a, const Weighted& b) {
      return a.segment.last() != b.segment.last() ? a.segment.last() < b.segment.last()
                                                  : a.segment.start < b.segment.start;
    });
    const std::size_t n = rest.size();
    // best[i]: most members using the first i segments; pred[i]: segments
    // ending before segment i - 1 starts.
    std::vector<std::size_t> best(n + 1, 0);
    std::vector<std::size_t> pred(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
      const auto& seg = rest[i - 1].segment;
      std::size_t lo = 0;
      std::size_t hi = i - 1;
      while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (rest[mid - 1].segment.last() < seg.start) {
          lo = mid;
        } else {
          hi = mid - 1;
        }
      }
      pred[i] = lo;
      best[i] = std::max(best[i - 1], best[lo] + rest[i - 1].members);
    }
    std::vector<bool> take(n, false);
    for (std::size_t i = n; i > 0;) {
      if (best[i] == best[i - 1]) {
        --i;
      } else {
        take[i - 1] = true;
        i = pred[i];
      }
    }
    GroupTable::Level level;
    std::vector<Weighted> next;
    for (std::size_t i = 0; i < n; ++i) {
      if (take[i]) {
        level.push_back(rest[i].segment);
      } else {
        next.push_back(rest[i]);
      }
    }
    std::sort(level.begin(), level.end(), by_start);
    levels.push_back(std::move(level));
    rest = std::move(next);
  }
  return levels;
}

std::size_t layout_bytes(const std::vector<GroupTable::Level>& levels) {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.size();
  return n * sizeof(EncodedSegment) + levels.size() * GroupTable::kLevelOverheadBytes;
}

}  // namespace

void GroupTable::compact() {
  if (levels_.empty()) {
    return;
  }
  struct Survivor {
    EncodedSegment segment;
    OffsetSet live;
    std::size_t old_level;
  };
  // Walk from newest to oldest, dropping the offsets a newer segment already
  // serves. Approximate runs lose them in the CRB; accurate segments can only
  // be tightened here.
  std::vector<Survivor> kept;
  OffsetSet claimed;
  for (std::size_t li = 0; li < levels_.size(); ++li) {
    for (EncodedSegment seg : levels_[li]) {
      const OffsetSet nominal = members_of(seg);
      const OffsetSet live = nominal & ~claimed;
      if (live.none()) {
        if (!seg.accurate()) crb_.erase_run(seg.start);
        continue;
      }
      if (!seg.accurate() && (nominal & claimed).any()) {
        crb_.remove_offsets(seg.start, nominal & claimed);
      }
      unsigned first = 0;
      while (!live.test(first)) ++first;
      unsigned last = 255;
      while (!live.test(last)) --last;
      seg.start = static_cast<std::uint8_t>(first);
      seg.length = static_cast<std::uint8_t>(last - first);
      kept.push_back({seg, live, li});
      claimed |= live;
    }
  }

  // Layout 1: every survivor stays on its level. Always valid.
  std::vector<Level> in_place(levels_.size());
  for (const auto& k : kept) insert_sorted(in_place[k.old_level], k.segment);
  std::erase_if(in_place, [](const Level& l) { return l.empty(); });

  // Cut accurate segments around shadowed members. Pieces keep K and I, so
  // predictions do not change, and afterwards every segment accepts exactly
  // the offsets it serves: levels can be assigned by overlap alone.
  std::vector<Weighted> pieces;
  for (const auto& k : kept) {
    const std::uint32_t stride = accurate_stride(k.segment.slope_bits);
    if (!k.segment.accurate() || stride == 0) {
      pieces.push_back({k.segment, k.live.count()});
      continue;
    }
    int run_first = -1;
    int run_last = -1;
    auto emit = [&] {
      if (run_first < 0) return;
      EncodedSegment p = k.segment;
      p.start = static_cast<std::uint8_t>(run_first);
      p.length = static_cast<std::uint8_t>(run_last - run_first);
      pieces.push_back({p, static_cast<std::size_t>(run_last - run_first) / stride + 1});
      run_first = -1;
    };
    for (unsigned o = k.segment.start; o <= k.segment.last(); o += stride) {
      if (k.live.test(o)) {
        if (run_first < 0) run_first = static_cast<int>(o);
        run_last = static_cast<int>(o);
      } else {
        emit();
      }
    }
    emit();
  }
  std::vector<Level> packed = layer_levels(std::move(pieces));

  // A deep level is worth dissolving when its segments, cut into single
  // members, fit into the other levels and cost less than the level itself.
  // Single members of approximate segments keep K and I and get a run each.
  std::vector<std::uint8_t> dissolved_runs;
  OffsetSet approx_singles;
  std::size_t extra_crb = 0;
  for (std::size_t li = packed.size(); li-- > 1;) {
    std::size_t extra = 0;
    std::size_t crb_extra = 0;
    std::vector<EncodedSegment> singles;
    std::vector<std::uint8_t> runs;
    OffsetSet new_singles;
    for (const auto& seg : packed[li]) {
      OffsetSet m;
      if (!seg.accurate() && seg.length == 0 && approx_singles.test(seg.start)) {
        m.set(seg.start);
      } else {
        m = members_of(seg);
      }
      if (!seg.accurate()) new_singles |= m;
      const std::size_t count = m.count();
      extra += (count - 1) * sizeof(EncodedSegment);
      if (!seg.accurate() && count > 1) {
        crb_extra += count - 1;
        runs.push_back(seg.start);
      }
      for (unsigned o = seg.start; o <= seg.last(); ++o) {
        if (!m.test(o)) continue;
        EncodedSegment single = seg;
        single.start = static_cast<std::uint8_t>(o);
        single.length = 0;
        singles.push_back(single);
      }
    }
    if (extra + crb_extra >= kLevelOverheadBytes) continue;
    std::vector<Level> trial = packed;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(li));
    bool placed = true;
    for (const auto& single : singles) {
      auto it = std::find_if(trial.begin(), trial.end(),
                             [&](const Level& l) { return !conflicts(l, single); });
      if (it == trial.end()) {
        placed = false;
        break;
      }
      insert_sorted(*it, single);
    }
    if (!placed) continue;
    packed = std::move(trial);
    dissolved_runs.insert(dissolved_runs.end(), runs.begin(), runs.end());
    approx_singles |= new_singles;
    extra_crb += crb_extra;
  }

  if (layout_bytes(packed) + extra_crb < layout_bytes(in_place)) {
    for (std::uint8_t start : dissolved_runs) {
      const OffsetSet m = crb_.members(start);
      crb_.erase_run(start);
      for (unsigned o = 0; o < 256; ++o) {
        if (!m.test(o)) continue;
        const std::uint8_t single = static_cast<std::uint8_t>(o);
        crb_.insert_run(std::span<const std::uint8_t>(&single, 1));
      }
    }
    levels_ = std::move(packed);
  } else {
    levels_ = std::move(in_place);
  }
}

std::size_t GroupTable::segment_count() const {
  std::size_t n = 0;
  for (const auto& l : levels_) {
    n += l.size();
  }
  return n;
}

std::vector<std::uint8_t> GroupTable::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(2 + levels_.size() * 2 + segment_bytes() + 2 + crb_bytes());
  put_u16(out, static_cast<std::uint16_t>(levels_.size()));
  for (const auto& level : levels_) {
    put_u16(out, static_cast<std::uint16_t>(level.size()));
    for (const auto& s : level) {
      put_segment(out, s);
    }
  }
  std::vector<std::uint8_t> crb;
  crb_.serialize(crb);
  put_u16(out, static_cast<std::uint16_t>(crb.size()));
  out.insert(out.end(), crb.begin(), crb.end());
  return out;
}

GroupTable GroupTable::deserialize(std::span<const std::uint8_t> bytes) {
  GroupTable t;
  std::size_t pos = 0;
  const std::uint16_t levels = get_u16(bytes, pos);
  t.levels_.resize(levels);
  for (auto& level : t.levels_) {
    const std::uint16_t n = get_u16(bytes, pos);
    level.reserve(n);
    for (std::uint16_t i = 0; i < n; ++i) {
      level.push_back(get_segment(bytes, pos));
    }
  }
  const std::uint16_t crb_len = get_u16(bytes, pos);
  if (pos + crb_len != bytes.size()) {
    throw std::runtime_error("GroupTable::deserialize: CRB length mismatch");
  }
  t.crb_ = Crb::parse(bytes.subspan(pos, crb_len));
  return t;
}

std::string GroupTable::check_invariants() const {
  if (auto err = crb_.check_invariants(); !err.empty()) {
    return "crb: " + err;
  }
  std::size_t approximate = 0;
  for (std::size_t li = 0; li < levels_.size(); ++li) {
    const auto& level = levels_[li];
    if (level.empty()) {
      return "empty level " + std::to_string(li);
    }
    for (std::size_t i = 0; i < level.size(); ++i) {
      const auto& s = level[i];
      if (static_cast<unsigned>(s.start) + s.length > 255) {
        return "segment leaves its group";
      }
      if (i > 0 && level[i - 1].last() >= s.start) {
        return "level " + std::to_string(li) + " unsorted or overlapping at " + std::to_string(i);
      }
      if (!s.accurate()) {
        ++approximate;
        const OffsetSet set = crb_.members(s.start);
        if (set.none()) {
          return "approximate segment at " + std::to_string(s.start) + " has no CRB run";
        }
        for (unsigned o = 0; o < 256; ++o) {
          if (set.test(o) && !s.covers(static_cast<std::uint8_t>(o))) {
            return "CRB run of segment " + std::to_string(s.start) + " escapes its range";
          }
        }
      }
    }
  }
  if (approximate != crb_.run_count()) {
    return "CRB runs (" + std::to_string(crb_.run_count()) + ") != approximate segments (" +
           std::to_string(approximate) + ")";
  }
  return {};
}

}  // namespace leaftl
