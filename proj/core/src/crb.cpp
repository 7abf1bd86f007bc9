#include "leaftl/crb.hpp"

#include <algorithm>

#include "leaftl/types.hpp"

namespace leaftl {

auto Crb::find_run(std::uint8_t run_start) -> std::vector<std::vector<std::uint8_t>>::iterator {
  auto it = std::lower_bound(runs_.begin(), runs_.end(), run_start,
                             [](const auto& run, std::uint8_t s) { return run.front() < s; });
  return (it != runs_.end() && it->front() == run_start) ? it : runs_.end();
}

auto Crb::find_run(std::uint8_t run_start) const
    -> std::vector<std::vector<std::uint8_t>>::const_iterator {
  auto it = std::lower_bound(runs_.begin(), runs_.end(), run_start,
                             [](const auto& run, std::uint8_t s) { return run.front() < s; });
  return (it != runs_.end() && it->front() == run_start) ? it : runs_.end();
}

std::vector<Crb::Shift> Crb::insert_run(std::span<const std::uint8_t> offsets) {
  if (offsets.empty()) {
    throw ContractViolation("Crb::insert_run: empty run");
  }
  if (!std::is_sorted(offsets.begin(), offsets.end()) ||
      std::adjacent_find(offsets.begin(), offsets.end()) != offsets.end()) {
    throw ContractViolation("Crb::insert_run: offsets must be strictly increasing");
  }
  OffsetSet incoming;
  for (auto o : offsets) {
    incoming.set(o);
  }

  std::vector<Shift> shifts;
  for (auto it = runs_.begin(); it != runs_.end();) {
    auto& run = *it;
    const std::uint8_t old_start = run.front();
    const std::uint8_t old_last = run.back();
    std::erase_if(run, [&](std::uint8_t o) { return incoming.test(o); });
    if (run.empty()) {
      shifts.push_back(Shift{old_start, std::nullopt, 0});
      it = runs_.erase(it);
      continue;
    }
    if (run.front() != old_start || run.back() != old_last) {
      shifts.push_back(Shift{old_start, run.front(), run.back()});
    }
    ++it;
  }

  std::vector<std::uint8_t> run(offsets.begin(), offsets.end());
  auto pos = std::upper_bound(runs_.begin(), runs_.end(), run.front(),
                              [](std::uint8_t s, const auto& r) { return s < r.front(); });
  runs_.insert(pos, std::move(run));
  // Shifted runs may now be out of order relative to their neighbours.
  std::sort(runs_.begin(), runs_.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return shifts;
}

Crb::Shift Crb::remove_offsets(std::uint8_t run_start, const OffsetSet& drop) {
  auto it = find_run(run_start);
  if (it == runs_.end()) {
    return Shift{run_start, std::nullopt, 0};
  }
  std::erase_if(*it, [&](std::uint8_t o) { return drop.test(o); });
  if (it->empty()) {
    runs_.erase(it);
    return Shift{run_start, std::nullopt, 0};
  }
  Shift shift{run_start, it->front(), it->back()};
  if (it->front() != run_start) {
    std::sort(runs_.begin(), runs_.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
  }
  return shift;
}

void Crb::erase_run(std::uint8_t run_start) {
  if (auto it = find_run(run_start); it != runs_.end()) {
    runs_.erase(it);
  }
}

std::optional<std::uint8_t> Crb::owner(std::uint8_t offset) const {
  // Runs starting after the offset cannot hold it; scan the rest backwards
  // from the nearest start, like walking left in the byte sequence.
  auto it = std::upper_bound(runs_.begin(), runs_.end(), offset,
                             [](std::uint8_t s, const auto& r) { return s < r.front(); });
  while (it != runs_.begin()) {
    --it;
    if (offset <= it->back() && std::binary_search(it->begin(), it->end(), offset)) {
      return it->front();
    }
  }
  return std::nullopt;
}

OffsetSet Crb::members(std::uint8_t run_start) const {
  OffsetSet set;
  if (auto it = find_run(run_start); it != runs_.end()) {
    for (auto o : *it) {
      set.set(o);
    }
  }
  return set;
}

bool Crb::has_run(std::uint8_t run_start) const { return find_run(run_start) != runs_.end(); }

std::size_t Crb::offset_count() const {
  std::size_t n = 0;
  for (const auto& r : runs_) {
    n += r.size();
  }
  return n;
}

void Crb::serialize(std::vector<std::uint8_t>& out) const {
  for (const auto& r : runs_) {
    out.push_back(static_cast<std::uint8_t>(r.size() - 1));
    out.insert(out.end(), r.begin(), r.end());
  }
}

Crb Crb::parse(std::span<const std::uint8_t> bytes) {
  Crb crb;
  std::size_t i = 0;
  while (i < bytes.size()) {
    const std::size_t len = static_cast<std::size_t>(bytes[i]) + 1;
    if (i + 1 + len > bytes.size()) {
      throw std::runtime_error("Crb::parse: truncated run");
    }
    crb.runs_.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(i + 1),
                           bytes.begin() + static_cast<std::ptrdiff_t>(i + 1 + len));
    i += 1 + len;
  }
  if (auto err = crb.check_invariants(); !err.empty()) {
    throw std::runtime_error("Crb::parse: " + err);
  }
  return crb;
}

std::string Crb::check_invariants() const {
  OffsetSet seen;
  for (std::size_t i = 0; i < runs_.size(); ++i) {
    const auto& r = runs_[i];
    if (r.empty()) {
      return "empty run";
    }
    if (i > 0 && runs_[i - 1].front() >= r.front()) {
      return "runs not ordered by unique start";
    }
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j > 0 && r[j - 1] >= r[j]) {
        return "run offsets not strictly increasing";
      }
      if (seen.test(r[j])) {
        return "offset " + std::to_string(r[j]) + " appears in two runs";
      }
      seen.set(r[j]);
    }
  }
  return {};
}

}  // namespace leaftl
