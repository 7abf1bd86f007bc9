#include "leaftl/mapping_table.hpp"

namespace leaftl {

MappingTable::MappingTable(std::uint64_t logical_pages)
    : groups_((logical_pages + kGroupSize - 1) / kGroupSize) {}

GroupTable& MappingTable::mutable_group(std::uint32_t id) {
  if (id >= groups_.size()) {
    groups_.resize(static_cast<std::size_t>(id) + 1);
  }
  return groups_[id];
}

void MappingTable::insert(const FittedSegment& segment) {
  const std::uint32_t id = group_of(segment.start_lpa);
  if (group_of(segment.end_lpa()) != id) {
    throw ContractViolation("MappingTable::insert: segment spans two groups");
  }
  auto& g = mutable_group(id);
  const std::size_t before = g.byte_size();
  std::vector<std::uint8_t> members;
  if (!segment.accurate) {
    members.reserve(segment.member_lpas.size());
    for (Lpa lpa : segment.member_lpas) {
      members.push_back(offset_in_group(lpa));
    }
  }
  g.insert(encode(segment), members);
  bytes_ = bytes_ - before + g.byte_size();
}

void MappingTable::insert_all(std::span<const FittedSegment> segments) {
  for (const auto& s : segments) {
    insert(s);
  }
}

std::optional<Prediction> MappingTable::lookup(Lpa lpa) const {
  const std::uint32_t id = group_of(lpa);
  if (id >= groups_.size()) {
    return std::nullopt;
  }
  const auto hit = groups_[id].lookup(offset_in_group(lpa));
  if (!hit) {
    return std::nullopt;
  }
  return Prediction{hit->ppa, hit->accurate, hit->level + 1};
}

std::size_t MappingTable::seg_compact() {
  std::size_t touched = 0;
  for (auto& g : groups_) {
    if (g.level_count() > 1) {
      const std::size_t before = g.byte_size();
      g.compact();
      bytes_ = bytes_ - before + g.byte_size();
      ++touched;
    }
  }
  return touched;
}

MappingFootprint MappingTable::memory_footprint() const {
  MappingFootprint f;
  for (const auto& g : groups_) {
    f.segment_bytes += g.segment_bytes();
    f.crb_bytes += g.crb_bytes();
    f.overhead_bytes += g.overhead_bytes();
    f.segments += g.segment_count();
    f.levels += g.level_count();
  }
  return f;
}

GroupTable MappingTable::take_group(std::uint32_t id) {
  auto& g = mutable_group(id);
  bytes_ -= g.byte_size();
  GroupTable out = std::move(g);
  g = GroupTable{};
  return out;
}

void MappingTable::put_group(std::uint32_t id, GroupTable table) {
  auto& g = mutable_group(id);
  bytes_ = bytes_ - g.byte_size() + table.byte_size();
  g = std::move(table);
}

std::string MappingTable::check_invariants() const {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (auto err = groups_[i].check_invariants(); !err.empty()) {
      return "group " + std::to_string(i) + ": " + err;
    }
  }
  return {};
}

}  // namespace leaftl
