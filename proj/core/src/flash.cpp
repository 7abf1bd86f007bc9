#include "leaftl/flash.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leaftl {

std::uint64_t Geometry::logical_pages() const {
  const auto pages = static_cast<double>(total_pages()) * (1.0 - overprovisioning);
  return static_cast<std::uint64_t>(std::floor(pages));
}

void Geometry::validate(std::uint32_t gamma) const {
  if (channels == 0) throw std::invalid_argument("channels must be positive");
  if (blocks_per_channel == 0) throw std::invalid_argument("blocks_per_channel must be positive");
  if (pages_per_block == 0) throw std::invalid_argument("pages_per_block must be positive");
  if (page_size == 0) throw std::invalid_argument("page_size must be positive");
  if (oob_size == 0) throw std::invalid_argument("oob_size must be positive");
  if (!(overprovisioning >= 0.0 && overprovisioning < 1.0)) {
    throw std::invalid_argument("op_ratio must be in [0, 1)");
  }
  if (total_pages() >= kInvalidPpa) {
    throw std::invalid_argument("device too large for 32-bit page addresses");
  }
  const std::uint64_t needed = 4ULL * (2ULL * gamma + 1);
  if (needed > oob_size) {
    throw std::invalid_argument("oob_size " + std::to_string(oob_size) + " cannot hold " +
                                std::to_string(2 * gamma + 1) +
                                " reverse mappings for gamma=" + std::to_string(gamma));
  }
}

std::optional<Ppa> OobRecord::locate(Lpa wanted, Ppa own_ppa) const {
  for (std::size_t j = 0; j < entries.size(); ++j) {
    if (entries[j] == wanted) {
      return static_cast<Ppa>(static_cast<std::int64_t>(own_ppa) - gamma + static_cast<std::int64_t>(j));
    }
  }
  return std::nullopt;
}

FlashDevice::FlashDevice(const Geometry& geometry, const Latencies& latencies, std::uint32_t gamma)
    : geometry_(geometry), latencies_(latencies), gamma_(gamma) {
  geometry_.validate(gamma);
  blocks_.resize(geometry_.total_blocks());
  for (auto& b : blocks_) {
    b.valid.assign(geometry_.pages_per_block, false);
  }
  lpas_.assign(geometry_.total_pages(), kInvalidLpa);
  payloads_.assign(geometry_.total_pages(), 0);
}

ProgramResult FlashDevice::program_block(std::uint32_t block, std::span<const PageWrite> pages) {
  auto& b = blocks_.at(block);
  if (b.write_pointer != 0) {
    throw ModelViolation("program_block: block " + std::to_string(block) + " is not erased");
  }
  if (pages.empty() || pages.size() > geometry_.pages_per_block) {
    throw ContractViolation("program_block: page count out of range");
  }
  const Ppa base = first_ppa(block);
  for (std::size_t i = 0; i < pages.size(); ++i) {
    lpas_[base + i] = pages[i].lpa;
    payloads_[base + i] = pages[i].payload;
    b.valid[i] = true;
  }
  b.write_pointer = static_cast<std::uint32_t>(pages.size());
  b.valid_pages = b.write_pointer;
  b.program_seq = next_seq_++;
  writes_ += pages.size();
  return ProgramResult{base, static_cast<std::uint32_t>(pages.size()),
                       static_cast<double>(pages.size()) * latencies_.write_us};
}

void FlashDevice::require_programmed(Ppa ppa) const {
  if (ppa >= lpas_.size()) {
    throw ModelViolation("read_page: ppa " + std::to_string(ppa) + " out of range");
  }
  if (page_of(ppa) >= blocks_[block_of(ppa)].write_pointer) {
    throw ModelViolation("read_page: ppa " + std::to_string(ppa) + " is erased");
  }
}

OobRecord FlashDevice::build_oob(Ppa ppa) const {
  OobRecord oob;
  oob.gamma = gamma_;
  oob.entries.assign(2 * gamma_ + 1, kInvalidLpa);
  const std::uint32_t blk = block_of(ppa);
  const std::int64_t lo = first_ppa(blk);
  const std::int64_t hi = lo + blocks_[blk].write_pointer;  // exclusive
  for (std::uint32_t j = 0; j < oob.entries.size(); ++j) {
    const std::int64_t p = static_cast<std::int64_t>(ppa) - gamma_ + j;
    if (p >= lo && p < hi) {
      oob.entries[j] = lpas_[static_cast<std::size_t>(p)];
    }
  }
  return oob;
}

PageRead FlashDevice::read_page(Ppa ppa) {
  require_programmed(ppa);
  ++reads_;
  return PageRead{lpas_[ppa], payloads_[ppa], build_oob(ppa), latencies_.read_us};
}

PageRead FlashDevice::read_page_header(Ppa ppa) {
  require_programmed(ppa);
  ++reads_;
  return PageRead{lpas_[ppa], payloads_[ppa], OobRecord{}, latencies_.read_us};
}

CorrectionResult FlashDevice::correct_misprediction(Ppa predicted, Lpa wanted) {
  require_programmed(predicted);
  ++reads_;
  CorrectionResult r;
  r.elapsed_us = latencies_.read_us;
  if (lpas_[predicted] == wanted) {
    r.ppa = predicted;
    return r;
  }
  const auto found = build_oob(predicted).locate(wanted, predicted);
  if (!found) {
    throw ModelViolation("translation corruption: lpa " + std::to_string(wanted) +
                         " not within the OOB window of ppa " + std::to_string(predicted));
  }
  r.ppa = *found;
  r.mispredicted = true;
  return r;
}

double FlashDevice::erase_block(std::uint32_t block) {
  auto& b = blocks_.at(block);
  std::fill(b.valid.begin(), b.valid.end(), false);
  b.valid_pages = 0;
  b.write_pointer = 0;
  b.program_seq = 0;
  ++b.erase_count;
  ++erases_;
  const Ppa base = first_ppa(block);
  std::fill(lpas_.begin() + base, lpas_.begin() + base + geometry_.pages_per_block, kInvalidLpa);
  return latencies_.erase_us;
}

void FlashDevice::invalidate(Ppa ppa) {
  auto& b = blocks_.at(block_of(ppa));
  const std::uint32_t page = page_of(ppa);
  if (b.valid[page]) {
    b.valid[page] = false;
    --b.valid_pages;
  }
}

void FlashDevice::set_valid(Ppa ppa) {
  auto& b = blocks_.at(block_of(ppa));
  const std::uint32_t page = page_of(ppa);
  if (!b.valid[page]) {
    b.valid[page] = true;
    ++b.valid_pages;
  }
}

void FlashDevice::clear_validity() {
  for (auto& b : blocks_) {
    std::fill(b.valid.begin(), b.valid.end(), false);
    b.valid_pages = 0;
  }
}

bool FlashDevice::is_valid(Ppa ppa) const { return blocks_.at(block_of(ppa)).valid[page_of(ppa)]; }

bool FlashDevice::is_programmed(Ppa ppa) const {
  return ppa < lpas_.size() && page_of(ppa) < blocks_[block_of(ppa)].write_pointer;
}

std::uint32_t FlashDevice::min_erase_count() const {
  std::uint32_t m = blocks_.empty() ? 0 : blocks_.front().erase_count;
  for (const auto& b : blocks_) m = std::min(m, b.erase_count);
  return m;
}

std::uint32_t FlashDevice::max_erase_count() const {
  std::uint32_t m = 0;
  for (const auto& b : blocks_) m = std::max(m, b.erase_count);
  return m;
}

std::string FlashDevice::check_invariants() const {
  for (std::uint32_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& b = blocks_[bi];
    const auto pop = static_cast<std::uint32_t>(std::count(b.valid.begin(), b.valid.end(), true));
    if (pop != b.valid_pages) {
      return "block " + std::to_string(bi) + ": BVC " + std::to_string(b.valid_pages) +
             " != PVT popcount " + std::to_string(pop);
    }
    for (std::uint32_t p = b.write_pointer; p < geometry_.pages_per_block; ++p) {
      if (b.valid[p]) {
        return "block " + std::to_string(bi) + ": unwritten page marked valid";
      }
    }
    for (std::uint32_t p = 0; p < b.write_pointer; ++p) {
      const Ppa ppa = first_ppa(bi) + p;
      const OobRecord oob = build_oob(ppa);
      if (oob.own_lpa() != lpas_[ppa]) {
        return "OOB centre slot mismatch at ppa " + std::to_string(ppa);
      }
      for (std::uint32_t j = 0; j < oob.entries.size(); ++j) {
        const std::int64_t n = static_cast<std::int64_t>(ppa) - gamma_ + j;
        const bool in_block = n >= first_ppa(bi) && n < first_ppa(bi) + b.write_pointer;
        if (in_block != (oob.entries[j] != kInvalidLpa)) {
          return "OOB slot " + std::to_string(j) + " of ppa " + std::to_string(ppa) +
                 " references outside its block";
        }
      }
    }
  }
  return {};
}

}  // namespace leaftl
