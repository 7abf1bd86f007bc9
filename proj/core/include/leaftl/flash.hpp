#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leaftl/types.hpp"

namespace leaftl {

struct Geometry {
  std::uint32_t channels = 16;
  std::uint32_t blocks_per_channel = 320;
  std::uint32_t pages_per_block = 256;
  std::uint32_t page_size = 4096;
  std::uint32_t oob_size = 128;
  double overprovisioning = 0.20;

  std::uint32_t total_blocks() const { return channels * blocks_per_channel; }
  std::uint64_t total_pages() const {
    return static_cast<std::uint64_t>(total_blocks()) * pages_per_block;
  }
  /// Host-visible pages after overprovisioning.
  std::uint64_t logical_pages() const;

  /// Throws std::invalid_argument naming the first bad field.
  void validate(std::uint32_t gamma) const;
};

struct Latencies {
  double read_us = 20.0;
  double write_us = 200.0;
  double erase_us = 1500.0;
};

/// Reverse mappings of a page and its +-gamma neighbours.
struct OobRecord {
  std::uint32_t gamma = 0;
  std::vector<Lpa> entries;  // entry j describes page (own_ppa - gamma + j); kInvalidLpa is null

  Lpa own_lpa() const { return entries.at(gamma); }
  /// PPA of `wanted` inside the window of the page at `own_ppa`.
  std::optional<Ppa> locate(Lpa wanted, Ppa own_ppa) const;
};

struct BlockState {
  std::uint32_t erase_count = 0;
  std::uint32_t valid_pages = 0;  // block validity counter
  std::vector<bool> valid;        // page validity table row
  std::uint32_t write_pointer = 0;
  std::uint64_t program_seq = 0;  // 0 while erased
};

struct PageWrite {
  Lpa lpa = 0;
  PayloadId payload = 0;
};

struct PageRead {
  Lpa lpa = kInvalidLpa;
  PayloadId payload = 0;
  OobRecord oob;
  double elapsed_us = 0.0;
};

struct ProgramResult {
  Ppa first_ppa = 0;
  std::uint32_t count = 0;
  double elapsed_us = 0.0;
};

struct CorrectionResult {
  Ppa ppa = 0;
  bool mispredicted = false;
  std::uint32_t reads = 1;  // flash reads performed (always the predicted page)
  double elapsed_us = 0.0;
};

/// Channels of blocks of pages. Each page keeps the LPA and payload id it
/// was programmed with; its OOB window is derived from the reverse mappings
/// of the pages programmed with it in the same batch. A block is programmed
/// once per erase cycle, so one block is one batch.
class FlashDevice {
 public:
  FlashDevice(const Geometry& geometry, const Latencies& latencies, std::uint32_t gamma);

  const Geometry& geometry() const { return geometry_; }
  const Latencies& latencies() const { return latencies_; }
  std::uint32_t gamma() const { return gamma_; }

  std::uint32_t block_of(Ppa ppa) const { return ppa / geometry_.pages_per_block; }
  std::uint32_t page_of(Ppa ppa) const { return ppa % geometry_.pages_per_block; }
  std::uint32_t channel_of_block(std::uint32_t block) const { return block % geometry_.channels; }
  Ppa first_ppa(std::uint32_t block) const { return block * geometry_.pages_per_block; }

  /// Programs `pages` into consecutive PPAs of an erased block. Time is the
  /// serialized program latency on the block's channel.
  ProgramResult program_block(std::uint32_t block, std::span<const PageWrite> pages);

  PageRead read_page(Ppa ppa);
  /// Reads only the stored reverse mapping and payload, without building an
  /// OOB record. Counts and costs one read like read_page.
  PageRead read_page_header(Ppa ppa);

  /// Reads the page at `predicted` and resolves `wanted` through its OOB
  /// window. Throws ModelViolation when `wanted` is not in the window.
  CorrectionResult correct_misprediction(Ppa predicted, Lpa wanted);

  double erase_block(std::uint32_t block);

  void invalidate(Ppa ppa);
  bool is_valid(Ppa ppa) const;
  bool is_programmed(Ppa ppa) const;

  const BlockState& block(std::uint32_t b) const { return blocks_.at(b); }
  const std::vector<BlockState>& blocks() const { return blocks_; }

  /// Stored reverse mapping of a programmed page without charging a read;
  /// for scans that already paid for the block.
  Lpa stored_lpa(Ppa ppa) const { return lpas_.at(ppa); }
  PayloadId stored_payload(Ppa ppa) const { return payloads_.at(ppa); }

  /// Resets every validity bit; used when validity is rebuilt after a crash.
  void clear_validity();
  void set_valid(Ppa ppa);

  std::uint64_t reads() const { return reads_; }
  std::uint64_t writes() const { return writes_; }
  std::uint64_t erases() const { return erases_; }

  std::uint32_t min_erase_count() const;
  std::uint32_t max_erase_count() const;

  /// Full-scan check of BVC/PVT coherence and OOB window soundness.
  std::string check_invariants() const;

 private:
  void require_programmed(Ppa ppa) const;
  OobRecord build_oob(Ppa ppa) const;

  Geometry geometry_;
  Latencies latencies_;
  std::uint32_t gamma_;
  std::vector<BlockState> blocks_;
  std::vector<Lpa> lpas_;
  std::vector<PayloadId> payloads_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t reads_ = 0;
  std::uint64_t writes_ = 0;
  std::uint64_t erases_ = 0;
};

}  // namespace leaftl
