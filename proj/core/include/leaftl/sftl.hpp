#pragma once

#include <cstdint>
#include <vector>

#include "leaftl/dftl.hpp"

namespace leaftl {

/// Page-level mapping whose translation pages are condensed into runs of
/// consecutive LPAs mapped to consecutive PPAs. Each run costs 8 bytes.
class Sftl final : public PageMapFtl {
 public:
  static constexpr std::uint32_t kRunBytes = 8;

  explicit Sftl(const FtlConfig& config);
  FtlKind kind() const override { return FtlKind::Sftl; }
  std::uint64_t mapping_bytes() const override { return kRunBytes * runs_total_; }
  std::uint64_t runs() const { return runs_total_; }

 protected:
  std::uint64_t tpage_cost(std::uint32_t tp) const override { return kRunBytes * runs_[tp]; }
  void before_update(Lpa lpa) override;
  void after_update(Lpa lpa) override;
  void on_crash() override;
  std::string check_mapping() const override;

 private:
  /// 1 when `lpa` is mapped and does not continue the run of lpa - 1.
  std::uint32_t starts_run(Lpa lpa) const;
  std::uint32_t local_runs(Lpa lpa) const;

  std::vector<std::uint32_t> runs_;
  std::uint64_t runs_total_ = 0;
};

}  // namespace leaftl
