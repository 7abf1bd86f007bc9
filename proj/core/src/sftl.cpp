#include "leaftl/sftl.hpp"

#include <algorithm>

namespace leaftl {

Sftl::Sftl(const FtlConfig& config) : PageMapFtl(config) {
  runs_.assign(translation_pages(), 0);
}

std::uint32_t Sftl::starts_run(Lpa lpa) const {
  const Ppa p = entry(lpa);
  if (p == kInvalidPpa) return 0;
  if (lpa % kEntriesPerPage == 0) return 1;
  const Ppa prev = entry(lpa - 1);
  return (prev == kInvalidPpa || prev + 1 != p) ? 1 : 0;
}

std::uint32_t Sftl::local_runs(Lpa lpa) const {
  std::uint32_t n = starts_run(lpa);
  if (static_cast<std::uint64_t>(lpa) + 1 < logical_pages() && (lpa + 1) % kEntriesPerPage != 0) {
    n += starts_run(lpa + 1);
  }
  return n;
}

void Sftl::before_update(Lpa lpa) {
  const std::uint32_t n = local_runs(lpa);
  runs_[lpa / kEntriesPerPage] -= n;
  runs_total_ -= n;
}

void Sftl::after_update(Lpa lpa) {
  const std::uint32_t n = local_runs(lpa);
  runs_[lpa / kEntriesPerPage] += n;
  runs_total_ += n;
}

void Sftl::on_crash() {
  PageMapFtl::on_crash();
  std::fill(runs_.begin(), runs_.end(), 0);
  runs_total_ = 0;
}

std::string Sftl::check_mapping() const {
  if (auto err = PageMapFtl::check_mapping(); !err.empty()) return err;
  std::uint64_t total = 0;
  for (std::uint32_t tp = 0; tp < runs_.size(); ++tp) {
    std::uint32_t n = 0;
    const Lpa lo = tp * kEntriesPerPage;
    const Lpa hi = static_cast<Lpa>(std::min<std::uint64_t>(logical_pages(), lo + kEntriesPerPage));
    for (Lpa l = lo; l < hi; ++l) n += starts_run(l);
    if (n != runs_[tp]) return "run count of translation page " + std::to_string(tp) + " out of sync";
    total += n;
  }
  if (total != runs_total_) return "total run count out of sync";
  return {};
}

}  // namespace leaftl
