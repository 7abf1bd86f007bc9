#include "leaftl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "leaftl/leaftl_ftl.hpp"

namespace leaftl {

namespace {

using nlohmann::json;

LatencySummary summarize(std::vector<double> samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  auto rank = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
    return samples[std::min(samples.size() - 1, idx == 0 ? 0 : idx - 1)];
  };
  s.p50 = rank(0.50);
  s.p99 = rank(0.99);
  s.max = samples.back();
  return s;
}

FtlCounters minus(const FtlCounters& now, const FtlCounters& base) {
  FtlCounters d = now;
  std::vector<std::uint64_t> before;
  for_each_counter(base, [&](const char*, const std::uint64_t& v) { before.push_back(v); });
  std::size_t i = 0;
  for_each_counter(d, [&](const char* name, std::uint64_t& v) {
    if (std::string_view(name) != "max_extra_reads_per_read") v -= before[i];
    ++i;
  });
  d.background_us = now.background_us - base.background_us;
  for (std::size_t l = 0; l < d.lookup_levels.size(); ++l) {
    if (l < base.lookup_levels.size()) d.lookup_levels[l] -= base.lookup_levels[l];
  }
  return d;
}

struct Oracle {
  std::vector<PayloadId> shadow;

  std::optional<OracleFailure> check(Lpa lpa, const ReadResult& r, std::uint64_t op, std::uint64_t seed) const {
    const PayloadId expected = shadow[lpa];
    const bool ok = expected == 0 ? !r.mapped : (r.mapped && r.payload == expected);
    if (ok) return std::nullopt;
    OracleFailure f;
    f.op_index = op;
    f.lpa = lpa;
    f.expected = expected;
    f.actual = r.payload;
    f.mapped = r.mapped;
    f.seed = seed;
    std::ostringstream os;
    os << "seed " << seed << ": read of lpa " << lpa << " after " << op << " ops returned ";
    if (r.mapped) {
      os << "payload " << r.payload;
    } else {
      os << "unmapped";
    }
    os << ", expected ";
    if (expected == 0) {
      os << "unmapped";
    } else {
      os << "payload " << expected;
    }
    os << "; replay the first " << op + 1 << " ops to reproduce";
    f.message = os.str();
    return f;
  }
};

}  // namespace

RunResult run(FtlKind kind, const FtlConfig& config, std::span<const TraceEvent> events,
              const SimOptions& options) {
  auto ftl = make_ftl(kind, config);
  const std::uint32_t page_size = config.geometry.page_size;
  Oracle oracle;
  oracle.shadow.assign(ftl->logical_pages(), 0);
  PayloadId next_payload = 1;

  for (std::uint64_t i = 0; i < options.warmup_writes; ++i) {
    const auto lpa = static_cast<Lpa>(i % ftl->logical_pages());
    ftl->write(lpa, next_payload);
    oracle.shadow[lpa] = next_payload++;
  }

  const FtlCounters base = ftl->counters();
  const std::uint64_t base_reads = ftl->flash().reads();
  const std::uint64_t base_writes = ftl->flash().writes();
  const std::uint64_t base_erases = ftl->flash().erases();

  RunResult result;
  std::vector<double> read_lat;
  std::vector<double> write_lat;
  std::vector<double> all_lat;
  Metrics& m = result.metrics;
  std::uint64_t ops = 0;
  std::uint64_t trace_writes = 0;
  bool crashed = false;

  auto sample = [&] {
    const std::uint64_t bytes = ftl->mapping_bytes();
    m.peak_mapping_bytes = std::max(m.peak_mapping_bytes, bytes);
    m.mapping_series.emplace_back(ops, bytes);
  };
  auto crash_now = [&]() -> bool {
    ftl->crash();
    result.recovery = ftl->recover();
    crashed = true;
    if (!options.verify_after_recovery) return true;
    for (Lpa lpa = 0; lpa < oracle.shadow.size(); ++lpa) {
      if (oracle.shadow[lpa] == 0) continue;
      const ReadResult r = ftl->read(lpa);
      if (auto f = oracle.check(lpa, r, ops, options.seed)) {
        f->message = "after recovery: " + f->message;
        result.failure = f;
        return false;
      }
    }
    return true;
  };

  if (options.sample_every > 0) sample();
  for (const auto& e : events) {
    const PageRange pages = split_pages(e, page_size);
    if (static_cast<std::uint64_t>(pages.first) + pages.count > ftl->logical_pages() ||
        e.offset / page_size != pages.first) {
      throw CapacityExhausted("request at offset " + std::to_string(e.offset) +
                              " exceeds the logical capacity");
    }
    for (std::uint32_t k = 0; k < pages.count; ++k) {
      if (options.crash_after_writes && !crashed && trace_writes == *options.crash_after_writes) {
        if (!crash_now()) break;
      }
      const Lpa lpa = pages.first + k;
      if (e.op == OpType::Write) {
        const WriteResult w = ftl->write(lpa, next_payload);
        oracle.shadow[lpa] = next_payload++;
        ++trace_writes;
        write_lat.push_back(w.latency_us);
        all_lat.push_back(w.latency_us);
      } else {
        const ReadResult r = ftl->read(lpa);
        if (options.oracle) {
          if (auto f = oracle.check(lpa, r, ops, options.seed)) {
            result.failure = f;
            break;
          }
        }
        read_lat.push_back(r.latency_us);
        all_lat.push_back(r.latency_us);
      }
      ++ops;
      if (options.sample_every > 0 && ops % options.sample_every == 0) sample();
    }
    if (result.failure) break;
  }
  if (!result.failure && options.crash_after_writes && !crashed &&
      trace_writes == *options.crash_after_writes) {
    crash_now();
  }
  if (!result.failure) ftl->flush();

  m.ftl = to_string(kind);
  m.gamma = config.gamma;
  m.ops = ops;
  m.counters = minus(ftl->counters(), base);
  m.flash_reads = ftl->flash().reads() - base_reads;
  m.flash_writes = ftl->flash().writes() - base_writes;
  m.flash_erases = ftl->flash().erases() - base_erases;
  m.read_latency = summarize(std::move(read_lat));
  m.write_latency = summarize(std::move(write_lat));
  m.all_latency = summarize(std::move(all_lat));
  m.mapping_bytes = ftl->mapping_bytes();
  m.peak_mapping_bytes = std::max(m.peak_mapping_bytes, m.mapping_bytes);
  if (options.sample_every > 0 && (m.mapping_series.empty() || m.mapping_series.back().first != ops)) {
    m.mapping_series.emplace_back(ops, m.mapping_bytes);
  }
  const auto& c = m.counters;
  m.waf = c.host_pages_flushed == 0
              ? 0.0
              : static_cast<double>(m.flash_writes) / static_cast<double>(c.host_pages_flushed);
  if (c.host_reads > 0) {
    m.misprediction_ratio = static_cast<double>(c.mispredictions) / static_cast<double>(c.host_reads);
    m.cache_hit_ratio = static_cast<double>(c.cache_hits + c.buffer_hits) / static_cast<double>(c.host_reads);
  }
  const std::uint64_t lookups = std::accumulate(c.lookup_levels.begin(), c.lookup_levels.end(), std::uint64_t{0});
  if (lookups > 0) {
    m.top_level_ratio = static_cast<double>(c.lookup_levels[0]) / static_cast<double>(lookups);
  }
  m.erase_min = ftl->flash().min_erase_count();
  m.erase_max = ftl->flash().max_erase_count();
  if (const auto* lea = dynamic_cast<const LeaFtl*>(ftl.get())) {
    const MappingFootprint f = lea->table().memory_footprint();
    m.segments = f.segments;
    m.levels = f.levels;
    m.crb_bytes = f.crb_bytes;
  }
  return result;
}

std::vector<CompareRow> compare_rows(std::span<const RunResult> runs) {
  std::vector<CompareRow> rows;
  if (runs.empty()) return rows;
  const Metrics& ref = runs.front().metrics;
  auto ratio = [](double num, double den) {
    if (num == den) return 1.0;
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return num / den;
  };
  for (const auto& r : runs) {
    CompareRow row;
    row.label = r.metrics.ftl + " gamma=" + std::to_string(r.metrics.gamma);
    row.mapping_bytes = r.metrics.mapping_bytes;
    row.memory_reduction = ratio(static_cast<double>(ref.mapping_bytes), static_cast<double>(r.metrics.mapping_bytes));
    row.latency_speedup = ratio(ref.all_latency.mean, r.metrics.all_latency.mean);
    row.waf_delta = r.metrics.waf - ref.waf;
    rows.push_back(row);
  }
  return rows;
}

CompareReport compare(std::span<const FtlKind> kinds, const FtlConfig& config,
                      std::span<const TraceEvent> events, const SimOptions& options) {
  CompareReport report;
  for (FtlKind k : kinds) {
    report.runs.push_back(run(k, config, events, options));
  }
  report.rows = compare_rows(report.runs);
  return report;
}

namespace {

std::size_t log2_bucket(std::uint64_t v) {
  std::size_t b = 0;
  while ((1ULL << b) < v) ++b;
  return b;
}

}  // namespace

LearnStats learn_stats(std::span<const TraceEvent> events, std::uint32_t gamma,
                       std::uint32_t batch_pages, std::uint64_t logical_pages,
                       std::uint32_t page_size) {
  if (batch_pages == 0 || page_size == 0) throw std::invalid_argument("learn_stats: empty batch");
  LearnStats st;
  st.gamma = gamma;
  st.segment_members.assign(9, 0);
  st.crb_bytes_per_group.assign(11, 0);
  MappingTable table(logical_pages);
  std::vector<Lpa> batch;
  std::vector<bool> pending(logical_pages, false);
  Ppa next_ppa = 0;

  auto flush = [&] {
    if (batch.empty()) return;
    std::sort(batch.begin(), batch.end());
    std::vector<MappingPoint> points;
    points.reserve(batch.size());
    for (Lpa lpa : batch) {
      points.push_back({lpa, next_ppa++});
      pending[lpa] = false;
    }
    next_ppa += batch_pages - static_cast<Ppa>(batch.size());
    for (const auto& seg : learn_segments(points, gamma)) {
      ++st.segments;
      ++(seg.accurate ? st.accurate : st.approximate);
      ++st.segment_members[std::min<std::size_t>(log2_bucket(seg.member_lpas.size()), 8)];
      table.insert(seg);
    }
    ++st.batches;
    batch.clear();
  };

  for (const auto& e : events) {
    if (e.op != OpType::Write) continue;
    const PageRange pages = split_pages(e, page_size);
    if (static_cast<std::uint64_t>(pages.first) + pages.count > logical_pages) {
      throw CapacityExhausted("request at offset " + std::to_string(e.offset) +
                              " exceeds the logical capacity");
    }
    for (std::uint32_t k = 0; k < pages.count; ++k) {
      const Lpa lpa = pages.first + k;
      ++st.writes;
      if (!pending[lpa]) {
        pending[lpa] = true;
        batch.push_back(lpa);
      }
      if (batch.size() == batch_pages) flush();
    }
  }
  flush();
  table.seg_compact();
  for (std::uint32_t g = 0; g < table.group_count(); ++g) {
    const GroupTable& t = table.group(g);
    if (t.empty()) continue;
    ++st.crb_bytes_per_group[std::min<std::size_t>(log2_bucket(t.crb_bytes()) + (t.crb_bytes() > 0), 10)];
  }
  st.table = table.memory_footprint();
  return st;
}

namespace {

json latency_json(const LatencySummary& s) {
  return json{{"count", s.count}, {"mean", s.mean}, {"p50", s.p50}, {"p99", s.p99}, {"max", s.max}};
}

json metrics_object(const Metrics& m) {
  json counters = json::object();
  for_each_counter(m.counters, [&](const char* name, const std::uint64_t& v) { counters[name] = v; });
  counters["background_us"] = m.counters.background_us;
  json series = json::array();
  for (const auto& [op, bytes] : m.mapping_series) series.push_back(json::array({op, bytes}));
  return json{
      {"schema_version", kMetricsSchemaVersion},
      {"ftl", m.ftl},
      {"gamma", m.gamma},
      {"ops", m.ops},
      {"counters", counters},
      {"flash", {{"reads", m.flash_reads}, {"writes", m.flash_writes}, {"erases", m.flash_erases}}},
      {"latency_us",
       {{"read", latency_json(m.read_latency)},
        {"write", latency_json(m.write_latency)},
        {"all", latency_json(m.all_latency)}}},
      {"mapping_bytes", {{"final", m.mapping_bytes}, {"peak", m.peak_mapping_bytes}, {"series", series}}},
      {"waf", m.waf},
      {"misprediction_ratio", m.misprediction_ratio},
      {"cache_hit_ratio", m.cache_hit_ratio},
      {"top_level_ratio", m.top_level_ratio},
      {"lookup_levels", m.counters.lookup_levels},
      {"erase_count", {{"min", m.erase_min}, {"max", m.erase_max}, {"spread", m.erase_max - m.erase_min}}},
      {"table", {{"segments", m.segments}, {"levels", m.levels}, {"crb_bytes", m.crb_bytes}}},
  };
}

json run_object(const RunResult& r) {
  json j = metrics_object(r.metrics);
  if (r.recovery) {
    j["recovery"] = {{"from_snapshot", r.recovery->from_snapshot},
                     {"blocks_relearned", r.recovery->blocks_relearned},
                     {"pages_scanned", r.recovery->pages_scanned}};
  }
  if (r.failure) {
    j["failure"] = {{"op_index", r.failure->op_index}, {"lpa", r.failure->lpa},
                    {"expected", r.failure->expected}, {"actual", r.failure->actual},
                    {"mapped", r.failure->mapped}, {"seed", r.failure->seed},
                    {"message", r.failure->message}};
  }
  return j;
}

}  // namespace

std::string to_json(const Metrics& metrics, int indent) { return metrics_object(metrics).dump(indent); }

std::string to_json(const RunResult& result, int indent) { return run_object(result).dump(indent); }

std::string to_json(const CompareReport& report, int indent) {
  json runs = json::array();
  for (const auto& r : report.runs) runs.push_back(run_object(r));
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"label", row.label},
                    {"mapping_bytes", row.mapping_bytes},
                    {"memory_reduction", row.memory_reduction},
                    {"latency_speedup", row.latency_speedup},
                    {"waf_delta", row.waf_delta}});
  }
  return json{{"schema_version", kMetricsSchemaVersion}, {"runs", runs}, {"comparison", rows}}.dump(indent);
}

std::string to_json(const LearnStats& st, int indent) {
  json lengths = json::array();
  for (std::size_t i = 0; i < st.segment_members.size(); ++i) {
    lengths.push_back({{"max_members", 1ULL << i}, {"count", st.segment_members[i]}});
  }
  json crb = json::array();
  for (std::size_t i = 0; i < st.crb_bytes_per_group.size(); ++i) {
    crb.push_back({{"max_bytes", i == 0 ? 0ULL : 1ULL << (i - 1)}, {"groups", st.crb_bytes_per_group[i]}});
  }
  return json{{"schema_version", kMetricsSchemaVersion},
              {"gamma", st.gamma},
              {"writes", st.writes},
              {"batches", st.batches},
              {"segments", {{"learned", st.segments}, {"accurate", st.accurate}, {"approximate", st.approximate}}},
              {"segment_members", lengths},
              {"crb_bytes_per_group", crb},
              {"table",
               {{"segments", st.table.segments},
                {"levels", st.table.levels},
                {"segment_bytes", st.table.segment_bytes},
                {"crb_bytes", st.table.crb_bytes},
                {"overhead_bytes", st.table.overhead_bytes},
                {"total_bytes", st.table.total()}}}}
      .dump(indent);
}

std::string metrics_csv_header() {
  std::ostringstream os;
  os << "schema_version,ftl,gamma,ops";
  FtlCounters dummy;
  for_each_counter(dummy, [&](const char* name, std::uint64_t&) { os << ',' << name; });
  os << ",flash_reads,flash_writes,flash_erases,read_mean_us,read_p99_us,write_mean_us,write_p99_us,"
        "mean_us,mapping_bytes,peak_mapping_bytes,waf,misprediction_ratio,cache_hit_ratio,"
        "top_level_ratio,erase_min,erase_max,segments,levels,crb_bytes";
  return os.str();
}

std::string metrics_csv_row(const Metrics& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << kMetricsSchemaVersion << ',' << m.ftl << ',' << m.gamma << ',' << m.ops;
  for_each_counter(m.counters, [&](const char*, const std::uint64_t& v) { os << ',' << v; });
  os << ',' << m.flash_reads << ',' << m.flash_writes << ',' << m.flash_erases << ','
     << m.read_latency.mean << ',' << m.read_latency.p99 << ',' << m.write_latency.mean << ','
     << m.write_latency.p99 << ',' << m.all_latency.mean << ',' << m.mapping_bytes << ','
     << m.peak_mapping_bytes << ',' << m.waf << ',' << m.misprediction_ratio << ','
     << m.cache_hit_ratio << ',' << m.top_level_ratio << ',' << m.erase_min << ',' << m.erase_max
     << ',' << m.segments << ',' << m.levels << ',' << m.crb_bytes;
  return os.str();
}

}  // namespace leaftl
