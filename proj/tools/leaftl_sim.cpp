#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "leaftl/config.hpp"
#include "leaftl/sim.hpp"
#include "leaftl/workload.hpp"

namespace {

using namespace leaftl;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitOracle = 3;
constexpr int kExitCapacity = 4;

struct WorkloadArgs {
  std::string trace;
  std::string synth;
  std::string count;  // empty: subcommand default
  std::string pages;
  double read_ratio = 0.0;
  bool strict = false;
};

struct OutputArgs {
  std::string json;
  std::string csv;
};

struct CommonArgs {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  WorkloadArgs workload;
  OutputArgs output;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "key=value configuration file");
  for (const auto& key : config_keys()) {
    cmd->add_option_function<std::string>(
           "--" + key.name, [&args, name = key.name](const std::string& v) { args.overrides[name] = v; },
           key.help + " [default: " + key.default_value + "]")
        ->type_name("VALUE")
        ->group("Configuration");
  }
  auto& w = args.workload;
  cmd->add_option("--trace", w.trace, "MSR Cambridge CSV trace")->group("Workload");
  cmd->add_option("--synth", w.synth, "sequential | random | strided:K | zipf:THETA | mixed:RATIO")
      ->group("Workload");
  cmd->add_option("--count", w.count, "synthetic request count, K/M/G = 10^3/10^6/10^9 [default: 100K; recover-test: 1M or twice --crash-at]")
      ->group("Workload");
  cmd->add_option("--pages", w.pages, "synthetic address space in pages [default: logical capacity]")
      ->group("Workload");
  cmd->add_option("--read-ratio", w.read_ratio, "share of synthetic requests issued as reads")
      ->check(CLI::Range(0.0, 1.0))
      ->group("Workload");
  cmd->add_flag("--strict", w.strict, "fail on the first malformed trace line")->group("Workload");
  cmd->add_option("--json", args.output.json, "write JSON here ('-' for stdout)")->group("Output");
  cmd->add_option("--csv", args.output.csv, "write CSV here ('-' for stdout)")->group("Output");
}

std::uint64_t parse_count_arg(const std::string& flag, const std::string& text) {
  if (text.empty()) throw ConfigError(flag + ": empty value");
  std::uint64_t scale = 1;
  std::string digits = text;
  switch (std::toupper(static_cast<unsigned char>(text.back()))) {
    case 'K': scale = 1'000; break;
    case 'M': scale = 1'000'000; break;
    case 'G': scale = 1'000'000'000; break;
    default: break;
  }
  if (scale != 1) digits.pop_back();
  try {
    std::size_t used = 0;
    const auto v = std::stoull(digits, &used);
    if (used != digits.size()) throw std::invalid_argument(text);
    return v * scale;
  } catch (const std::exception&) {
    throw ConfigError(flag + ": bad count '" + text + "'");
  }
}

SimConfig load_config(const CommonArgs& args) {
  std::map<std::string, std::string> file;
  if (!args.config_file.empty()) file = read_config_file(args.config_file);
  return build_config(file, args.overrides);
}

std::vector<TraceEvent> load_events(const WorkloadArgs& w, const SimConfig& config) {
  const Geometry& g = config.ftl.geometry;
  const std::uint64_t logical = g.logical_pages();
  if (!w.trace.empty() && !w.synth.empty()) throw ConfigError("--trace and --synth are exclusive");
  if (!w.trace.empty()) {
    ParseResult parsed;
    try {
      parsed = parse_msr_file(w.trace, w.strict);
    } catch (const TraceParseError& e) {
      throw ConfigError(w.trace + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
    for (const auto& issue : parsed.issues) {
      std::cerr << w.trace << ":" << issue.line << ": skipped: " << issue.message << "\n";
    }
    return scale_to_capacity(parsed.events, logical * g.page_size, g.page_size);
  }
  SynthSpec spec;
  try {
    parse_synth_kind(w.synth.empty() ? "sequential" : w.synth, spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--synth: ") + e.what());
  }
  spec.count = w.count.empty() ? 100'000 : parse_count_arg("--count", w.count);
  spec.seed = config.seed;
  spec.pages = w.pages.empty() ? logical : parse_count_arg("--pages", w.pages);
  spec.page_size = g.page_size;
  spec.read_ratio = w.read_ratio;
  if (spec.pages > logical) {
    throw ConfigError("--pages " + std::to_string(spec.pages) + " exceeds the logical capacity of " +
                      std::to_string(logical) + " pages");
  }
  try {
    return synth(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void apply_gamma(SimConfig& config, std::optional<std::uint32_t> gamma) {
  if (!gamma) return;
  config.ftl.gamma = *gamma;
  try {
    config.ftl.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

SimOptions sim_options(const SimConfig& config) {
  SimOptions o;
  o.seed = config.seed;
  o.warmup_writes = config.warmup_writes;
  return o;
}

// Parses "leaftl", "dftl:0" or "leaftl:8"; the suffix overrides gamma.
std::pair<FtlKind, std::optional<std::uint32_t>> parse_ftl_entry(const std::string& text) {
  const auto colon = text.find(':');
  const auto kind = parse_ftl_kind(text.substr(0, colon));
  if (!kind) throw ConfigError("unknown FTL '" + text.substr(0, colon) + "'");
  if (colon == std::string::npos) return {*kind, std::nullopt};
  try {
    return {*kind, static_cast<std::uint32_t>(std::stoul(text.substr(colon + 1)))};
  } catch (const std::exception&) {
    throw ConfigError("bad gamma in '" + text + "'");
  }
}

void write_text(const std::string& target, const std::string& text) {
  if (target == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(target);
  if (!out) throw ConfigError("cannot write '" + target + "'");
  out << text << "\n";
}

void write_csv(const std::string& target, const std::vector<RunResult>& runs) {
  std::ostringstream os;
  os << metrics_csv_header();
  for (const auto& r : runs) os << "\n" << metrics_csv_row(r.metrics);
  write_text(target, os.str());
}

int report_failure(const OracleFailure& f) {
  std::cerr << "oracle mismatch: " << f.message << " (op " << f.op_index << ", lpa " << f.lpa
            << ", seed " << f.seed << ")\n";
  return kExitOracle;
}

int cmd_run(const CommonArgs& args, const std::string& ftl, std::optional<std::uint64_t> crash_at,
            bool verify, bool no_oracle) {
  SimConfig config = load_config(args);
  const auto [kind, gamma] = parse_ftl_entry(ftl);
  apply_gamma(config, gamma);
  const auto events = load_events(args.workload, config);
  SimOptions options = sim_options(config);
  options.oracle = !no_oracle;
  options.crash_after_writes = crash_at;
  options.verify_after_recovery = verify;
  const RunResult result = run(kind, config.ftl, events, options);
  write_text(args.output.json.empty() ? "-" : args.output.json, to_json(result));
  if (!args.output.csv.empty()) write_csv(args.output.csv, {result});
  return result.failure ? report_failure(*result.failure) : kExitOk;
}

int cmd_compare(const CommonArgs& args, const std::string& ftls) {
  const SimConfig config = load_config(args);
  std::vector<std::pair<FtlKind, std::optional<std::uint32_t>>> entries;
  std::stringstream ss(ftls);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) entries.push_back(parse_ftl_entry(item));
  }
  if (entries.empty()) throw ConfigError("--ftl: empty list");
  const auto events = load_events(args.workload, config);
  CompareReport report;
  for (const auto& [kind, gamma] : entries) {
    FtlConfig fc = config.ftl;
    if (gamma) fc.gamma = *gamma;
    try {
      fc.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    report.runs.push_back(run(kind, fc, events, sim_options(config)));
  }
  report.rows = compare_rows(report.runs);

  std::cout << std::left << std::setw(18) << "ftl" << std::right << std::setw(14) << "mapping_bytes"
            << std::setw(12) << "mem_ratio" << std::setw(12) << "speedup" << std::setw(10) << "waf"
            << std::setw(11) << "waf_delta" << "\n";
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    std::cout << std::left << std::setw(18) << row.label << std::right << std::setw(14)
              << row.mapping_bytes << std::fixed << std::setprecision(3) << std::setw(12)
              << row.memory_reduction << std::setw(12) << row.latency_speedup << std::setw(10)
              << report.runs[i].metrics.waf << std::showpos << std::setw(11) << row.waf_delta
              << std::noshowpos << "\n";
  }
  if (!args.output.json.empty()) write_text(args.output.json, to_json(report));
  if (!args.output.csv.empty()) write_csv(args.output.csv, report.runs);
  for (const auto& r : report.runs) {
    if (r.failure) return report_failure(*r.failure);
  }
  return kExitOk;
}

int cmd_learn_stats(const CommonArgs& args, std::optional<std::uint32_t> batch) {
  const SimConfig config = load_config(args);
  const auto events = load_events(args.workload, config);
  const Geometry& g = config.ftl.geometry;
  const LearnStats st = learn_stats(events, config.ftl.gamma, batch.value_or(g.pages_per_block),
                                    g.logical_pages(), g.page_size);
  write_text(args.output.json.empty() ? "-" : args.output.json, to_json(st));
  return kExitOk;
}

int cmd_recover_test(CommonArgs args, const std::string& ftl, std::optional<std::uint64_t> crash_at) {
  SimConfig config = load_config(args);
  const auto [kind, gamma] = parse_ftl_entry(ftl);
  apply_gamma(config, gamma);
  if (args.workload.count.empty()) {
    args.workload.count = std::to_string(std::max<std::uint64_t>(1'000'000, 2 * crash_at.value_or(0)));
  }
  const auto events = load_events(args.workload, config);
  std::uint64_t writes = 0;
  for (const auto& e : events) {
    if (e.op == OpType::Write) ++writes;
  }
  SimOptions options = sim_options(config);
  options.crash_after_writes = crash_at.value_or(writes / 2);
  if (*options.crash_after_writes > writes) {
    throw ConfigError("--crash-at " + std::to_string(*options.crash_after_writes) +
                      " is past the last of " + std::to_string(writes) + " trace writes");
  }
  options.verify_after_recovery = true;
  const RunResult result = run(kind, config.ftl, events, options);
  if (!args.output.json.empty()) write_text(args.output.json, to_json(result));
  if (result.failure) return report_failure(*result.failure);
  if (result.recovery) {
    std::cout << "crash after " << *options.crash_after_writes << " writes; relearned "
              << result.recovery->blocks_relearned << " blocks"
              << (result.recovery->from_snapshot ? " on top of the last snapshot" : "") << "\n";
  }
  std::cout << "recovered: equivalent\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LeaFTL SSD simulator"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_ftl = "leaftl";
  std::optional<std::uint64_t> run_crash;
  bool run_verify = false;
  bool run_no_oracle = false;
  auto* run_cmd = app.add_subcommand("run", "replay one workload on one FTL and print JSON metrics");
  add_common(run_cmd, run_args);
  run_cmd->add_option("--ftl", run_ftl, "leaftl | dftl | sftl, optionally NAME:GAMMA")->capture_default_str();
  run_cmd->add_option("--crash-at", run_crash, "crash and recover after this many trace writes");
  run_cmd->add_flag("--verify", run_verify, "after recovery, read back every written page");
  run_cmd->add_flag("--no-oracle", run_no_oracle, "skip payload checks on reads");

  CommonArgs cmp_args;
  std::string cmp_ftls = "dftl,sftl,leaftl";
  auto* cmp_cmd = app.add_subcommand("compare", "replay one workload on several FTLs");
  add_common(cmp_cmd, cmp_args);
  cmp_cmd->add_option("--ftl", cmp_ftls, "comma-separated list; ratios are relative to the first")
      ->capture_default_str();

  CommonArgs learn_args;
  std::optional<std::uint32_t> learn_batch;
  auto* learn_cmd = app.add_subcommand("learn-stats", "learn a write stream and report segment statistics");
  add_common(learn_cmd, learn_args);
  learn_cmd->add_option("--batch", learn_batch, "pages per learning batch [default: pages_per_block]")
      ->check(CLI::PositiveNumber);

  CommonArgs rec_args;
  std::string rec_ftl = "leaftl";
  std::optional<std::uint64_t> rec_crash;
  auto* rec_cmd = app.add_subcommand("recover-test", "crash mid-trace, recover and verify every page");
  add_common(rec_cmd, rec_args);
  rec_cmd->add_option("--ftl", rec_ftl, "leaftl | dftl | sftl, optionally NAME:GAMMA")->capture_default_str();
  rec_cmd->add_option("--crash-at", rec_crash, "trace writes before the crash [default: half]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_args, run_ftl, run_crash, run_verify, run_no_oracle);
    if (cmp_cmd->parsed()) return cmd_compare(cmp_args, cmp_ftls);
    if (learn_cmd->parsed()) return cmd_learn_stats(learn_args, learn_batch);
    if (rec_cmd->parsed()) return cmd_recover_test(rec_args, rec_ftl, rec_crash);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapacityExhausted& e) {
    std::cerr << "capacity fault: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
