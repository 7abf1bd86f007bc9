#include "leaftl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace leaftl {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::uint64_t parse_uint(const std::string& key, std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

std::uint32_t parse_u32(const std::string& key, std::string_view text) {
  const std::uint64_t v = parse_uint(key, text);
  if (v > 0xFFFFFFFFULL) throw ConfigError(key + ": value too large");
  return static_cast<std::uint32_t>(v);
}

double parse_real(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (text.empty() || used != text.size()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  // Counts accept the same K/M/G suffixes but in powers of 1000.
  if (text.empty()) throw ConfigError(key + ": empty value");
  std::uint64_t scale = 1;
  std::string digits = text;
  switch (std::toupper(static_cast<unsigned char>(text.back()))) {
    case 'K':
      scale = 1000;
      break;
    case 'M':
      scale = 1000 * 1000;
      break;
    case 'G':
      scale = 1000 * 1000 * 1000;
      break;
    default:
      break;
  }
  if (scale != 1) digits.pop_back();
  return parse_uint(key, digits) * scale;
}

bool parse_bool(const std::string& key, const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "1" || t == "true" || t == "on" || t == "yes") return true;
  if (t == "0" || t == "false" || t == "off" || t == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + text + "'");
}

std::uint64_t size_value(const std::string& key, const std::string& text) {
  try {
    return parse_size(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"channels", "flash channels", "16"},
      {"blocks_per_channel", "blocks on each channel", "320"},
      {"pages_per_block", "pages in a flash block", "256"},
      {"page_size", "page size in bytes (K/M/G suffix)", "4K"},
      {"oob_size", "out-of-band bytes per page", "128"},
      {"read_us", "page read latency in microseconds", "20"},
      {"write_us", "page program latency in microseconds", "200"},
      {"erase_us", "block erase latency in microseconds", "1500"},
      {"op_ratio", "overprovisioned fraction of physical pages", "0.2"},
      {"gamma", "maximum prediction error of learned segments, in pages", "0"},
      {"dram", "DRAM size in bytes (K/M/G suffix)", "1G"},
      {"dram_policy", "mapping-first or capped (mapping table limited to 80% of DRAM)", "capped"},
      {"buffer", "write buffer size in bytes (K/M/G suffix)", "8M"},
      {"compaction_interval", "host page writes between table compactions; 0 disables", "1M"},
      {"snapshot_interval", "host page writes between mapping snapshots; 0 disables", "1M"},
      {"snapshot_on_gc", "also snapshot after every garbage collection", "true"},
      {"gc_trigger", "free-block fraction below which GC starts", "0.15"},
      {"gc_stop", "free-block fraction at which GC stops", "0.25"},
      {"wear_threshold", "erase-count spread that triggers wear leveling; 0 disables", "0"},
      {"seed", "seed for synthetic workloads", "42"},
      {"warmup_writes", "sequential page writes issued before the trace", "0"},
  };
  return keys;
}

std::uint64_t parse_size(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) throw std::invalid_argument("empty size");
  std::uint64_t scale = 1;
  std::string digits = t;
  const char last = static_cast<char>(std::toupper(static_cast<unsigned char>(t.back())));
  if (last == 'K' || last == 'M' || last == 'G') {
    scale = last == 'K' ? (1ULL << 10) : last == 'M' ? (1ULL << 20) : (1ULL << 30);
    digits.pop_back();
  }
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw std::invalid_argument("bad size '" + t + "'");
  }
  if (v > (~0ULL) / scale) throw std::invalid_argument("size '" + t + "' overflows");
  return v * scale;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto& keys = config_keys();
    if (std::none_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; })) {
      throw ConfigError("config line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_setting(SimConfig& config, const std::string& key, const std::string& value) {
  auto& f = config.ftl;
  auto& g = f.geometry;
  if (key == "channels") {
    g.channels = parse_u32(key, value);
  } else if (key == "blocks_per_channel") {
    g.blocks_per_channel = parse_u32(key, value);
  } else if (key == "pages_per_block") {
    g.pages_per_block = parse_u32(key, value);
  } else if (key == "page_size") {
    const std::uint64_t v = size_value(key, value);
    if (v > 0xFFFFFFFFULL) throw ConfigError(key + ": value too large");
    g.page_size = static_cast<std::uint32_t>(v);
  } else if (key == "oob_size") {
    const std::uint64_t v = size_value(key, value);
    if (v > 0xFFFFFFFFULL) throw ConfigError(key + ": value too large");
    g.oob_size = static_cast<std::uint32_t>(v);
  } else if (key == "read_us") {
    f.latencies.read_us = parse_real(key, value);
  } else if (key == "write_us") {
    f.latencies.write_us = parse_real(key, value);
  } else if (key == "erase_us") {
    f.latencies.erase_us = parse_real(key, value);
  } else if (key == "op_ratio") {
    g.overprovisioning = parse_real(key, value);
  } else if (key == "gamma") {
    f.gamma = parse_u32(key, value);
  } else if (key == "dram") {
    f.dram_bytes = size_value(key, value);
  } else if (key == "dram_policy") {
    if (value == "mapping-first") {
      f.dram_policy = DramPolicy::MappingFirst;
    } else if (value == "capped") {
      f.dram_policy = DramPolicy::Capped;
    } else {
      throw ConfigError(key + ": expected mapping-first or capped, got '" + value + "'");
    }
  } else if (key == "buffer") {
    f.buffer_bytes = size_value(key, value);
  } else if (key == "compaction_interval") {
    f.compaction_interval = parse_count(key, value);
  } else if (key == "snapshot_interval") {
    f.snapshot_interval = parse_count(key, value);
  } else if (key == "snapshot_on_gc") {
    f.snapshot_on_gc = parse_bool(key, value);
  } else if (key == "gc_trigger") {
    f.gc_trigger = parse_real(key, value);
  } else if (key == "gc_stop") {
    f.gc_stop = parse_real(key, value);
  } else if (key == "wear_threshold") {
    f.wear_threshold = parse_u32(key, value);
  } else if (key == "seed") {
    config.seed = parse_uint(key, value);
  } else if (key == "warmup_writes") {
    config.warmup_writes = parse_count(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

SimConfig build_config(const std::map<std::string, std::string>& file_entries,
                       const std::map<std::string, std::string>& overrides) {
  SimConfig config;
  for (const auto& [k, v] : file_entries) apply_setting(config, k, v);
  for (const auto& [k, v] : overrides) apply_setting(config, k, v);
  try {
    config.ftl.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return config;
}

}  // namespace leaftl
