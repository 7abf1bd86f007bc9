#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leaftl/ftl.hpp"

namespace leaftl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  FtlConfig ftl;
  std::uint64_t seed = 42;
  std::uint64_t warmup_writes = 0;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::string default_value;
};

/// Every recognised key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Byte count with optional K/M/G suffix (powers of 1024), e.g. "8M".
std::uint64_t parse_size(std::string_view text);

/// Flat key=value text; '#' starts a comment. Throws ConfigError with the
/// line number on malformed lines and unknown keys.
std::map<std::string, std::string> parse_config_text(std::string_view text);
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Applies one key; throws ConfigError on an unknown key or bad value.
void apply_setting(SimConfig& config, const std::string& key, const std::string& value);

/// defaults <- file entries <- overrides, then validation.
SimConfig build_config(const std::map<std::string, std::string>& file_entries,
                       const std::map<std::string, std::string>& overrides);

}  // namespace leaftl
