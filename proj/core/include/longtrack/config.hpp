#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "longtrack/selfeval.hpp"
#include "longtrack/tracker.hpp"

namespace longtrack {

struct RunConfig {
  TrackerConfig tracker;
  TrainConfig selfeval;
  std::string selfeval_model;  // empty: run without a self-evaluation net
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::vector<std::string> sequences;
  std::size_t jobs = 1;
  double eval_window_seconds = 20.0;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

/// Every recognised key in serialization order.
const std::vector<ConfigKey>& config_keys();

/// Throws ConfigError for an unknown key or an unparsable value.
void set_config_value(RunConfig& config, std::string_view key,
                      std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

/// Applies `key = value` lines; `[section]` headers prefix later keys with
/// "section.". '#' starts a comment. Returns the keys that were assigned.
std::set<std::string> apply_config_text(RunConfig& config,
                                        std::string_view text,
                                        const std::string& source);
std::set<std::string> apply_config_file(RunConfig& config,
                                        const std::filesystem::path& path);

/// Canonical text form; derived scale grids appear as comment lines.
std::string serialize_config(const RunConfig& config);

/// Hash of serialize_config with output, sequences and jobs reset, so it
/// only covers settings that affect results. Recorded in results headers.
std::string config_hash(const RunConfig& config);

}  // namespace longtrack
