#pragma once

#include <string>

#include "json.hpp"

namespace mixwb::cli {

// Merge precedence: flag > file > default. Keys in the file or flag layers
// that the defaults do not declare are rejected.
nlohmann::json merge_config(const nlohmann::json& defaults, const nlohmann::json& file_layer,
                            const nlohmann::json& flag_layer);

nlohmann::json load_config_file(const std::string& path);

// FNV-1a 64 over the canonical (key-sorted) dump, as 16 hex digits.
std::string config_digest(const nlohmann::json& config);

// Last-resort seed: MIXWB_SEED when set, otherwise fallback.
std::uint64_t env_seed(std::uint64_t fallback);

// exit codes shared by every subcommand
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

}  // namespace mixwb::cli
