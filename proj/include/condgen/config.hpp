#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "condgen/model.hpp"
#include "condgen/reward.hpp"
#include "condgen/training.hpp"

namespace condgen {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskKind { scalar, vector };

/// Everything a `train` run reads from a config file.
struct RunConfig {
  TaskKind task = TaskKind::scalar;
  ModelConfig model;  // vocab_size and cond_dim are taken from the data
  TrainConfig train;
  RewardSpec reward;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; `#` starts a comment; blank lines ignored. Malformed
/// lines and repeated keys are errors carrying the line number.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

/// Applies one key; unknown keys and unparsable values throw ConfigError.
void apply_key(RunConfig& config, const std::string& key, const std::string& value);
void apply_all(RunConfig& config, const KeyValues& kv);

/// Canonical text form (every key, fixed order); stable across runs.
std::string to_text(const RunConfig& config);

std::vector<std::string> config_keys();

}  // namespace condgen
