#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "condgen/nn/parameters.hpp"

namespace condgen::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary checkpoint, little-endian:
///   magic "CGCKPT\0\1", u32 version, u32 n_config, i64 config[n_config],
///   u64 dataset_hash, u32 n_params, per parameter (u64 rows, u64 cols),
///   then all parameter values as f64 in declaration order,
///   u8 has_adam, and if set: u64 step, then m and v in the same order.
struct CheckpointHeader {
  std::vector<std::int64_t> config;
  std::uint64_t dataset_hash = 0;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ParameterSet& params,
                     const std::optional<std::uint64_t>& adam_steps);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Restores values (and Adam moments when present) into `params`, whose
/// shapes must match. Returns the stored Adam step count, if any.
std::optional<std::uint64_t> load_checkpoint(const std::filesystem::path& path, ParameterSet& params,
                                             CheckpointHeader* header = nullptr);

}  // namespace condgen::nn
