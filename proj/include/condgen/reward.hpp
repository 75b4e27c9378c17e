#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

#include "condgen/rng.hpp"

namespace condgen {

enum class RewardKind { gaussian_scalar, l1_threshold };

struct RewardSpec {
  RewardKind kind = RewardKind::gaussian_scalar;
  double lambda = 1.0;
  double epsilon = 0.3;  // l1_threshold only

  void validate() const;
};

/// exp(-lambda/2 * (fx - y)^2); lambda = 1 gives the squared-error reward.
double reward_scalar(std::int64_t fx, std::int64_t y, double lambda = 1.0);
double reward_l1(const std::vector<double>& fx, const std::vector<double>& y, const RewardSpec& spec);
double l1_distance(const std::vector<double>& a, const std::vector<double>& b);

using SparseRow = std::vector<std::pair<std::uint64_t, double>>;

class NoSupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// rewards[k] / sum(rewards), zero entries dropped. Throws NoSupportError on an all-zero input.
SparseRow normalize_over_set(const std::vector<double>& rewards);

inline constexpr std::int64_t kBucketMin = -999;
inline constexpr std::int64_t kBucketMax = 999;

/// p(j|i) over training indices. The scalar kind stores exact-value buckets;
/// the vector kind stores one sparse probability row per training target.
class MatchIndex {
 public:
  enum class Kind : std::uint32_t { scalar = 1, vector = 2 };

  static MatchIndex scalar(const std::vector<std::int64_t>& train_values);
  /// Dense reward rows for every target i against every j, kept where l1 <= epsilon,
  /// capped at `max_nonzeros` largest entries, then normalized.
  static MatchIndex vector(const std::vector<std::vector<double>>& train_properties, const RewardSpec& spec,
                           std::size_t max_nonzeros = 512);

  Kind kind() const { return kind_; }
  std::size_t train_size() const { return n_; }

  const std::vector<std::uint32_t>& bucket(std::int64_t value) const;
  bool bucket_empty(std::int64_t value) const { return bucket(value).empty(); }
  const SparseRow& row(std::size_t target) const { return rows_.at(target); }
  std::size_t num_rows() const { return rows_.size(); }
  std::size_t empty_rows() const;
  std::size_t nonzeros() const;

  void save(const std::filesystem::path& path, std::uint64_t dataset_hash) const;
  /// Throws IndexMismatchError if the stored dataset hash differs from `expected_hash`.
  static MatchIndex load(const std::filesystem::path& path, std::uint64_t expected_hash);

 private:
  Kind kind_ = Kind::scalar;
  std::size_t n_ = 0;
  std::vector<std::vector<std::uint32_t>> buckets_;  // value - kBucketMin
  std::vector<SparseRow> rows_;
};

class IndexMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// y' ~ N(y, sigma^2) truncated to (kBucketMin, kBucketMax), rounded to the nearest integer.
std::int64_t sample_rounded_truncated_normal(double y, double sigma, Rng& rng);

/// K training indices matched to value y via the rounded truncated normal. Empty
/// buckets are redrawn up to 32 times, then the nearest non-empty bucket is used.
std::vector<std::uint32_t> sample_matches_scalar(std::int64_t y, const MatchIndex& index, std::size_t k, Rng& rng,
                                                 double sigma = 1.0);

/// Categorical draw from a sparse row.
std::uint32_t sample_from_row(const SparseRow& row, Rng& rng);

struct MatchedPair {
  std::uint32_t source;  // training index j providing x
  std::uint32_t target;  // training index i providing y
};

/// K pairs per target in target order. Scalar indices use `target_values`; vector
/// indices draw from row i. Rows with no support are skipped and counted.
struct PresampleResult {
  std::vector<MatchedPair> pairs;
  std::size_t skipped_targets = 0;
};
PresampleResult presample_training_pairs(const MatchIndex& index, const std::vector<std::int64_t>& target_values,
                                         std::size_t k, std::uint64_t seed, double sigma = 1.0);

/// Exhaustive toy domain: every payload sequence of length 0..max_len over
/// `alphabet` tokens. Used to compute c(y) and the normalized reward exactly.
std::vector<std::vector<int>> enumerate_sequences(int alphabet, int max_len);

struct NormalizedRewardTable {
  std::vector<double> reward;      // R(x; y)
  double normalizer = 0.0;         // c(y)
  std::vector<double> normalized;  // R(x; y) / c(y)

  static NormalizedRewardTable build(std::vector<double> rewards);
};

}  // namespace condgen
