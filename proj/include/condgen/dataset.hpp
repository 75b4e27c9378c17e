#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "condgen/grammar.hpp"

namespace condgen {

using TokenSequence = std::vector<int>;

inline constexpr int kPadToken = 0;
inline constexpr int kStartToken = 1;
inline constexpr int kStopToken = 2;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Character-level token table. Indices 0..2 are PAD, START, STOP; the
/// remaining entries are single characters in ascending byte order.
class Vocabulary {
 public:
  Vocabulary() = default;
  static Vocabulary from_characters(std::string_view chars);
  /// Digits, `+ - * / ( )`: the 19-token expression vocabulary.
  static Vocabulary expressions();

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(int token) const { return symbols_.at(static_cast<std::size_t>(token)); }
  bool contains(char c) const { return index_[static_cast<unsigned char>(c)] >= 0; }
  int index_of(char c) const;
  std::string characters() const;

  /// START, one token per character, STOP. Throws DatasetError on unknown characters.
  TokenSequence encode(std::string_view s) const;
  /// Inverse of encode; throws DatasetError on missing delimiters, interior
  /// START/STOP/PAD, or out-of-range indices.
  std::string decode(const TokenSequence& tokens) const;
  /// Payload tokens only (no delimiters); returns false if any token is not a character.
  bool try_decode_payload(const TokenSequence& payload, std::string& out) const;

  /// One token per line, index = line number. PAD/START/STOP are written as <pad>, <s>, </s>.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);

  bool operator==(const Vocabulary& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  int index_[256];
  void rebuild_index();
};

struct LabeledExample {
  std::string expression;
  std::int64_t value = 0;
  TokenSequence tokens;
  std::vector<double> y_cond;  // value / kValueLimit for the scalar task
};

LabeledExample make_example(std::string expression, std::int64_t value, const Vocabulary& vocab);
double scale_target(std::int64_t value);

struct DatasetSplits {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
  Vocabulary vocab;
};

struct BuildOptions {
  /// Samples that pass the length and range filters; failing derivations are redrawn.
  std::size_t n_samples = 500000;
  std::size_t validation_size = 20000;
  std::size_t test_size = 10000;
  std::uint64_t seed = 0;
  DerivationBudget budget;
  /// When non-zero, keep at most this many unique pairs (after the seeded shuffle).
  std::size_t max_unique = 0;
};

struct BuildStats {
  std::size_t samples = 0;             // valid samples drawn (== n_samples)
  std::size_t derivations = 0;         // successful derivations, valid or not
  std::size_t budget_exceeded = 0;     // discarded and resampled
  std::size_t invalid = 0;             // failed range/length/parse filters
  std::size_t unique = 0;              // distinct valid expressions
  std::size_t kept = 0;                // after max_unique
};

struct BuildResult {
  DatasetSplits splits;
  BuildStats stats;
};

/// generate -> evaluate/filter -> dedup -> seeded shuffle -> split. Generation
/// runs in fixed-size chunks with per-chunk rng streams, so the output does
/// not depend on the thread count.
BuildResult build_dataset(const Pcfg& pcfg, const BuildOptions& options);

/// Split layout on disk: train.tsv, valid.tsv, test.tsv, vocab.txt.
void write_splits(const std::filesystem::path& dir, const DatasetSplits& splits);
DatasetSplits read_splits(const std::filesystem::path& dir);
std::vector<LabeledExample> read_tsv(const std::filesystem::path& path, const Vocabulary& vocab);
std::string to_tsv(const std::vector<LabeledExample>& examples);

/// Lineage hash over the serialized splits and vocabulary.
std::uint64_t dataset_hash(const DatasetSplits& splits);

}  // namespace condgen
