#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "condgen/dataset.hpp"
#include "condgen/nn/ops.hpp"
#include "condgen/nn/parameters.hpp"
#include "condgen/nn/tape.hpp"
#include "condgen/rng.hpp"

namespace condgen {

struct ModelConfig {
  int vocab_size = 19;
  int embed_dim = 64;
  int cond_dim = 1;
  int hidden_dim = 128;
  int num_layers = 2;
  /// Longest full token sequence, START and STOP included.
  int max_len = 32;
  int start_token = kStartToken;
  int stop_token = kStopToken;

  void validate() const;
  std::vector<std::int64_t> to_fields() const;
  static ModelConfig from_fields(const std::vector<std::int64_t>& fields);
  bool operator==(const ModelConfig&) const = default;
};

/// A row of a teacher-forced batch. `tokens` starts with START and either ends
/// with STOP or is a truncated prefix of length max_len.
struct SequenceRow {
  const TokenSequence* tokens = nullptr;
  const std::vector<double>* cond = nullptr;
  double weight = 1.0;
};

/// Conditional stacked LSTM p(x | y). The conditioning vector is concatenated
/// to the token embedding at every step; the softmax covers all vocab_size
/// tokens.
class ConditionalLstm {
 public:
  ConditionalLstm(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  // Training path (recorded on a tape).

  /// sum_r w_r * sum_t -log p(x_t | x_<t, y_r).
  nn::Var weighted_nll(nn::Tape& tape, const std::vector<SequenceRow>& rows);
  /// sum_r w_r * sum_t H[p(. | x_<t, y_r)] over the steps that predict
  /// tokens 1..len-1 of each row (prefixes held fixed).
  nn::Var weighted_prefix_entropy(nn::Tape& tape, const std::vector<SequenceRow>& rows);
  /// Unroll feeding the probability-weighted mean embedding; stops after the
  /// step whose argmax is STOP. Returns the summed per-step entropies.
  nn::Var straight_through_entropy(nn::Tape& tape, const std::vector<double>& cond);

  // Inference path.

  double log_prob(const TokenSequence& tokens, const std::vector<double>& cond) const;
  /// Per-row log p(x | y) (weights ignored).
  std::vector<double> log_prob_batch(const std::vector<SequenceRow>& rows) const;
  std::vector<double> step_distribution(const TokenSequence& prefix, const std::vector<double>& cond) const;

  /// Ancestral sampling until STOP or `max_len` total tokens (0 = config.max_len).
  TokenSequence sample(const std::vector<double>& cond, Rng& rng, int max_len = 0, double temperature = 1.0) const;
  /// Row r uses rngs[r]; results do not depend on how rows are batched.
  std::vector<TokenSequence> sample_batch(const std::vector<std::vector<double>>& conds, std::vector<Rng>& rngs,
                                          int max_len = 0, double temperature = 1.0) const;
  /// Argmax decoding, ties to the lowest token index.
  TokenSequence greedy_decode(const std::vector<double>& cond, int max_len = 0) const;
  std::vector<TokenSequence> greedy_batch(const std::vector<std::vector<double>>& conds, int max_len = 0) const;

  /// Decoded sequence with the log-probability of its tokens and the sum of
  /// the closed-form entropies of the distributions it was drawn from.
  struct Trace {
    TokenSequence tokens;
    double log_prob = 0.0;
    double entropy_sum = 0.0;
  };
  std::vector<Trace> sample_traced(const std::vector<std::vector<double>>& conds, std::vector<Rng>& rngs,
                                   int max_len = 0) const;
  std::vector<Trace> greedy_traced(const std::vector<std::vector<double>>& conds, int max_len = 0) const;

  /// Deterministic work counter in row-steps: inference adds 1 per row per
  /// step, a recorded training step adds 3 (forward and backward).
  std::uint64_t compute_units() const { return compute_units_.load(); }
  void reset_compute_units() { compute_units_.store(0); }

  void save(const std::filesystem::path& path, std::uint64_t dataset_hash,
            std::optional<std::uint64_t> adam_steps = std::nullopt) const;
  /// Returns the model; `dataset_hash`/`adam_steps` receive stored metadata.
  static ConditionalLstm load(const std::filesystem::path& path, std::uint64_t* dataset_hash = nullptr,
                              std::optional<std::uint64_t>* adam_steps = nullptr);

  ConditionalLstm(const ConditionalLstm& other);
  ConditionalLstm& operator=(const ConditionalLstm& other);

 private:
  struct Unrolled {
    nn::Var logits;
    std::vector<int> targets;
    std::vector<double> weights;
  };
  Unrolled unroll(nn::Tape& tape, const std::vector<SequenceRow>& rows);

  struct RunState;
  void run_step(RunState& st, const std::vector<int>& tokens, nn::Matrix& logits) const;
  std::vector<TokenSequence> decode_batch(const std::vector<std::vector<double>>& conds, std::vector<Rng>* rngs,
                                          int max_len, double temperature, std::vector<Trace>* traces = nullptr) const;
  int resolve_max_len(int max_len) const;
  void check_cond(const std::vector<double>& cond) const;

  ModelConfig config_;
  nn::ParameterSet params_;
  std::size_t embedding_ = 0;
  std::vector<std::size_t> lstm_w_, lstm_b_;
  std::size_t out_w_ = 0, out_b_ = 0;
  mutable std::atomic<std::uint64_t> compute_units_{0};
};

}  // namespace condgen
