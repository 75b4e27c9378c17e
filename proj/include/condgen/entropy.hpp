#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "condgen/model.hpp"
#include "condgen/rng.hpp"

namespace condgen {

enum class EntropyEstimator { exact_enum, mc_A, decomposed_B, greedy, straight_through };

const char* to_string(EntropyEstimator e);

struct EntropyEstimate {
  double value = 0.0;
  EntropyEstimator estimator = EntropyEstimator::exact_enum;
  std::size_t samples = 0;
  /// Standard error from the per-trajectory sample variance (sampled estimators only).
  double std_error = 0.0;
};

/// Exhaustive walk over every sequence the model can emit from `cond`. Each
/// terminal event (STOP, or a prefix reaching max_len) contributes once.
struct EnumeratedEntropy {
  double exact = 0.0;       // -sum_x p(x) log p(x)
  double decomposed = 0.0;  // sum over live prefixes of p(prefix) * H[p(. | prefix)]
  double total_mass = 0.0;  // should be 1
  std::size_t events = 0;
};

/// Throws std::length_error when vocab_size^(max_len - 1) exceeds `limit`.
EnumeratedEntropy enumerate_entropy(const ConditionalLstm& model, const std::vector<double>& cond,
                                    double limit = 1e6);
double entropy_exact_enum(const ConditionalLstm& model, const std::vector<double>& cond);
double entropy_decomposed_B_exhaustive(const ConditionalLstm& model, const std::vector<double>& cond);

EntropyEstimate entropy_mc_A(const ConditionalLstm& model, const std::vector<double>& cond, std::size_t samples,
                             Rng& rng);
EntropyEstimate entropy_decomposed_B(const ConditionalLstm& model, const std::vector<double>& cond,
                                     std::size_t samples, Rng& rng);

/// A and B from the same S trajectories.
struct MatchedEstimates {
  EntropyEstimate a;
  EntropyEstimate b;
};
MatchedEstimates entropy_A_and_B(const ConditionalLstm& model, const std::vector<double>& cond, std::size_t samples,
                                 Rng& rng);

EntropyEstimate entropy_greedy(const ConditionalLstm& model, const std::vector<double>& cond);
EntropyEstimate entropy_straight_through(const ConditionalLstm& model, const std::vector<double>& cond);

/// Differentiable greedy entropy: sum_r w_r * H_greedy(y_r). The greedy prefix
/// is chosen without gradient and then held fixed.
nn::Var entropy_greedy_term(ConditionalLstm& model, nn::Tape& tape, const std::vector<std::vector<double>>& conds,
                            const std::vector<double>& weights);

/// Accumulates the gradient of the exact entropy into the parameter gradient
/// buffers via -sum_x p(x) (1 + log p(x)) grad log p(x). Returns the entropy.
double entropy_gradient_analytic(ConditionalLstm& model, const std::vector<double>& cond);

struct EntropyBenchConfig {
  std::vector<std::size_t> sample_grid{1, 10, 50};
  std::size_t trials = 15;
  std::uint64_t seed = 0;
  bool with_exact = true;
};

struct EntropyBenchRow {
  EntropyEstimator estimator;
  std::size_t samples;
  std::size_t trial;
  std::size_t target;
  double value;
};

/// Mean and sample standard deviation over trials for one target.
struct EntropyBenchSummary {
  EntropyEstimator estimator;
  std::size_t samples;
  std::size_t target;
  double mean;
  double stddev;
  std::size_t count;
};

struct EntropyBenchReport {
  std::vector<EntropyBenchRow> rows;
  std::vector<EntropyBenchSummary> summary;
  std::vector<double> exact;  // per target, when enumerable
};

/// Every estimator at every S for `trials` trials per target. A and B share
/// trajectories within a trial; greedy and straight-through are deterministic
/// and repeated so each (estimator, S) has `trials` rows per target.
EntropyBenchReport entropy_bench(const ConditionalLstm& model, const std::vector<std::vector<double>>& targets,
                                 const EntropyBenchConfig& config);

/// estimator,S,trial,target,value
std::string bench_csv(const std::vector<EntropyBenchRow>& rows);
/// estimator,S,bin_lo,bin_hi,count with `bins` equal-width bins per (estimator, S).
std::string bench_histogram_csv(const std::vector<EntropyBenchRow>& rows, std::size_t bins = 20);

}  // namespace condgen
