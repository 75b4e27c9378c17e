#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "condgen/dataset.hpp"
#include "condgen/evaluator.hpp"
#include "condgen/model.hpp"
#include "condgen/rng.hpp"

namespace condgen {

struct GenerationMetrics {
  double validity = 0.0;    // valid / total
  double uniqueness = 0.0;  // distinct valid / valid
  double novelty = 0.0;     // distinct valid not in train / distinct valid
  std::size_t total = 0;
  std::size_t valid = 0;
  std::size_t distinct_valid = 0;
  std::size_t novel = 0;
  bool degenerate = false;  // no valid samples; uniqueness and novelty reported as 0
};

/// `samples` entries that are nullopt (undecodable) count as invalid.
GenerationMetrics generation_metrics(const std::vector<std::optional<std::string>>& samples,
                                     const std::unordered_set<std::string>& train_set);
GenerationMetrics generation_metrics(const std::vector<std::string>& samples,
                                     const std::unordered_set<std::string>& train_set);

/// Source of conditional samples; lets the evaluation run against mock models.
class ConditionalSampler {
 public:
  virtual ~ConditionalSampler() = default;
  /// One decoded string per row (nullopt when the token sequence is malformed).
  virtual std::vector<std::optional<std::string>> sample(const std::vector<std::vector<double>>& conds,
                                                         std::vector<Rng>& rngs) const = 0;
};

class ModelSampler final : public ConditionalSampler {
 public:
  ModelSampler(const ConditionalLstm& model, const Vocabulary& vocab) : model_(model), vocab_(vocab) {}
  std::vector<std::optional<std::string>> sample(const std::vector<std::vector<double>>& conds,
                                                 std::vector<Rng>& rngs) const override;

 private:
  const ConditionalLstm& model_;
  const Vocabulary& vocab_;
};

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over repeats
};

struct SampleRecord {
  std::size_t repeat;
  std::size_t target;
  std::int64_t target_value;
  std::string expression;  // empty when undecodable
  bool valid;
  std::int64_t value;
};

struct EvalReport {
  Stat validity, uniqueness, novelty, mae, exact_accuracy, within_3_accuracy;
  double test_nll_per_token = 0.0;
  bool has_nll = false;
  bool degenerate = false;  // some repeat had no valid samples
  std::size_t invalid_samples = 0;

  std::vector<double> per_property_mse;
  std::vector<double> per_property_correlation;
  std::vector<bool> correlation_degenerate;
  std::size_t vector_targets_scored = 0;

  // Metadata.
  std::uint64_t seed = 0;
  std::string checkpoint_hash;
  std::size_t samples_per_target = 0;
  std::size_t repeats = 0;
  std::size_t targets = 0;

  std::vector<SampleRecord> raw;  // filled when requested
};

struct ScalarEvalOptions {
  std::size_t samples_per_target = 25;
  std::size_t repeats = 6;
  std::uint64_t seed = 0;
  bool keep_samples = false;
};

/// Samples S strings per target per repeat; invalid strings are excluded from
/// MAE/accuracies but counted. `model` (optional) supplies the per-token NLL
/// of the ground-truth test pairs.
EvalReport conditional_eval_scalar(const ConditionalSampler& sampler, const std::vector<LabeledExample>& targets,
                                   const std::unordered_set<std::string>& train_set, const ScalarEvalOptions& options,
                                   const ConditionalLstm* model = nullptr);

/// Per-dimension MSE between the S-averaged properties of valid samples and
/// each target's y_cond, and Pearson correlation across targets. Zero
/// variance gives correlation 0 with the degenerate flag set.
EvalReport conditional_eval_vector(const ConditionalSampler& sampler, const PropertyOracle& oracle,
                                   const std::vector<LabeledExample>& targets, std::size_t samples_per_target,
                                   std::uint64_t seed);

/// Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

std::string report_json(const EvalReport& report);
std::string samples_tsv(const EvalReport& report);

}  // namespace condgen
