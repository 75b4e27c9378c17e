#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "condgen/dataset.hpp"
#include "condgen/evaluator.hpp"
#include "condgen/rng.hpp"

namespace condgen {

enum class DistanceMode { exponential, count_weighted };

struct AugmentConfig {
  double tau = 0.745;
  int max_edit_distance = 5;
  DistanceMode distance_mode = DistanceMode::exponential;
  std::size_t per_instance_target = 10;
  std::size_t max_attempts = 500;

  void validate() const;
};

/// n(m) = C(len, m) * (vocab - 1)^m, in log space.
double log_substitution_count(std::size_t seq_len, std::size_t vocab_size, int m);

/// p(m) for m = 0..max_edit_distance.
///   exponential:     p(m) ∝ exp(-m / tau)
///   count_weighted:  p(m) ∝ n(m) exp(-m / tau)
std::vector<double> edit_distance_distribution(const AugmentConfig& config, std::size_t seq_len,
                                               std::size_t vocab_size);

/// p(0) under the configured mode; makes the calibration of tau visible.
double calibration_p0(const AugmentConfig& config, std::size_t seq_len, std::size_t vocab_size);

int sample_edit_distance(const AugmentConfig& config, std::size_t seq_len, std::size_t vocab_size, Rng& rng);

/// m single-character edits, each a uniform choice of insert / delete /
/// substitute at a uniform position with a uniform character from `alphabet`.
/// Deleting from an empty string is redrawn. Edits may cancel, so the result
/// is within edit distance m of `s`.
std::string perturb(std::string_view s, int m, Rng& rng, std::string_view alphabet);

/// Approximate proposal log-probability log q(x | x*) = log p(m) - log n(m).
double proposal_log_q(const AugmentConfig& config, int m, std::size_t seq_len, std::size_t vocab_size);

struct AugmentedPair {
  std::string expression;
  std::int64_t value = 0;  // paired label
  std::size_t source = 0;  // index of the originating training example
  int edit_distance = 0;   // number of edits applied
};

struct AugmentResult {
  std::vector<AugmentedPair> added;
  std::size_t shortfall = 0;          // missing valid candidates summed over examples
  std::size_t attempts = 0;
  std::size_t dropped_duplicates = 0;  // removed by the global dedup pass
};

/// Perturbed strings that the oracle accepts, paired with their re-evaluated
/// value. Candidates equal to the source or repeated within an instance are
/// not counted; a final pass drops candidates that duplicate an original or an
/// earlier candidate.
AugmentResult augment_classic(const std::vector<LabeledExample>& train, const PropertyOracle& oracle,
                              const AugmentConfig& config, std::uint64_t seed, std::string_view alphabet);

/// As augment_classic, but each candidate keeps the source example's label.
AugmentResult augment_raml(const std::vector<LabeledExample>& train, const PropertyOracle& oracle,
                           const AugmentConfig& config, std::uint64_t seed, std::string_view alphabet);

/// Originals followed by the added pairs, as labeled examples.
std::vector<LabeledExample> extend_dataset(const std::vector<LabeledExample>& train, const AugmentResult& aug,
                                           const Vocabulary& vocab);

/// `<expression>\t<value>\t<source>\t<edit_distance>` per added pair.
std::string augmented_tsv(const AugmentResult& aug);

struct SensitivityRow {
  int m = 0;
  std::size_t perturbations = 0;
  double validity = 0.0;
  double uniqueness = 0.0;  // distinct valid / valid
  double mse = 0.0;         // mean (f(x) - f(x*))^2 over valid perturbations
};

/// For each m, perturbs `strings_per_m` sampled training strings
/// `perturbations_per_string` times each.
std::vector<SensitivityRow> edit_sensitivity_study(const std::vector<LabeledExample>& train, int m_min, int m_max,
                                                   std::size_t strings_per_m, std::size_t perturbations_per_string,
                                                   std::uint64_t seed, std::string_view alphabet);

std::string sensitivity_csv(const std::vector<SensitivityRow>& rows);

}  // namespace condgen
