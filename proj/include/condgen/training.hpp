#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "condgen/augmentation.hpp"
#include "condgen/dataset.hpp"
#include "condgen/evaluator.hpp"
#include "condgen/model.hpp"
#include "condgen/reward.hpp"

namespace condgen {

enum class Objective { ml, surrogate, surrogate_entropy, reinforce, raml_is };

const char* to_string(Objective o);
/// Accepts both `surrogate-entropy` and `surrogate_entropy` spellings.
Objective parse_objective(const std::string& name);

struct TrainConfig {
  Objective objective = Objective::ml;
  std::size_t batch_size = 64;  // sequences per batch
  std::size_t max_epochs = 20;
  double lr = 1e-3;
  double entropy_weight = 0.0;
  std::size_t samples_per_target = 10;  // K
  std::size_t reinforce_samples = 30;   // M
  double reinforce_temperature = 0.5;   // reward lambda for l1-threshold rewards
  std::size_t warm_start_epochs = 6;
  std::uint64_t seed = 0;
  double early_stop_factor = 2.0;
  double clip_norm = 5.0;
  bool presampled = true;            // surrogate: pre-sampled pairs vs per-batch draws
  std::size_t pairs_per_epoch = 0;   // sequences per epoch; 0 = training-set size
  std::size_t validation_subset = 2000;
  double invalid_penalty = 1000.0;
  double match_sigma = 1.0;
  std::uint64_t max_compute_units = 0;  // 0 = unlimited
  std::size_t raml_proposals = 10;
  AugmentConfig proposal;            // RAML-IS proposal distribution
  std::filesystem::path nan_dump_dir = ".";

  void validate() const;
};

/// Scalar value task (oracle == nullptr) or vector task scored by `oracle`
/// against each example's y_cond.
struct Task {
  const PropertyOracle* oracle = nullptr;
  RewardSpec reward;

  /// Error of a decoded string against a target, nullopt when invalid.
  std::optional<double> error(const std::string& s, const LabeledExample& target) const;
  double reward_of(const std::string& s, const LabeledExample& target) const;
};

struct TrainInputs {
  const std::vector<LabeledExample>* train = nullptr;
  const std::vector<LabeledExample>* validation = nullptr;
  const Vocabulary* vocab = nullptr;
  const MatchIndex* index = nullptr;  // surrogate objectives
  Task task;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_error = 0.0;
  double val_nll = 0.0;
  double val_validity = 0.0;
  std::uint64_t compute_units = 0;
};

struct TrainCounters {
  std::size_t batches = 0;
  std::size_t skipped_batches = 0;   // all-invalid / all-zero-weight batches
  std::size_t skipped_targets = 0;   // empty match rows, all-zero rows
  std::size_t proposals = 0;         // RAML-IS proposals drawn
  std::size_t zero_reward_proposals = 0;
  std::size_t samples = 0;           // REINFORCE samples drawn
  std::size_t invalid_samples = 0;
};

struct TrainResult {
  ConditionalLstm model;  // best-validation snapshot
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
  bool budget_exhausted = false;
  std::uint64_t compute_units = 0;  // training work only
  std::uint64_t adam_steps = 0;     // at the best snapshot
  TrainCounters counters;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stop when the latest error exceeds factor * the best earlier error.
bool early_stop(const std::vector<double>& errors, double factor = 2.0);

/// One shared loop for every objective. `init` warm-starts from existing
/// parameters; otherwise parameters are initialised from the seed.
TrainResult train(const TrainInputs& inputs, const ModelConfig& model_config, const TrainConfig& config,
                  const ConditionalLstm* init = nullptr);

/// ML for warm_start_epochs, then REINFORCE. When max_compute_units is set it
/// bounds the two phases together.
TrainResult train_reinforce_warm(const TrainInputs& inputs, const ModelConfig& model_config, const TrainConfig& config);

/// Greedy-decode error and ground-truth NLL on the first `subset` targets.
struct Validation {
  double error = 0.0;
  double nll_per_token = 0.0;
  double validity = 0.0;
};
Validation validate_model(const ConditionalLstm& model, const std::vector<LabeledExample>& targets,
                          const Vocabulary& vocab, const Task& task, std::size_t subset, double invalid_penalty);

std::string history_csv(const std::vector<EpochRecord>& history);

/// Per-token normalised loss for a batch of (tokens, cond) rows with unit
/// weights; the ML batch loss.
nn::Var mean_token_nll(ConditionalLstm& model, nn::Tape& tape, const std::vector<SequenceRow>& rows);

}  // namespace condgen
