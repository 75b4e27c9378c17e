#include "condgen/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "condgen/entropy.hpp"
#include "condgen/nn/parameters.hpp"

namespace condgen {

const char* to_string(Objective o) {
  switch (o) {
    case Objective::ml: return "ml";
    case Objective::surrogate: return "surrogate";
    case Objective::surrogate_entropy: return "surrogate-entropy";
    case Objective::reinforce: return "reinforce";
    case Objective::raml_is: return "raml-is";
  }
  return "unknown";
}

Objective parse_objective(const std::string& name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '_', '-');
  for (Objective o : {Objective::ml, Objective::surrogate, Objective::surrogate_entropy, Objective::reinforce,
                      Objective::raml_is})
    if (n == to_string(o)) return o;
  throw std::invalid_argument("unknown objective '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");
  if (!(early_stop_factor > 1.0)) throw std::invalid_argument("early_stop_factor must exceed 1");
  if (!(entropy_weight >= 0.0)) throw std::invalid_argument("entropy_weight must be non-negative");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (samples_per_target < 1 || reinforce_samples < 1 || raml_proposals < 1)
    throw std::invalid_argument("sample counts must be at least 1");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  if (!(match_sigma > 0.0)) throw std::invalid_argument("match_sigma must be positive");
  if (!(invalid_penalty >= 0.0)) throw std::invalid_argument("invalid_penalty must be non-negative");
  proposal.validate();
}

std::optional<double> Task::error(const std::string& s, const LabeledExample& target) const {
  if (!oracle) {
    const EvalOutcome r = eval_expr(s);
    if (!r.ok()) return std::nullopt;
    return std::abs(static_cast<double>(r.value() - target.value));
  }
  const auto prop = oracle->evaluate(s);
  if (!prop) return std::nullopt;
  return l1_distance(*prop, target.y_cond) / static_cast<double>(prop->size());
}

double Task::reward_of(const std::string& s, const LabeledExample& target) const {
  if (!oracle) {
    const EvalOutcome r = eval_expr(s);
    return r.ok() ? reward_scalar(r.value(), target.value, reward.lambda) : 0.0;
  }
  const auto prop = oracle->evaluate(s);
  return prop ? reward_l1(*prop, target.y_cond, reward) : 0.0;
}

bool early_stop(const std::vector<double>& errors, double factor) {
  if (errors.size() < 2) return false;
  const double best = *std::min_element(errors.begin(), errors.end() - 1);
  return errors.back() > factor * best;
}

namespace {

std::optional<std::string> decode_sample(const TokenSequence& tokens, const Vocabulary& vocab, int stop_token) {
  if (tokens.size() < 2 || tokens.back() != stop_token) return std::nullopt;
  std::string s;
  if (!vocab.try_decode_payload(TokenSequence(tokens.begin() + 1, tokens.end() - 1), s)) return std::nullopt;
  return s;
}

std::size_t predictions(const SequenceRow& r) { return r.tokens->size() - 1; }

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

/// Weighted rows normalised per token: weights scaled so the loss is
/// sum_r w_r NLL_r / sum_r w_r len_r.
nn::Var per_token_loss(ConditionalLstm& model, nn::Tape& tape, std::vector<SequenceRow> rows) {
  double denom = 0.0;
  for (const auto& r : rows) denom += r.weight * static_cast<double>(predictions(r));
  for (auto& r : rows) r.weight /= denom;
  return model.weighted_nll(tape, rows);
}

void dump_batch(const std::filesystem::path& dir, std::size_t epoch, std::size_t batch,
                const std::vector<SequenceRow>& rows, const std::string& why) {
  std::filesystem::create_directories(dir);
  const auto path = dir / ("nan_batch_e" + std::to_string(epoch) + "_b" + std::to_string(batch) + ".tsv");
  std::ofstream out(path);
  out.precision(17);
  out << "# " << why << "\n# tokens\tcond\tweight\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.tokens->size(); ++i) out << (i ? " " : "") << (*r.tokens)[i];
    out << '\t';
    for (std::size_t i = 0; i < r.cond->size(); ++i) out << (i ? " " : "") << (*r.cond)[i];
    out << '\t' << r.weight << '\n';
  }
  throw TrainingError(why + " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                      "; batch written to " + path.string());
}

std::size_t rows_per_item(const TrainConfig& c) {
  switch (c.objective) {
    case Objective::ml: return 1;
    case Objective::surrogate:
    case Objective::surrogate_entropy: return c.presampled ? 1 : c.samples_per_target;
    case Objective::reinforce: return c.reinforce_samples;
    case Objective::raml_is: return c.raml_proposals;
  }
  return 1;
}

}  // namespace

nn::Var mean_token_nll(ConditionalLstm& model, nn::Tape& tape, const std::vector<SequenceRow>& rows) {
  std::vector<SequenceRow> unit(rows);
  for (auto& r : unit) r.weight = 1.0;
  return per_token_loss(model, tape, std::move(unit));
}

Validation validate_model(const ConditionalLstm& model, const std::vector<LabeledExample>& targets,
                          const Vocabulary& vocab, const Task& task, std::size_t subset, double invalid_penalty) {
  const std::size_t n = std::min(subset, targets.size());
  Validation v;
  if (n == 0) return v;
  std::vector<std::vector<double>> conds(n);
  std::vector<SequenceRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    conds[i] = targets[i].y_cond;
    rows[i] = {&targets[i].tokens, &targets[i].y_cond, 1.0};
  }
  const auto decoded = model.greedy_batch(conds);
  std::size_t valid = 0;
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<double> e;
    if (auto s = decode_sample(decoded[i], vocab, model.config().stop_token)) e = task.error(*s, targets[i]);
    if (e) {
      ++valid;
      err += *e;
    } else {
      err += invalid_penalty;
    }
  }
  const auto lp = model.log_prob_batch(rows);
  double nll = 0.0, tokens = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    nll -= lp[i];
    tokens += static_cast<double>(predictions(rows[i]));
  }
  v.error = err / static_cast<double>(n);
  v.nll_per_token = nll / tokens;
  v.validity = static_cast<double>(valid) / static_cast<double>(n);
  return v;
}

TrainResult train(const TrainInputs& inputs, const ModelConfig& model_config, const TrainConfig& config,
                  const ConditionalLstm* init) {
  config.validate();
  if (!inputs.train || inputs.train->empty()) throw std::invalid_argument("training set is empty");
  if (!inputs.validation || !inputs.vocab) throw std::invalid_argument("validation set and vocabulary are required");
  const bool surrogate = config.objective == Objective::surrogate || config.objective == Objective::surrogate_entropy;
  if (surrogate && !inputs.index) throw std::invalid_argument("surrogate objectives need a match index");
  if (surrogate && inputs.index->train_size() != inputs.train->size())
    throw std::invalid_argument("match index does not cover the training set");

  const auto& train = *inputs.train;
  const auto& vocab = *inputs.vocab;
  const std::size_t n = train.size();

  TrainResult res{init ? *init : ConditionalLstm(model_config, derive_seed(config.seed, 1)), {}, 0, false, false, 0,
                  0, {}};
  ConditionalLstm model = res.model;
  if (init) model.params().reset_optimizer_state();
  model.reset_compute_units();
  nn::Adam adam({config.lr, 0.9, 0.999, 1e-8});
  const std::string alphabet = vocab.characters();
  const int stop = model.config().stop_token;

  const std::size_t per_item = rows_per_item(config);
  const std::size_t items_per_batch = std::max<std::size_t>(1, config.batch_size / per_item);
  const std::size_t pairs_per_epoch = config.pairs_per_epoch ? config.pairs_per_epoch : n;
  const std::size_t items_per_epoch = std::max<std::size_t>(1, pairs_per_epoch / per_item);

  // Item stream: pre-sampled (source, target) pairs, or target indices cycled
  // through successive seeded permutations.
  Rng order_rng(derive_seed(config.seed, 2));
  std::vector<MatchedPair> stream;
  if (surrogate && config.presampled) {
    std::vector<std::int64_t> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = train[i].value;
    auto pre = presample_training_pairs(*inputs.index, values, config.samples_per_target, derive_seed(config.seed, 3),
                                        config.match_sigma);
    res.counters.skipped_targets += pre.skipped_targets;
    stream = std::move(pre.pairs);
    if (stream.empty()) throw TrainingError("no training pairs after match sampling");
    shuffle(stream, order_rng);
  }
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::size_t cursor = 0;
  const bool use_pairs = !stream.empty();
  if (!use_pairs) shuffle(perm, order_rng);
  auto next_item = [&]() -> MatchedPair {
    if (use_pairs) {
      const MatchedPair p = stream[cursor];
      cursor = (cursor + 1) % stream.size();
      return p;
    }
    if (cursor == perm.size()) {
      shuffle(perm, order_rng);
      cursor = 0;
    }
    const std::uint32_t i = perm[cursor++];
    return {i, i};
  };

  std::uint64_t val_units = 0;
  auto run_validation = [&](std::size_t epoch, double train_loss) {
    const std::uint64_t before = model.compute_units();
    const Validation v = validate_model(model, *inputs.validation, vocab, inputs.task, config.validation_subset,
                                        config.invalid_penalty);
    val_units += model.compute_units() - before;
    res.history.push_back({epoch, train_loss, v.error, v.nll_per_token, v.validity, model.compute_units() - val_units});
  };
  std::vector<double> errors;
  double best = INFINITY;
  auto consider_best = [&]() {
    const auto& rec = res.history.back();
    errors.push_back(rec.val_error);
    if (rec.val_error < best) {
      best = rec.val_error;
      res.model = model;
      res.best_epoch = rec.epoch;
      res.adam_steps = adam.steps();
    }
  };
  if (init) {
    run_validation(0, NAN);
    consider_best();
  }

  std::size_t global_batch = 0;
  nn::Tape tape;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t done = 0; done < items_per_epoch;) {
      if (config.max_compute_units && model.compute_units() - val_units >= config.max_compute_units) {
        res.budget_exhausted = true;
        break;
      }
      const std::size_t take = std::min(items_per_batch, items_per_epoch - done);
      done += take;
      Rng rng(derive_seed(config.seed, 1000 + global_batch));
      ++global_batch;
      std::vector<MatchedPair> items(take);
      for (auto& it : items) it = next_item();

      tape.clear();
      model.params().zero_grad();
      std::vector<SequenceRow> rows;
      std::vector<TokenSequence> owned;  // sequences generated for this batch
      std::optional<nn::Var> loss;

      switch (config.objective) {
        case Objective::ml:
        case Objective::surrogate:
        case Objective::surrogate_entropy: {
          if (use_pairs || config.objective == Objective::ml) {
            for (const auto& it : items) rows.push_back({&train[it.source].tokens, &train[it.target].y_cond, 1.0});
          } else {
            for (const auto& it : items) {
              std::vector<std::uint32_t> matches;
              if (inputs.index->kind() == MatchIndex::Kind::scalar) {
                matches = sample_matches_scalar(train[it.target].value, *inputs.index, config.samples_per_target, rng,
                                                config.match_sigma);
              } else if (!inputs.index->row(it.target).empty()) {
                for (std::size_t k = 0; k < config.samples_per_target; ++k)
                  matches.push_back(sample_from_row(inputs.index->row(it.target), rng));
              } else {
                ++res.counters.skipped_targets;
              }
              for (auto j : matches) rows.push_back({&train[j].tokens, &train[it.target].y_cond, 1.0});
            }
          }
          if (rows.empty()) break;
          loss = mean_token_nll(model, tape, rows);
          if (config.objective == Objective::surrogate_entropy && config.entropy_weight > 0.0) {
            std::vector<std::vector<double>> conds;
            std::vector<std::uint32_t> seen;
            for (const auto& it : items) {
              if (std::find(seen.begin(), seen.end(), it.target) != seen.end()) continue;
              seen.push_back(it.target);
              conds.push_back(train[it.target].y_cond);
            }
            const std::vector<double> w(conds.size(), config.entropy_weight / static_cast<double>(conds.size()));
            const nn::Var h = entropy_greedy_term(model, tape, conds, w);
            loss = nn::add(tape, *loss, nn::scale(tape, h, -1.0));
          }
          break;
        }
        case Objective::reinforce: {
          std::vector<std::vector<double>> conds;
          std::vector<std::uint32_t> tgt;
          for (const auto& it : items)
            for (std::size_t m = 0; m < config.reinforce_samples; ++m) {
              conds.push_back(train[it.target].y_cond);
              tgt.push_back(it.target);
            }
          std::vector<Rng> rngs;
          for (std::size_t s = 0; s < conds.size(); ++s) rngs.emplace_back(rng.next_u64());
          owned = model.sample_batch(conds, rngs);
          res.counters.samples += owned.size();
          std::vector<double> rewards(owned.size(), 0.0);
          std::size_t kept = 0;
          for (std::size_t s = 0; s < owned.size(); ++s) {
            const auto str = decode_sample(owned[s], vocab, stop);
            if (!str || !inputs.task.error(*str, train[tgt[s]])) {
              ++res.counters.invalid_samples;
              continue;
            }
            ++kept;
            rewards[s] = inputs.task.reward_of(*str, train[tgt[s]]);
          }
          for (std::size_t s = 0; s < owned.size(); ++s)
            if (rewards[s] > 0.0)
              rows.push_back({&owned[s], &train[tgt[s]].y_cond, rewards[s] / static_cast<double>(kept)});
          if (!rows.empty()) loss = model.weighted_nll(tape, rows);
          break;
        }
        case Objective::raml_is: {
          struct Proposal {
            std::size_t owned_index;
            double weight;
          };
          owned.reserve(items.size() * config.raml_proposals);
          std::vector<std::pair<std::uint32_t, std::vector<Proposal>>> groups;
          for (const auto& it : items) {
            const auto& src = train[it.target];
            const std::size_t len = std::max<std::size_t>(src.expression.size(), 1);
            std::unordered_set<std::string> seen;
            std::vector<Proposal> props;
            double total = 0.0;
            for (std::size_t k = 0; k < config.raml_proposals; ++k) {
              const int m = sample_edit_distance(config.proposal, len, alphabet.size(), rng);
              std::string x = perturb(src.expression, m, rng, alphabet);
              ++res.counters.proposals;
              if (!seen.insert(x).second) continue;
              double r = inputs.task.reward_of(x, src);
              if (x.size() + 2 > static_cast<std::size_t>(model.config().max_len)) r = 0.0;
              if (!(r > 0.0)) {
                ++res.counters.zero_reward_proposals;
                continue;
              }
              const double w = r * std::exp(-proposal_log_q(config.proposal, m, len, alphabet.size()));
              owned.push_back(vocab.encode(x));
              props.push_back({owned.size() - 1, w});
              total += w;
            }
            if (props.empty() || !(total > 0.0)) {
              ++res.counters.skipped_targets;
              continue;
            }
            for (auto& p : props) p.weight /= total;
            groups.emplace_back(it.target, std::move(props));
          }
          for (const auto& [t, props] : groups)
            for (const auto& p : props) rows.push_back({&owned[p.owned_index], &train[t].y_cond, p.weight});
          if (!rows.empty()) loss = per_token_loss(model, tape, rows);
          break;
        }
      }

      if (!loss) {
        ++res.counters.skipped_batches;
        continue;
      }
      const double lv = tape.value(*loss)(0, 0);
      if (!std::isfinite(lv)) dump_batch(config.nan_dump_dir, epoch, global_batch, rows, "non-finite loss");
      tape.backward(*loss);
      if (!model.params().grads_finite())
        dump_batch(config.nan_dump_dir, epoch, global_batch, rows, "non-finite gradient");
      nn::clip_grad_norm(model.params(), config.clip_norm);
      adam.step(model.params());
      if (!model.params().values_finite())
        dump_batch(config.nan_dump_dir, epoch, global_batch, rows, "non-finite parameters after update");
      ++res.counters.batches;
      loss_sum += lv;
      ++loss_count;
    }
    run_validation(epoch, loss_count ? loss_sum / static_cast<double>(loss_count) : NAN);
    consider_best();
    if (early_stop(errors, config.early_stop_factor)) {
      res.early_stopped = true;
      break;
    }
    if (res.budget_exhausted) break;
  }
  res.compute_units = model.compute_units() - val_units;
  return res;
}

TrainResult train_reinforce_warm(const TrainInputs& inputs, const ModelConfig& model_config,
                                 const TrainConfig& config) {
  TrainConfig warm = config;
  warm.objective = Objective::ml;
  warm.max_epochs = std::max<std::size_t>(1, config.warm_start_epochs);
  TrainResult ml = train(inputs, model_config, warm, nullptr);
  if (config.max_compute_units && ml.compute_units >= config.max_compute_units) {
    ml.budget_exhausted = true;
    return ml;
  }
  TrainConfig rl = config;
  rl.objective = Objective::reinforce;
  rl.seed = derive_seed(config.seed, 77);
  if (config.max_compute_units) rl.max_compute_units = config.max_compute_units - ml.compute_units;
  TrainResult out = train(inputs, model_config, rl, &ml.model);
  std::vector<EpochRecord> history = ml.history;
  const std::size_t offset = history.empty() ? 0 : history.back().epoch;
  for (auto rec : out.history) {
    if (rec.epoch == 0) continue;  // the warm-start model, already recorded
    rec.epoch += offset;
    rec.compute_units += ml.compute_units;
    history.push_back(rec);
  }
  if (out.best_epoch != 0) out.best_epoch += offset;
  else out.best_epoch = ml.best_epoch;
  out.history = std::move(history);
  out.compute_units += ml.compute_units;
  return out;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,train_loss,val_error,val_nll\n";
  for (const auto& r : history) os << r.epoch << ',' << r.train_loss << ',' << r.val_error << ',' << r.val_nll << '\n';
  return os.str();
}

}  // namespace condgen
