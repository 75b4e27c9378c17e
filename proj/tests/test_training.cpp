#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

#include "condgen/training.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

using namespace condgen;

namespace {

std::vector<double> flat(const ConditionalLstm& m) {
  std::vector<double> out;
  for (const auto& p : m.params()) out.insert(out.end(), p.value.storage().begin(), p.value.storage().end());
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Training examples with pairwise distinct values.
std::vector<LabeledExample> distinct_values(std::size_t n, std::uint64_t seed) {
  std::map<std::int64_t, LabeledExample> by_value;
  for (auto& e : small_train(8 * n, seed)) by_value.emplace(e.value, e);
  std::vector<LabeledExample> out;
  for (auto& [v, e] : by_value) {
    if (out.size() == n) break;
    if (e.expression.size() <= 12) out.push_back(e);
  }
  return out;
}

ModelConfig small_model() {
  ModelConfig c;
  c.embed_dim = 8;
  c.hidden_dim = 16;
  c.num_layers = 1;
  c.max_len = 32;
  return c;
}

TrainConfig quick(Objective o) {
  TrainConfig c;
  c.objective = o;
  c.batch_size = 8;
  c.max_epochs = 3;
  c.lr = 0.01;
  c.seed = 11;
  c.validation_subset = 16;
  c.early_stop_factor = 1e300;
  return c;
}

class FarOracle final : public PropertyOracle {
 public:
  std::size_t arity() const override { return 1; }
  std::optional<std::vector<double>> evaluate(std::string_view) const override { return std::vector<double>{1e6}; }
};

}  // namespace

TEST(EarlyStop, Examples) {
  EXPECT_FALSE(early_stop({10}));
  EXPECT_FALSE(early_stop({10, 9}));
  EXPECT_FALSE(early_stop({10, 9, 8}));
  EXPECT_TRUE(early_stop({10, 9, 8, 17}));
  EXPECT_TRUE(early_stop({10, 21}));
  std::vector<double> dec;
  for (int i = 0; i < 50; ++i) {
    dec.push_back(100.0 - i);
    EXPECT_FALSE(early_stop(dec));
  }
  EXPECT_FALSE(early_stop({10, 16}, 2.0));
  EXPECT_TRUE(early_stop({10, 16}, 1.5));
}

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.early_stop_factor = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.entropy_weight = -1e-3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_objective("surrogate-entropy"), Objective::surrogate_entropy);
  EXPECT_EQ(parse_objective("surrogate_entropy"), Objective::surrogate_entropy);
  EXPECT_THROW(parse_objective("adversarial"), std::invalid_argument);
}

TEST(TrainMl, MemorizesSingleExample) {
  const auto vocab = Vocabulary::expressions();
  const std::vector<LabeledExample> one{make_example("12*(3+4)", 84, vocab)};
  ModelConfig mc = small_model();
  mc.embed_dim = 16;
  mc.hidden_dim = 32;
  TrainConfig tc = quick(Objective::ml);
  tc.batch_size = 1;
  tc.max_epochs = 200;
  tc.early_stop_factor = 2.0;
  const auto res = train({&one, &one, &vocab, nullptr, {}}, mc, tc);
  ASSERT_FALSE(res.history.empty());
  double best = INFINITY;
  for (const auto& r : res.history) best = std::min(best, r.val_nll);
  EXPECT_LT(best, 0.01);
  EXPECT_LE(res.counters.batches, 200u);
}

TEST(TrainMl, Deterministic) {
  const auto vocab = Vocabulary::expressions();
  const auto data = small_train(64, 1);
  const TrainConfig tc = quick(Objective::ml);
  const auto a = train({&data, &data, &vocab, nullptr, {}}, small_model(), tc);
  const auto b = train({&data, &data, &vocab, nullptr, {}}, small_model(), tc);
  EXPECT_EQ(flat(a.model), flat(b.model));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_error, b.history[i].val_error);
  }
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  EXPECT_EQ(a.compute_units, b.compute_units);
}

TEST(TrainSurrogate, DegenerateIndexMatchesMl) {
  const auto vocab = Vocabulary::expressions();
  const auto data = distinct_values(48, 2);
  ASSERT_EQ(data.size(), 48u);
  std::vector<std::int64_t> values;
  for (const auto& e : data) values.push_back(e.value);
  const auto index = MatchIndex::scalar(values);
  const TrainResult ml = train({&data, &data, &vocab, nullptr, {}}, small_model(), quick(Objective::ml));

  TrainConfig fly = quick(Objective::surrogate);
  fly.presampled = false;
  fly.samples_per_target = 1;
  fly.match_sigma = 1e-9;
  const TrainResult s = train({&data, &data, &vocab, &index, {}}, small_model(), fly);
  ASSERT_EQ(s.history.size(), ml.history.size());
  for (std::size_t i = 0; i < ml.history.size(); ++i)
    EXPECT_NEAR(s.history[i].train_loss, ml.history[i].train_loss, 1e-12);
  EXPECT_LE(max_abs_diff(flat(s.model), flat(ml.model)), 1e-12);

  // Pre-sampled pairs follow the same order within the first epoch.
  TrainConfig pre = fly;
  pre.presampled = true;
  pre.max_epochs = 1;
  TrainConfig ml1 = quick(Objective::ml);
  ml1.max_epochs = 1;
  const TrainResult p = train({&data, &data, &vocab, &index, {}}, small_model(), pre);
  const TrainResult m1 = train({&data, &data, &vocab, nullptr, {}}, small_model(), ml1);
  EXPECT_NEAR(p.history[0].train_loss, m1.history[0].train_loss, 1e-12);
  EXPECT_LE(max_abs_diff(flat(p.model), flat(m1.model)), 1e-12);
}

TEST(TrainSurrogate, BatchGradientIsPerPairAccumulation) {
  const auto vocab = Vocabulary::expressions();
  const auto data = small_train(6, 3);
  ConditionalLstm model(fixtures::tiny_config(19, 4, 6, 2, 32), 5);
  std::vector<SequenceRow> rows;
  double tokens = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    rows.push_back({&data[k].tokens, &data[(k + 1) % data.size()].y_cond, 1.0});
    tokens += static_cast<double>(data[k].tokens.size() - 1);
  }
  nn::Tape tape;
  model.params().zero_grad();
  tape.backward(mean_token_nll(model, tape, rows));
  std::vector<double> batch;
  for (const auto& p : model.params()) batch.insert(batch.end(), p.grad.storage().begin(), p.grad.storage().end());

  std::vector<double> acc(batch.size(), 0.0);
  for (const auto& r : rows) {
    tape.clear();
    model.params().zero_grad();
    tape.backward(model.weighted_nll(tape, {r}));
    std::size_t i = 0;
    for (const auto& p : model.params())
      for (double g : p.grad.storage()) acc[i++] += g / tokens;
  }
  EXPECT_LE(max_abs_diff(batch, acc), 1e-12);
}

TEST(TrainSurrogate, ZeroEntropyWeightSameTrajectory) {
  const auto vocab = Vocabulary::expressions();
  const auto data = small_train(64, 4);
  std::vector<std::int64_t> values;
  for (const auto& e : data) values.push_back(e.value);
  const auto index = MatchIndex::scalar(values);
  const auto a = train({&data, &data, &vocab, &index, {}}, small_model(), quick(Objective::surrogate));
  const auto b = train({&data, &data, &vocab, &index, {}}, small_model(), quick(Objective::surrogate_entropy));
  EXPECT_EQ(flat(a.model), flat(b.model));
  TrainConfig h = quick(Objective::surrogate_entropy);
  h.entropy_weight = 0.05;
  const auto c = train({&data, &data, &vocab, &index, {}}, small_model(), h);
  EXPECT_NE(flat(a.model), flat(c.model));
}

TEST(TrainReinforce, ZeroRewardLeavesParameters) {
  const auto vocab = Vocabulary::expressions();
  auto data = small_train(16, 5);
  for (auto& e : data) e.y_cond = {0.0};
  FarOracle far;
  TrainInputs in{&data, &data, &vocab, nullptr, {&far, {RewardKind::l1_threshold, 1.0, 0.3}}};
  TrainConfig tc = quick(Objective::reinforce);
  tc.reinforce_samples = 4;
  tc.max_epochs = 1;
  const auto res = train(in, small_model(), tc);
  EXPECT_EQ(res.counters.batches, 0u);
  EXPECT_GT(res.counters.skipped_batches, 0u);
  EXPECT_EQ(flat(res.model), flat(ConditionalLstm(small_model(), derive_seed(tc.seed, 1))));
}

// T=1 bandit: a single token after START, reward 1 for token 2. The update is
// the weighted-NLL step used by the REINFORCE loop.
TEST(TrainReinforce, BanditConverges) {
  ConditionalLstm model(fixtures::tiny_config(4, 4, 8, 1, 2), 7);
  nn::Adam adam({0.01, 0.9, 0.999, 1e-8});
  nn::Tape tape;
  const std::vector<double> cond{0.0};
  const std::size_t m = 30;
  for (int step = 0; step < 500; ++step) {
    std::vector<std::vector<double>> conds(m, cond);
    std::vector<Rng> rngs;
    for (std::size_t s = 0; s < m; ++s) rngs.emplace_back(derive_seed(step, s));
    const auto seqs = model.sample_batch(conds, rngs);
    std::vector<SequenceRow> rows;
    for (const auto& x : seqs)
      if (x.size() == 2 && x[1] == 2) rows.push_back({&x, &cond, 1.0 / static_cast<double>(m)});
    if (rows.empty()) continue;
    tape.clear();
    model.params().zero_grad();
    tape.backward(model.weighted_nll(tape, rows));
    adam.step(model.params());
  }
  EXPECT_GT(model.step_distribution({kStartToken}, cond)[2], 0.9);
}

TEST(TrainReinforce, WarmStartRuns) {
  const auto vocab = Vocabulary::expressions();
  const auto data = small_train(32, 6);
  TrainConfig tc = quick(Objective::reinforce);
  tc.warm_start_epochs = 1;
  tc.max_epochs = 1;
  tc.reinforce_samples = 4;
  const auto res = train_reinforce_warm({&data, &data, &vocab, nullptr, {}}, small_model(), tc);
  EXPECT_EQ(res.history.size(), 2u);
  EXPECT_GT(res.counters.samples, 0u);
  EXPECT_GT(res.history[1].compute_units, res.history[0].compute_units);
}

TEST(TrainRaml, ZeroDistanceReducesToMl) {
  const auto vocab = Vocabulary::expressions();
  const auto data = small_train(48, 7);
  TrainConfig tc = quick(Objective::raml_is);
  tc.raml_proposals = 1;
  tc.proposal.tau = 1e-3;
  const auto r = train({&data, &data, &vocab, nullptr, {}}, small_model(), tc);
  const auto m = train({&data, &data, &vocab, nullptr, {}}, small_model(), quick(Objective::ml));
  EXPECT_EQ(r.counters.zero_reward_proposals, 0u);
  ASSERT_EQ(r.history.size(), m.history.size());
  for (std::size_t i = 0; i < m.history.size(); ++i) EXPECT_NEAR(r.history[i].train_loss, m.history[i].train_loss, 1e-12);
  EXPECT_LE(max_abs_diff(flat(r.model), flat(m.model)), 1e-12);
}

TEST(TrainRaml, CountsZeroRewardProposals) {
  const auto vocab = Vocabulary::expressions();
  const auto data = small_train(32, 8);
  TrainConfig tc = quick(Objective::raml_is);
  tc.max_epochs = 1;
  tc.batch_size = 40;
  const auto r = train({&data, &data, &vocab, nullptr, {}}, small_model(), tc);
  EXPECT_GT(r.counters.proposals, 0u);
  EXPECT_GT(r.counters.zero_reward_proposals, 0u);
  EXPECT_LE(r.counters.zero_reward_proposals, r.counters.proposals);
}

TEST(TrainLoop, NonFiniteUpdateDumpsBatch) {
  const auto vocab = Vocabulary::expressions();
  const auto data = small_train(16, 9);
  const auto dir = scratch_dir("nan_dump");
  TrainConfig tc = quick(Objective::ml);
  tc.lr = std::numeric_limits<double>::infinity();
  tc.nan_dump_dir = dir;
  EXPECT_THROW(train({&data, &data, &vocab, nullptr, {}}, small_model(), tc), TrainingError);
  std::size_t files = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir)) files += f.path().extension() == ".tsv";
  EXPECT_EQ(files, 1u);
}

TEST(TrainLoop, ComputeBudgetStops) {
  const auto vocab = Vocabulary::expressions();
  const auto data = small_train(64, 10);
  TrainConfig tc = quick(Objective::ml);
  tc.max_compute_units = 500;
  const auto res = train({&data, &data, &vocab, nullptr, {}}, small_model(), tc);
  EXPECT_TRUE(res.budget_exhausted);
  EXPECT_EQ(res.history.size(), 1u);
  EXPECT_GE(res.compute_units, 500u);
  EXPECT_LT(res.compute_units, 500u + 3 * 8 * 16);
}
