#include "condgen/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "condgen/nn/checkpoint.hpp"

namespace condgen {

using nn::Matrix;
using nn::Tape;
using nn::Var;

void ModelConfig::validate() const {
  if (vocab_size < 2 || embed_dim < 1 || cond_dim < 1 || hidden_dim < 1 || num_layers < 1 || max_len < 2)
    throw std::invalid_argument("model config: all sizes must be positive (vocab >= 2, max_len >= 2)");
  if (start_token < 0 || start_token >= vocab_size || stop_token < 0 || stop_token >= vocab_size ||
      start_token == stop_token)
    throw std::invalid_argument("model config: bad START/STOP indices");
}

std::vector<std::int64_t> ModelConfig::to_fields() const {
  return {vocab_size, embed_dim, cond_dim, hidden_dim, num_layers, max_len, start_token, stop_token};
}

ModelConfig ModelConfig::from_fields(const std::vector<std::int64_t>& f) {
  if (f.size() != 8) throw std::invalid_argument("model config: expected 8 fields");
  ModelConfig c;
  c.vocab_size = static_cast<int>(f[0]);
  c.embed_dim = static_cast<int>(f[1]);
  c.cond_dim = static_cast<int>(f[2]);
  c.hidden_dim = static_cast<int>(f[3]);
  c.num_layers = static_cast<int>(f[4]);
  c.max_len = static_cast<int>(f[5]);
  c.start_token = static_cast<int>(f[6]);
  c.stop_token = static_cast<int>(f[7]);
  c.validate();
  return c;
}

ConditionalLstm::ConditionalLstm(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  const std::size_t d = static_cast<std::size_t>(config_.vocab_size);
  const std::size_t e = static_cast<std::size_t>(config_.embed_dim);
  const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
  embedding_ = params_.add("embedding", d, e);
  std::size_t in = e + static_cast<std::size_t>(config_.cond_dim);
  for (int l = 0; l < config_.num_layers; ++l) {
    lstm_w_.push_back(params_.add("lstm" + std::to_string(l) + ".weight", in + hd, 4 * hd));
    lstm_b_.push_back(params_.add("lstm" + std::to_string(l) + ".bias", 1, 4 * hd));
    in = hd;
  }
  out_w_ = params_.add("output.weight", hd, d);
  out_b_ = params_.add("output.bias", 1, d);

  Rng rng(init_seed);
  for (auto& p : params_) {
    if (p.value.rows() == 1) continue;  // biases
    fill_uniform(p.value, 1.0 / std::sqrt(static_cast<double>(p.value.rows())), rng);
  }
  for (auto b : lstm_b_)
    for (std::size_t j = hd; j < 2 * hd; ++j) params_[b].value[j] = 1.0;  // forget gate
}

ConditionalLstm::ConditionalLstm(const ConditionalLstm& o)
    : config_(o.config_),
      params_(o.params_),
      embedding_(o.embedding_),
      lstm_w_(o.lstm_w_),
      lstm_b_(o.lstm_b_),
      out_w_(o.out_w_),
      out_b_(o.out_b_),
      compute_units_(o.compute_units_.load()) {}

ConditionalLstm& ConditionalLstm::operator=(const ConditionalLstm& o) {
  if (this == &o) return *this;
  config_ = o.config_;
  params_ = o.params_;
  embedding_ = o.embedding_;
  lstm_w_ = o.lstm_w_;
  lstm_b_ = o.lstm_b_;
  out_w_ = o.out_w_;
  out_b_ = o.out_b_;
  compute_units_.store(o.compute_units_.load());
  return *this;
}

int ConditionalLstm::resolve_max_len(int max_len) const {
  if (max_len == 0) return config_.max_len;
  if (max_len < 2 || max_len > config_.max_len) throw std::invalid_argument("max_len outside [2, config.max_len]");
  return max_len;
}

void ConditionalLstm::check_cond(const std::vector<double>& cond) const {
  if (cond.size() != static_cast<std::size_t>(config_.cond_dim))
    throw std::invalid_argument("conditioning vector has wrong dimension");
}

namespace {

std::vector<std::size_t> order_by_length(const std::vector<SequenceRow>& rows) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].tokens->size() > rows[b].tokens->size(); });
  return order;
}

int argmax(const double* p, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (p[k] > p[best]) best = k;
  return static_cast<int>(best);
}

int categorical(const double* p, std::size_t n, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (p[k] <= 0.0) continue;
    acc += p[k];
    last = k;
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(last);
}

void select_rows(Matrix& m, const std::vector<std::size_t>& keep) {
  Matrix out(keep.size(), m.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) std::copy(m.row(keep[i]), m.row(keep[i]) + m.cols(), out.row(i));
  m = std::move(out);
}

}  // namespace

ConditionalLstm::Unrolled ConditionalLstm::unroll(Tape& tape, const std::vector<SequenceRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty batch");
  const std::size_t d = static_cast<std::size_t>(config_.vocab_size);
  const std::size_t c = static_cast<std::size_t>(config_.cond_dim);
  const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
  for (const auto& r : rows) {
    const auto& t = *r.tokens;
    if (t.size() < 2 || t.front() != config_.start_token)
      throw std::invalid_argument("sequence must start with START and predict at least one token");
    if (t.size() > static_cast<std::size_t>(config_.max_len)) throw std::invalid_argument("sequence exceeds max_len");
    for (int tok : t)
      if (tok < 0 || static_cast<std::size_t>(tok) >= d) throw std::invalid_argument("token out of range");
    check_cond(*r.cond);
  }
  const auto order = order_by_length(rows);
  const std::size_t n0 = rows.size();
  const std::size_t steps = rows[order[0]].tokens->size() - 1;

  Matrix ymat(n0, c);
  for (std::size_t i = 0; i < n0; ++i) std::copy(rows[order[i]].cond->begin(), rows[order[i]].cond->end(), ymat.row(i));
  const Var y = tape.constant(std::move(ymat));
  std::vector<nn::LstmState> state;
  for (int l = 0; l < config_.num_layers; ++l)
    state.push_back({tape.constant(Matrix(n0, hd)), tape.constant(Matrix(n0, hd))});

  Unrolled out;
  std::vector<Var> tops;
  std::size_t active = n0;
  std::uint64_t units = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    while (active > 0 && rows[order[active - 1]].tokens->size() - 1 <= t) --active;
    std::vector<int> in_tokens(active);
    for (std::size_t i = 0; i < active; ++i) {
      const auto& r = rows[order[i]];
      in_tokens[i] = (*r.tokens)[t];
      out.targets.push_back((*r.tokens)[t + 1]);
      out.weights.push_back(r.weight);
    }
    Var x = nn::concat_cols(tape, nn::embedding(tape, params_[embedding_], in_tokens), nn::top_rows(tape, y, active));
    for (int l = 0; l < config_.num_layers; ++l) {
      auto& s = state[static_cast<std::size_t>(l)];
      s = {nn::top_rows(tape, s.h, active), nn::top_rows(tape, s.c, active)};
      s = nn::lstm_cell(tape, params_[lstm_w_[static_cast<std::size_t>(l)]],
                        params_[lstm_b_[static_cast<std::size_t>(l)]], x, s);
      x = s.h;
    }
    tops.push_back(x);
    units += active;
  }
  out.logits = nn::linear(tape, params_[out_w_], params_[out_b_], nn::stack_rows(tape, tops));
  compute_units_ += 3 * units;
  return out;
}

Var ConditionalLstm::weighted_nll(Tape& tape, const std::vector<SequenceRow>& rows) {
  Unrolled u = unroll(tape, rows);
  return nn::weighted_nll(tape, u.logits, u.targets, u.weights);
}

Var ConditionalLstm::weighted_prefix_entropy(Tape& tape, const std::vector<SequenceRow>& rows) {
  Unrolled u = unroll(tape, rows);
  return nn::weighted_entropy(tape, u.logits, u.weights);
}

Var ConditionalLstm::straight_through_entropy(Tape& tape, const std::vector<double>& cond) {
  check_cond(cond);
  const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
  const std::size_t d = static_cast<std::size_t>(config_.vocab_size);
  Matrix ymat(1, cond.size());
  std::copy(cond.begin(), cond.end(), ymat.data());
  const Var y = tape.constant(std::move(ymat));
  std::vector<nn::LstmState> state;
  for (int l = 0; l < config_.num_layers; ++l) state.push_back({tape.constant(Matrix(1, hd)), tape.constant(Matrix(1, hd))});
  Var emb = nn::embedding(tape, params_[embedding_], {config_.start_token});
  std::vector<Var> step_logits;
  for (int t = 0; t + 1 < config_.max_len; ++t) {
    Var x = nn::concat_cols(tape, emb, y);
    for (int l = 0; l < config_.num_layers; ++l) {
      auto& s = state[static_cast<std::size_t>(l)];
      s = nn::lstm_cell(tape, params_[lstm_w_[static_cast<std::size_t>(l)]],
                        params_[lstm_b_[static_cast<std::size_t>(l)]], x, s);
      x = s.h;
    }
    const Var logits = nn::linear(tape, params_[out_w_], params_[out_b_], x);
    step_logits.push_back(logits);
    compute_units_ += 3;
    if (argmax(tape.value(logits).data(), d) == config_.stop_token) break;
    emb = nn::softmax_mean_embedding(tape, logits, params_[embedding_]);
  }
  const Var all = nn::stack_rows(tape, step_logits);
  return nn::weighted_entropy(tape, all, std::vector<double>(step_logits.size(), 1.0));
}

struct ConditionalLstm::RunState {
  std::vector<Matrix> h, c;
  Matrix cond;
  Matrix x, gates, tanh_c, h_new, c_new;
};

void ConditionalLstm::run_step(RunState& st, const std::vector<int>& tokens, Matrix& logits) const {
  const std::size_t n = tokens.size();
  const std::size_t e = static_cast<std::size_t>(config_.embed_dim);
  const std::size_t c = static_cast<std::size_t>(config_.cond_dim);
  const Matrix& table = params_[embedding_].value;
  st.x.resize(n, e + c);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(table.row(static_cast<std::size_t>(tokens[r])), table.row(static_cast<std::size_t>(tokens[r])) + e,
              st.x.row(r));
    std::copy(st.cond.row(r), st.cond.row(r) + c, st.x.row(r) + e);
  }
  for (std::size_t l = 0; l < st.h.size(); ++l) {
    nn::lstm_cell_forward(params_[lstm_w_[l]].value, params_[lstm_b_[l]].value, st.x, st.h[l], st.c[l], st.gates,
                          st.h_new, st.c_new, st.tanh_c);
    std::swap(st.h[l], st.h_new);
    std::swap(st.c[l], st.c_new);
    st.x = st.h[l];
  }
  nn::linear_forward(params_[out_w_].value, params_[out_b_].value, st.x, logits);
  compute_units_ += n;
}

std::vector<double> ConditionalLstm::log_prob_batch(const std::vector<SequenceRow>& rows) const {
  std::vector<double> out(rows.size(), 0.0);
  if (rows.empty()) return out;
  const std::size_t d = static_cast<std::size_t>(config_.vocab_size);
  const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
  for (const auto& r : rows) {
    const auto& t = *r.tokens;
    if (t.size() < 2 || t.front() != config_.start_token || t.size() > static_cast<std::size_t>(config_.max_len))
      throw std::invalid_argument("log_prob: malformed or overlong sequence");
    for (int tok : t)
      if (tok < 0 || static_cast<std::size_t>(tok) >= d) throw std::invalid_argument("token out of range");
    check_cond(*r.cond);
  }
  const auto order = order_by_length(rows);
  RunState st;
  const std::size_t n0 = rows.size();
  st.h.assign(static_cast<std::size_t>(config_.num_layers), Matrix(n0, hd));
  st.c.assign(static_cast<std::size_t>(config_.num_layers), Matrix(n0, hd));
  st.cond.resize(n0, static_cast<std::size_t>(config_.cond_dim));
  for (std::size_t i = 0; i < n0; ++i)
    std::copy(rows[order[i]].cond->begin(), rows[order[i]].cond->end(), st.cond.row(i));
  const std::size_t steps = rows[order[0]].tokens->size() - 1;
  std::size_t active = n0;
  Matrix logits;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t before = active;
    while (active > 0 && rows[order[active - 1]].tokens->size() - 1 <= t) --active;
    if (active != before) {
      for (auto& m : st.h) m = m.top_rows(active);
      for (auto& m : st.c) m = m.top_rows(active);
      st.cond = st.cond.top_rows(active);
    }
    std::vector<int> in(active);
    for (std::size_t i = 0; i < active; ++i) in[i] = (*rows[order[i]].tokens)[t];
    run_step(st, in, logits);
    for (std::size_t i = 0; i < active; ++i) {
      const int target = (*rows[order[i]].tokens)[t + 1];
      out[order[i]] += logits(i, static_cast<std::size_t>(target)) - nn::logsumexp_row(logits.row(i), d);
    }
  }
  return out;
}

double ConditionalLstm::log_prob(const TokenSequence& tokens, const std::vector<double>& cond) const {
  return log_prob_batch({SequenceRow{&tokens, &cond, 1.0}})[0];
}

std::vector<double> ConditionalLstm::step_distribution(const TokenSequence& prefix,
                                                       const std::vector<double>& cond) const {
  check_cond(cond);
  if (prefix.empty() || prefix.front() != config_.start_token) throw std::invalid_argument("prefix must start with START");
  if (prefix.size() >= static_cast<std::size_t>(config_.max_len)) throw std::invalid_argument("prefix too long");
  const std::size_t d = static_cast<std::size_t>(config_.vocab_size);
  const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
  RunState st;
  st.h.assign(static_cast<std::size_t>(config_.num_layers), Matrix(1, hd));
  st.c.assign(static_cast<std::size_t>(config_.num_layers), Matrix(1, hd));
  st.cond.resize(1, cond.size());
  std::copy(cond.begin(), cond.end(), st.cond.data());
  Matrix logits;
  for (int tok : prefix) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= d) throw std::invalid_argument("token out of range");
    run_step(st, {tok}, logits);
  }
  std::vector<double> p(d);
  nn::softmax_row(logits.data(), d, p.data());
  return p;
}

std::vector<TokenSequence> ConditionalLstm::decode_batch(const std::vector<std::vector<double>>& conds,
                                                         std::vector<Rng>* rngs, int max_len,
                                                         double temperature, std::vector<Trace>* traces) const {
  max_len = resolve_max_len(max_len);
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  for (const auto& c : conds) check_cond(c);
  const std::size_t d = static_cast<std::size_t>(config_.vocab_size);
  const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
  constexpr std::size_t kChunk = 256;
  std::vector<TokenSequence> out(conds.size(), TokenSequence{config_.start_token});
  std::vector<double> probs(d), scaled(d);
  if (traces) traces->assign(conds.size(), Trace{});
  for (std::size_t lo = 0; lo < conds.size(); lo += kChunk) {
    const std::size_t n = std::min(kChunk, conds.size() - lo);
    RunState st;
    st.h.assign(static_cast<std::size_t>(config_.num_layers), Matrix(n, hd));
    st.c.assign(static_cast<std::size_t>(config_.num_layers), Matrix(n, hd));
    st.cond.resize(n, static_cast<std::size_t>(config_.cond_dim));
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      ids[i] = lo + i;
      std::copy(conds[lo + i].begin(), conds[lo + i].end(), st.cond.row(i));
    }
    std::vector<int> tokens(n, config_.start_token);
    Matrix logits;
    for (int t = 0; t + 1 < max_len && !ids.empty(); ++t) {
      run_step(st, tokens, logits);
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        int tok;
        for (std::size_t k = 0; k < d; ++k) scaled[k] = logits(i, k) / temperature;
        if (rngs) {
          nn::softmax_row(scaled.data(), d, probs.data());
          tok = categorical(probs.data(), d, (*rngs)[ids[i]]);
        } else {
          tok = argmax(logits.row(i), d);
        }
        if (traces) {
          Trace& tr = (*traces)[ids[i]];
          tr.log_prob += scaled[static_cast<std::size_t>(tok)] - nn::logsumexp_row(scaled.data(), d);
          tr.entropy_sum += nn::entropy_row(scaled.data(), d);
        }
        out[ids[i]].push_back(tok);
        if (tok != config_.stop_token) keep.push_back(i);
        tokens[i] = tok;
      }
      if (keep.size() != ids.size()) {
        for (auto& m : st.h) select_rows(m, keep);
        for (auto& m : st.c) select_rows(m, keep);
        select_rows(st.cond, keep);
        std::vector<std::size_t> next_ids;
        std::vector<int> next_tokens;
        for (auto i : keep) {
          next_ids.push_back(ids[i]);
          next_tokens.push_back(tokens[i]);
        }
        ids = std::move(next_ids);
        tokens = std::move(next_tokens);
      }
    }
  }
  return out;
}

TokenSequence ConditionalLstm::sample(const std::vector<double>& cond, Rng& rng, int max_len,
                                      double temperature) const {
  std::vector<Rng> rngs{rng};
  auto out = decode_batch({cond}, &rngs, max_len, temperature);
  rng = rngs[0];
  return std::move(out[0]);
}

std::vector<TokenSequence> ConditionalLstm::sample_batch(const std::vector<std::vector<double>>& conds,
                                                         std::vector<Rng>& rngs, int max_len,
                                                         double temperature) const {
  if (rngs.size() != conds.size()) throw std::invalid_argument("one rng per row required");
  return decode_batch(conds, &rngs, max_len, temperature);
}

TokenSequence ConditionalLstm::greedy_decode(const std::vector<double>& cond, int max_len) const {
  return std::move(decode_batch({cond}, nullptr, max_len, 1.0)[0]);
}

std::vector<TokenSequence> ConditionalLstm::greedy_batch(const std::vector<std::vector<double>>& conds,
                                                         int max_len) const {
  return decode_batch(conds, nullptr, max_len, 1.0);
}

std::vector<ConditionalLstm::Trace> ConditionalLstm::sample_traced(const std::vector<std::vector<double>>& conds,
                                                                  std::vector<Rng>& rngs, int max_len) const {
  if (rngs.size() != conds.size()) throw std::invalid_argument("one rng per row required");
  std::vector<Trace> traces;
  auto seqs = decode_batch(conds, &rngs, max_len, 1.0, &traces);
  for (std::size_t i = 0; i < seqs.size(); ++i) traces[i].tokens = std::move(seqs[i]);
  return traces;
}

std::vector<ConditionalLstm::Trace> ConditionalLstm::greedy_traced(const std::vector<std::vector<double>>& conds,
                                                                  int max_len) const {
  std::vector<Trace> traces;
  auto seqs = decode_batch(conds, nullptr, max_len, 1.0, &traces);
  for (std::size_t i = 0; i < seqs.size(); ++i) traces[i].tokens = std::move(seqs[i]);
  return traces;
}

void ConditionalLstm::save(const std::filesystem::path& path, std::uint64_t dataset_hash,
                           std::optional<std::uint64_t> adam_steps) const {
  nn::save_checkpoint(path, {config_.to_fields(), dataset_hash}, params_, adam_steps);
}

ConditionalLstm ConditionalLstm::load(const std::filesystem::path& path, std::uint64_t* dataset_hash,
                                      std::optional<std::uint64_t>* adam_steps) {
  const auto header = nn::read_checkpoint_header(path);
  ConditionalLstm model(ModelConfig::from_fields(header.config), 0);
  auto steps = nn::load_checkpoint(path, model.params_);
  if (dataset_hash) *dataset_hash = header.dataset_hash;
  if (adam_steps) *adam_steps = steps;
  return model;
}

}  // namespace condgen
