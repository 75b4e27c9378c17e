#pragma once

#include <cmath>
#include <vector>

#include "condgen/model.hpp"
#include "condgen/nn/tape.hpp"

namespace fixtures {

inline condgen::ModelConfig tiny_config(int vocab, int embed, int hidden, int layers, int max_len, int cond_dim = 1) {
  condgen::ModelConfig c;
  c.vocab_size = vocab;
  c.embed_dim = embed;
  c.hidden_dim = hidden;
  c.num_layers = layers;
  c.max_len = max_len;
  c.cond_dim = cond_dim;
  return c;
}

/// Scales every parameter by `gain` (sharper, more prefix-dependent distributions).
inline void sharpen(condgen::ConditionalLstm& m, double gain) {
  for (auto& p : m.params())
    for (auto& x : p.value.storage()) x *= gain;
}

inline void zero_all(condgen::ConditionalLstm& m) {
  for (auto& p : m.params()) p.value.set_zero();
}

/// Every step emits STOP with probability ~1.
inline condgen::ConditionalLstm forced_stop(const condgen::ModelConfig& c) {
  condgen::ConditionalLstm m(c, 1);
  zero_all(m);
  m.params().at("output.bias").value(0, c.stop_token) = 200.0;
  return m;
}

/// Per-step distribution softmax(bias), independent of prefix and condition.
/// STOP gets zero mass so every sequence runs to max_len.
inline condgen::ConditionalLstm prefix_independent(const condgen::ModelConfig& c, std::uint64_t seed) {
  condgen::ConditionalLstm m(c, seed);
  zero_all(m);
  condgen::Rng rng(seed);
  auto& b = m.params().at("output.bias").value;
  for (std::size_t k = 0; k < b.cols(); ++k) b(0, k) = 2.0 * rng.uniform() - 1.0;
  b(0, c.stop_token) = -1e4;
  return m;
}

/// Every sequence with non-zero probability under a model of config `c`:
/// payloads without STOP closed by STOP, plus truncated max_len prefixes.
inline std::vector<condgen::TokenSequence> all_sequences(const condgen::ModelConfig& c) {
  std::vector<condgen::TokenSequence> out;
  std::vector<condgen::TokenSequence> frontier{{c.start_token}};
  while (!frontier.empty()) {
    std::vector<condgen::TokenSequence> next;
    for (const auto& p : frontier)
      for (int t = 0; t < c.vocab_size; ++t) {
        auto s = p;
        s.push_back(t);
        if (t == c.stop_token || static_cast<int>(s.size()) == c.max_len)
          out.push_back(s);
        else
          next.push_back(s);
      }
    frontier = std::move(next);
  }
  return out;
}

}  // namespace fixtures

#include "condgen/nn/parameters.hpp"

namespace fixtures {

/// Small enumerable model (vocab 6, max_len 6) fitted by ML to sequences
/// of four characters from a y-dependent Markov source. The fitted
/// distribution spreads its mass over many sequences of unequal probability
/// and its step distributions depend on the prefix.
inline condgen::ConditionalLstm trained_tiny(std::uint64_t seed = 3, int steps = 200) {
  using namespace condgen;
  ConditionalLstm m(tiny_config(6, 4, 8, 2, 6), seed);
  Rng rng(derive_seed(seed, 99));
  const double first[2][3] = {{0.6, 0.3, 0.1}, {0.2, 0.3, 0.5}};
  const double next[3][3] = {{0.6, 0.3, 0.1}, {0.15, 0.6, 0.25}, {0.3, 0.1, 0.6}};
  auto draw = [&](const double* p) {
    const double u = rng.uniform();
    return u < p[0] ? 0 : (u < p[0] + p[1] ? 1 : 2);
  };
  std::vector<TokenSequence> seqs;
  std::vector<std::vector<double>> ys;
  for (int i = 0; i < 256; ++i) {
    const int side = i % 2;
    TokenSequence s{kStartToken};
    int c = draw(first[side]);
    s.push_back(3 + c);
    for (int k = 1; k < 4; ++k) s.push_back(3 + (c = draw(next[c])));
    s.push_back(kStopToken);
    seqs.push_back(s);
    ys.push_back({side ? 0.5 : -0.5});
  }
  std::vector<SequenceRow> rows;
  for (std::size_t i = 0; i < seqs.size(); ++i) rows.push_back({&seqs[i], &ys[i], 1.0 / 256.0});
  nn::Adam adam({0.02});
  for (int t = 0; t < steps; ++t) {
    m.params().zero_grad();
    nn::Tape tape;
    tape.backward(m.weighted_nll(tape, rows));
    adam.step(m.params());
  }
  return m;
}

}  // namespace fixtures
