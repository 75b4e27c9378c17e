#pragma once

#include <cstddef>
#include <vector>

#include "condgen/nn/parameters.hpp"
#include "condgen/nn/tape.hpp"

namespace condgen::nn {

// Differentiable ops. Every op records its backward closure on the tape.
// Parameter gradients accumulate into Parameter::grad.

/// Rows of `table` selected by `tokens` (n x embed).
Var embedding(Tape& tape, Parameter& table, const std::vector<int>& tokens);

/// [a | b] column concatenation; row counts must match.
Var concat_cols(Tape& tape, Var a, Var b);

/// First `n` rows of `a`.
Var top_rows(Tape& tape, Var a, std::size_t n);

/// Vertical stack of row blocks with equal column counts.
Var stack_rows(Tape& tape, const std::vector<Var>& parts);

/// x W + b with W (in x out) and b (1 x out).
Var linear(Tape& tape, Parameter& w, Parameter& b, Var x);

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM step. W is (in + H) x 4H with gate order i f g o, b is 1 x 4H.
/// `prev.c` may be a zero constant.
LstmState lstm_cell(Tape& tape, Parameter& w, Parameter& b, Var x, LstmState prev);

/// sum_r weight[r] * (logsumexp(logits_r) - logits_r[target_r]); a 1x1 result.
Var weighted_nll(Tape& tape, Var logits, const std::vector<int>& targets, const std::vector<double>& weights);

/// sum_r weight[r] * H(softmax(logits_r)); a 1x1 result.
Var weighted_entropy(Tape& tape, Var logits, const std::vector<double>& weights);

/// softmax(logits) * table: the probability-weighted mean embedding.
Var softmax_mean_embedding(Tape& tape, Var logits, Parameter& table);

Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double s);

// Tape-free helpers shared by the inference path.

/// out = x W + b for x (n x in).
void linear_forward(const Matrix& w, const Matrix& b, const Matrix& x, Matrix& out);

/// One LSTM step on plain matrices. `c_prev` may be empty (zero state).
/// `gates` and `tanh_c` receive the activations the backward pass needs.
void lstm_cell_forward(const Matrix& w, const Matrix& b, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                       Matrix& gates, Matrix& h, Matrix& c, Matrix& tanh_c);

/// Row-wise softmax into `probs`; returns nothing, numerically stable.
void softmax_rows(const Matrix& logits, Matrix& probs);
void softmax_row(const double* logits, std::size_t n, double* probs);
double logsumexp_row(const double* logits, std::size_t n);
/// Closed-form entropy of softmax(logits) in nats.
double entropy_row(const double* logits, std::size_t n);

}  // namespace condgen::nn
