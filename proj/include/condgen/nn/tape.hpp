#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "condgen/nn/parameters.hpp"

namespace condgen::nn {

using Var = std::size_t;

/// Records forward values and backward closures for one batch. Backward runs
/// the closures in exact reverse order of recording. Parameters are not
/// copied onto the tape: ops read Parameter::value and accumulate directly
/// into Parameter::grad.
class Tape {
 public:
  /// Value with no gradient (inputs, zero states).
  Var constant(Matrix value) { return make(std::move(value), false); }
  /// Value whose gradient is tracked (leaves in tests, op outputs).
  Var make(Matrix value, bool needs_grad = true);

  const Matrix& value(Var v) const { return nodes_[v].value; }
  bool needs_grad(Var v) const { return nodes_[v].needs_grad; }
  /// Gradient buffer, zero-initialised on first use.
  Matrix& grad(Var v);
  bool has_grad(Var v) const { return !nodes_[v].grad.empty(); }

  void on_backward(std::function<void(Tape&)> fn) { backward_.push_back(std::move(fn)); }

  /// Seeds d(loss)/d(loss) = seed for a 1x1 `loss` and runs all closures.
  void backward(Var loss, double seed = 1.0);

  void clear();
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_ops() const { return backward_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad;
  };
  std::vector<Node> nodes_;
  std::vector<std::function<void(Tape&)>> backward_;
};

}  // namespace condgen::nn
