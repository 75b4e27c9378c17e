#include "condgen/nn/tape.hpp"

#include <stdexcept>

namespace condgen::nn {

Var Tape::make(Matrix value, bool needs_grad) {
  nodes_.push_back({std::move(value), Matrix(), needs_grad});
  return nodes_.size() - 1;
}

Matrix& Tape::grad(Var v) {
  Node& n = nodes_[v];
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) n.grad.resize(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss, double seed) {
  if (value(loss).rows() != 1 || value(loss).cols() != 1) throw std::invalid_argument("backward needs a scalar");
  grad(loss)(0, 0) += seed;
  for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) (*it)(*this);
}

void Tape::clear() {
  nodes_.clear();
  backward_.clear();
}

}  // namespace condgen::nn
