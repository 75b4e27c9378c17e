#include "condgen/nn/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace condgen::nn {

Matrix Matrix::top_rows(std::size_t n) const {
  if (n > rows_) throw std::out_of_range("top_rows beyond matrix");
  Matrix out(n, cols_);
  std::copy(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(n * cols_), out.data_.begin());
  return out;
}

std::size_t ParameterSet::add(std::string name, std::size_t rows, std::size_t cols) {
  for (const auto& p : params_)
    if (p.name == name) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Parameter p;
  p.name = std::move(name);
  p.value.resize(rows, cols);
  p.grad.resize(rows, cols);
  p.adam_m.resize(rows, cols);
  p.adam_v.resize(rows, cols);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

Parameter& ParameterSet::at(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter '" + name + "'");
}

const Parameter& ParameterSet::at(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

double& ParameterSet::value_at(std::size_t flat) {
  for (auto& p : params_) {
    if (flat < p.value.size()) return p.value[flat];
    flat -= p.value.size();
  }
  throw std::out_of_range("flat parameter index");
}

double ParameterSet::grad_at(std::size_t flat) const {
  for (const auto& p : params_) {
    if (flat < p.grad.size()) return p.grad[flat];
    flat -= p.grad.size();
  }
  throw std::out_of_range("flat parameter index");
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.set_zero();
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad.storage()) s += g * g;
  return std::sqrt(s);
}

bool ParameterSet::grads_finite() const {
  for (const auto& p : params_)
    for (double g : p.grad.storage())
      if (!std::isfinite(g)) return false;
  return true;
}

bool ParameterSet::values_finite() const {
  for (const auto& p : params_)
    for (double v : p.value.storage())
      if (!std::isfinite(v)) return false;
  return true;
}

void ParameterSet::reset_optimizer_state() {
  for (auto& p : params_) {
    p.adam_m.set_zero();
    p.adam_v.set_zero();
  }
}

void fill_uniform(Matrix& m, double scale, Rng& rng) {
  for (double& v : m.storage()) v = (2.0 * rng.uniform() - 1.0) * scale;
}

bool Adam::step(ParameterSet& params) {
  if (!params.grads_finite()) return false;
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& p : params) {
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = p.adam_m.data();
    double* v = p.adam_v.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
  return true;
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (auto& p : params)
      for (double& g : p.grad.storage()) g *= s;
  }
  return norm;
}

}  // namespace condgen::nn
