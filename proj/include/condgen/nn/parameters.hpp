#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "condgen/rng.hpp"

namespace condgen::nn {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, 0.0);
  }
  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }
  /// Leading `n` rows as a new matrix.
  Matrix top_rows(std::size_t n) const;

  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
};

/// Named parameters with gradient and Adam moment buffers. Shapes are fixed
/// once added; references stay valid because the set never grows after the
/// owning model is constructed.
class ParameterSet {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Total number of scalar coordinates.
  std::size_t total_size() const;
  /// Flat coordinate access in declaration order.
  double& value_at(std::size_t flat);
  double grad_at(std::size_t flat) const;

  void zero_grad();
  double grad_norm() const;
  bool grads_finite() const;
  bool values_finite() const;
  void reset_optimizer_state();

 private:
  std::vector<Parameter> params_;
};

/// uniform(-s, s) fill.
void fill_uniform(Matrix& m, double scale, Rng& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// One bias-corrected update. Returns false, leaving parameters untouched,
  /// when any gradient is non-finite.
  bool step(ParameterSet& params);

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
};

/// Rescales gradients so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace condgen::nn
