#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace condgen {

inline constexpr std::size_t kMaxExpressionChars = 30;
/// Valid values lie in the open interval (-kValueLimit, kValueLimit).
inline constexpr std::int64_t kValueLimit = 1000;

enum class InvalidReason { parse_error, division_by_zero, overflow, out_of_range, too_long };

const char* to_string(InvalidReason reason);

/// Result of evaluating an expression: a range-checked value or the reason
/// the string is invalid.
class EvalOutcome {
 public:
  static EvalOutcome valid(std::int64_t value) { return EvalOutcome(value, {}); }
  static EvalOutcome invalid(InvalidReason reason) { return EvalOutcome(0, reason); }

  bool ok() const { return !reason_.has_value(); }
  std::int64_t value() const;
  InvalidReason reason() const;

 private:
  EvalOutcome(std::int64_t v, std::optional<InvalidReason> r) : value_(v), reason_(r) {}
  std::int64_t value_;
  std::optional<InvalidReason> reason_;
};

/// Integer expression with python semantics: `+ - * //`, parentheses, no
/// unary minus, floor division, exact 128-bit checked arithmetic. Total: never
/// throws.
EvalOutcome eval_expr(std::string_view s);

bool is_valid(std::string_view s);

/// Number of binary operators, counting `//` once.
std::size_t count_operators(std::string_view s);

/// Maps an expression to a property vector, or nullopt when invalid.
class PropertyOracle {
 public:
  virtual ~PropertyOracle() = default;
  virtual std::size_t arity() const = 0;
  virtual std::optional<std::vector<double>> evaluate(std::string_view s) const = 0;
};

/// [value]; the scalar task's oracle.
class ValueOracle final : public PropertyOracle {
 public:
  std::size_t arity() const override { return 1; }
  std::optional<std::vector<double>> evaluate(std::string_view s) const override;
};

/// Synthetic three-property oracle [value, length, operator count], each
/// standardized with statistics fitted on a training set.
class MultiPropertyOracle final : public PropertyOracle {
 public:
  MultiPropertyOracle() = default;
  MultiPropertyOracle(std::vector<double> mean, std::vector<double> stddev);

  static std::optional<std::vector<double>> raw_features(std::string_view s);
  static MultiPropertyOracle fit(const std::vector<std::string>& training_expressions);

  std::size_t arity() const override { return 3; }
  std::optional<std::vector<double>> evaluate(std::string_view s) const override;
  std::vector<double> standardize(std::vector<double> raw) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return stddev_; }

 private:
  std::vector<double> mean_{0.0, 0.0, 0.0};
  std::vector<double> stddev_{1.0, 1.0, 1.0};
};

}  // namespace condgen
