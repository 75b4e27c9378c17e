#include "condgen/evaluator.hpp"

#include <cmath>
#include <stdexcept>

namespace condgen {

const char* to_string(InvalidReason reason) {
  switch (reason) {
    case InvalidReason::parse_error: return "parse_error";
    case InvalidReason::division_by_zero: return "division_by_zero";
    case InvalidReason::overflow: return "overflow";
    case InvalidReason::out_of_range: return "out_of_range";
    case InvalidReason::too_long: return "too_long";
  }
  return "unknown";
}

std::int64_t EvalOutcome::value() const {
  if (reason_) throw std::logic_error("EvalOutcome::value on invalid outcome");
  return value_;
}

InvalidReason EvalOutcome::reason() const {
  if (!reason_) throw std::logic_error("EvalOutcome::reason on valid outcome");
  return *reason_;
}

namespace {

using i128 = __int128;

// Recursive descent:
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '//') factor)*
//   factor := number | '(' expr ')'
class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  std::optional<InvalidReason> run(i128& out) {
    out = expr();
    if (!failure_ && pos_ != s_.size()) failure_ = InvalidReason::parse_error;
    return failure_;
  }

 private:
  bool failed() const { return failure_.has_value(); }
  void fail(InvalidReason r) {
    if (!failure_) failure_ = r;
  }
  char peek(std::size_t k = 0) const { return pos_ + k < s_.size() ? s_[pos_ + k] : '\0'; }

  i128 expr() {
    i128 acc = term();
    while (!failed()) {
      const char c = peek();
      if (c != '+' && c != '-') break;
      ++pos_;
      const i128 rhs = term();
      if (failed()) break;
      i128 r;
      const bool over = c == '+' ? __builtin_add_overflow(acc, rhs, &r) : __builtin_sub_overflow(acc, rhs, &r);
      if (over) {
        fail(InvalidReason::overflow);
        break;
      }
      acc = r;
    }
    return acc;
  }

  i128 term() {
    i128 acc = factor();
    while (!failed()) {
      const char c = peek();
      if (c == '*') {
        ++pos_;
        const i128 rhs = factor();
        if (failed()) break;
        i128 r;
        if (__builtin_mul_overflow(acc, rhs, &r)) {
          fail(InvalidReason::overflow);
          break;
        }
        acc = r;
      } else if (c == '/') {
        if (peek(1) != '/') {
          fail(InvalidReason::parse_error);
          break;
        }
        pos_ += 2;
        const i128 rhs = factor();
        if (failed()) break;
        acc = floor_div(acc, rhs);
      } else {
        break;
      }
    }
    return acc;
  }

  i128 floor_div(i128 a, i128 b) {
    if (b == 0) {
      fail(InvalidReason::division_by_zero);
      return 0;
    }
    const i128 min = static_cast<i128>(static_cast<unsigned __int128>(1) << 127);
    if (a == min && b == -1) {
      fail(InvalidReason::overflow);
      return 0;
    }
    i128 q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  }

  i128 factor() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      const i128 v = expr();
      if (failed()) return 0;
      if (peek() != ')') {
        fail(InvalidReason::parse_error);
        return 0;
      }
      ++pos_;
      return v;
    }
    if (c < '0' || c > '9') {
      fail(InvalidReason::parse_error);
      return 0;
    }
    if (c == '0' && peek(1) >= '0' && peek(1) <= '9') {
      fail(InvalidReason::parse_error);  // leading zero
      return 0;
    }
    i128 v = 0;
    while (peek() >= '0' && peek() <= '9') {
      const int d = peek() - '0';
      ++pos_;
      if (__builtin_mul_overflow(v, static_cast<i128>(10), &v) ||
          __builtin_add_overflow(v, static_cast<i128>(d), &v)) {
        fail(InvalidReason::overflow);
        return 0;
      }
    }
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::optional<InvalidReason> failure_;
};

}  // namespace

EvalOutcome eval_expr(std::string_view s) {
  if (s.size() > kMaxExpressionChars) return EvalOutcome::invalid(InvalidReason::too_long);
  i128 value = 0;
  if (auto failure = Parser(s).run(value)) return EvalOutcome::invalid(*failure);
  if (value <= -kValueLimit || value >= kValueLimit) return EvalOutcome::invalid(InvalidReason::out_of_range);
  return EvalOutcome::valid(static_cast<std::int64_t>(value));
}

bool is_valid(std::string_view s) { return eval_expr(s).ok(); }

std::size_t count_operators(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '+' || c == '-' || c == '*') {
      ++n;
    } else if (c == '/') {
      ++n;
      if (i + 1 < s.size() && s[i + 1] == '/') ++i;
    }
  }
  return n;
}

std::optional<std::vector<double>> ValueOracle::evaluate(std::string_view s) const {
  const EvalOutcome r = eval_expr(s);
  if (!r.ok()) return std::nullopt;
  return std::vector<double>{static_cast<double>(r.value())};
}

MultiPropertyOracle::MultiPropertyOracle(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != 3 || stddev_.size() != 3)
    throw std::invalid_argument("multi-property oracle expects 3 statistics");
  for (double& sd : stddev_)
    if (!(sd > 0.0)) sd = 1.0;
}

std::optional<std::vector<double>> MultiPropertyOracle::raw_features(std::string_view s) {
  const EvalOutcome r = eval_expr(s);
  if (!r.ok()) return std::nullopt;
  return std::vector<double>{static_cast<double>(r.value()), static_cast<double>(s.size()),
                             static_cast<double>(count_operators(s))};
}

MultiPropertyOracle MultiPropertyOracle::fit(const std::vector<std::string>& training_expressions) {
  std::vector<double> sum(3, 0.0), sumsq(3, 0.0);
  std::size_t n = 0;
  for (const auto& s : training_expressions) {
    auto f = raw_features(s);
    if (!f) continue;
    ++n;
    for (int k = 0; k < 3; ++k) {
      sum[k] += (*f)[k];
      sumsq[k] += (*f)[k] * (*f)[k];
    }
  }
  if (n == 0) throw std::invalid_argument("no valid expressions to fit property statistics");
  std::vector<double> mean(3), sd(3);
  for (int k = 0; k < 3; ++k) {
    mean[k] = sum[k] / static_cast<double>(n);
    const double var = sumsq[k] / static_cast<double>(n) - mean[k] * mean[k];
    sd[k] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return MultiPropertyOracle(mean, sd);
}

std::vector<double> MultiPropertyOracle::standardize(std::vector<double> raw) const {
  for (int k = 0; k < 3; ++k) raw[k] = (raw[k] - mean_[k]) / stddev_[k];
  return raw;
}

std::optional<std::vector<double>> MultiPropertyOracle::evaluate(std::string_view s) const {
  auto f = raw_features(s);
  if (!f) return std::nullopt;
  return standardize(std::move(*f));
}

}  // namespace condgen
