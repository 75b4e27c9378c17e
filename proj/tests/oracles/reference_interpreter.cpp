#include "oracles/reference_interpreter.hpp"

#include <cctype>
#include <vector>

namespace oracle {

namespace {

enum class Kind { number, plus, minus, times, floordiv, lparen, rparen };

struct Token {
  Kind kind;
  BigInt value;
};

std::optional<std::vector<Token>> tokenize(const std::string& s) {
  std::vector<Token> out;
  for (std::size_t i = 0; i < s.size();) {
    const char ch = s[i];
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j - i > 1 && s[i] == '0') return std::nullopt;
      out.push_back({Kind::number, BigInt(s.substr(i, j - i))});
      i = j;
      continue;
    }
    switch (ch) {
      case '+': out.push_back({Kind::plus, 0}); break;
      case '-': out.push_back({Kind::minus, 0}); break;
      case '*': out.push_back({Kind::times, 0}); break;
      case '(': out.push_back({Kind::lparen, 0}); break;
      case ')': out.push_back({Kind::rparen, 0}); break;
      case '/':
        if (i + 1 >= s.size() || s[i + 1] != '/') return std::nullopt;
        out.push_back({Kind::floordiv, 0});
        ++i;
        break;
      default: return std::nullopt;
    }
    ++i;
  }
  return out;
}

int precedence(Kind k) { return (k == Kind::times || k == Kind::floordiv) ? 2 : 1; }
bool is_op(Kind k) { return k == Kind::plus || k == Kind::minus || k == Kind::times || k == Kind::floordiv; }

bool apply(std::vector<BigInt>& values, Kind op) {
  if (values.size() < 2) return false;
  BigInt b = values.back();
  values.pop_back();
  BigInt a = values.back();
  values.pop_back();
  switch (op) {
    case Kind::plus: values.push_back(a + b); break;
    case Kind::minus: values.push_back(a - b); break;
    case Kind::times: values.push_back(a * b); break;
    case Kind::floordiv: {
      if (b == 0) return false;
      BigInt q = a / b;  // truncates toward zero
      if (q * b != a && ((a < 0) != (b < 0))) q -= 1;
      values.push_back(q);
      break;
    }
    default: return false;
  }
  return true;
}

}  // namespace

std::optional<BigInt> evaluate_exact(const std::string& s) {
  const auto tokens = tokenize(s);
  if (!tokens || tokens->empty()) return std::nullopt;
  std::vector<BigInt> values;
  std::vector<Kind> ops;
  bool expect_operand = true;
  for (const Token& t : *tokens) {
    if (expect_operand) {
      if (t.kind == Kind::number) {
        values.push_back(t.value);
        expect_operand = false;
      } else if (t.kind == Kind::lparen) {
        ops.push_back(Kind::lparen);
      } else {
        return std::nullopt;
      }
      continue;
    }
    if (is_op(t.kind)) {
      while (!ops.empty() && ops.back() != Kind::lparen && precedence(ops.back()) >= precedence(t.kind)) {
        if (!apply(values, ops.back())) return std::nullopt;
        ops.pop_back();
      }
      ops.push_back(t.kind);
      expect_operand = true;
    } else if (t.kind == Kind::rparen) {
      while (!ops.empty() && ops.back() != Kind::lparen) {
        if (!apply(values, ops.back())) return std::nullopt;
        ops.pop_back();
      }
      if (ops.empty()) return std::nullopt;
      ops.pop_back();
    } else {
      return std::nullopt;
    }
  }
  if (expect_operand) return std::nullopt;
  while (!ops.empty()) {
    if (ops.back() == Kind::lparen || !apply(values, ops.back())) return std::nullopt;
    ops.pop_back();
  }
  if (values.size() != 1) return std::nullopt;
  return values.front();
}

std::optional<long long> evaluate_valid(const std::string& s) {
  if (s.size() > 30) return std::nullopt;
  const auto v = evaluate_exact(s);
  if (!v || *v <= -1000 || *v >= 1000) return std::nullopt;
  return v->convert_to<long long>();
}

}  // namespace oracle
