#include "condgen/grammar.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

namespace condgen {

GrammarError::GrammarError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error("grammar:" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                         what),
      line_(line),
      column_(column) {}

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr double kRoundedSumTolerance = 1e-3;

}  // namespace

Pcfg::Pcfg(std::vector<std::pair<std::string, std::vector<Production>>> rules) {
  if (rules.empty()) throw GrammarError(0, 0, "grammar has no rules");
  for (auto& [name, prods] : rules) {
    if (ids_.count(name)) throw GrammarError(0, 0, "duplicate nonterminal '" + name + "'");
    ids_.emplace(name, names_.size());
    names_.push_back(name);
    rules_.push_back(std::move(prods));
  }

  std::map<std::string, std::size_t, std::less<>> terminal_ids;
  compiled_.resize(rules_.size());
  for (std::size_t nt = 0; nt < rules_.size(); ++nt) {
    const auto& prods = rules_[nt];
    if (prods.empty()) throw GrammarError(0, 0, "nonterminal '" + names_[nt] + "' has no rules");
    double sum = 0.0;
    for (const auto& p : prods) {
      if (!(p.probability >= 0.0 && p.probability <= 1.0))
        throw GrammarError(0, 0, "probability out of [0,1] in rules for '" + names_[nt] + "'");
      if (p.symbols.empty())
        throw GrammarError(0, 0, "empty production for '" + names_[nt] + "'");
      sum += p.probability;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw GrammarError(0, 0, "probabilities for '" + names_[nt] + "' sum to " +
                                   std::to_string(sum) + ", not 1");

    rule_offsets_.push_back(total_rules_);
    total_rules_ += prods.size();
    double cumulative = 0.0;
    for (const auto& p : prods) {
      CompiledRule rule;
      for (const auto& sym : p.symbols) {
        if (sym.terminal) {
          auto [it, inserted] = terminal_ids.emplace(sym.text, terminals_.size());
          if (inserted) terminals_.push_back(sym.text);
          rule.items.push_back({true, it->second});
        } else {
          auto it = ids_.find(sym.text);
          if (it == ids_.end())
            throw GrammarError(0, 0, "undefined nonterminal '" + sym.text + "'");
          rule.items.push_back({false, it->second});
        }
      }
      cumulative += p.probability;
      rule.cumulative = cumulative;
      compiled_[nt].push_back(std::move(rule));
    }
    compiled_[nt].back().cumulative = 1.0;
  }
}

const std::vector<Production>& Pcfg::rules(std::string_view nonterminal) const {
  auto it = ids_.find(nonterminal);
  if (it == ids_.end()) throw std::out_of_range("no rules for '" + std::string(nonterminal) + "'");
  return rules_[it->second];
}

bool Pcfg::has_rules(std::string_view nonterminal) const { return ids_.count(nonterminal) != 0; }

namespace {

enum class TokKind { word, quoted, arrow, pipe, prob, end };

struct Tok {
  TokKind kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Tok> run() {
    std::vector<Tok> out;
    while (true) {
      skip_space_and_comments();
      if (pos_ >= text_.size()) {
        out.push_back({TokKind::end, "", line_, col_});
        return out;
      }
      const std::size_t line = line_, col = col_;
      const char c = text_[pos_];
      if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
        advance(2);
        out.push_back({TokKind::arrow, "->", line, col});
      } else if (c == '|') {
        advance(1);
        out.push_back({TokKind::pipe, "|", line, col});
      } else if (c == '[') {
        advance(1);
        std::string body;
        while (pos_ < text_.size() && text_[pos_] != ']' && text_[pos_] != '\n') {
          body.push_back(text_[pos_]);
          advance(1);
        }
        if (pos_ >= text_.size() || text_[pos_] != ']')
          throw GrammarError(line, col, "unterminated probability bracket");
        advance(1);
        out.push_back({TokKind::prob, body, line, col});
      } else if (c == '\'' || c == '"') {
        advance(1);
        std::string body;
        while (pos_ < text_.size() && text_[pos_] != c && text_[pos_] != '\n') {
          body.push_back(text_[pos_]);
          advance(1);
        }
        if (pos_ >= text_.size() || text_[pos_] != c)
          throw GrammarError(line, col, "unterminated quoted terminal");
        advance(1);
        if (body.empty()) throw GrammarError(line, col, "empty quoted terminal");
        out.push_back({TokKind::quoted, body, line, col});
      } else if (c == ']') {
        throw GrammarError(line, col, "unexpected ']'");
      } else {
        std::string word;
        while (pos_ < text_.size()) {
          const char d = text_[pos_];
          if (std::isspace(static_cast<unsigned char>(d)) || d == '|' || d == '[' || d == ']' ||
              d == '\'' || d == '"' || d == '#')
            break;
          if (d == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') break;
          word.push_back(d);
          advance(1);
        }
        out.push_back({TokKind::word, word, line, col});
      }
    }
  }

 private:
  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      if (text_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space_and_comments() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance(1);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance(1);
      } else {
        return;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

double parse_probability(const Tok& tok) {
  auto parse_decimal = [&](std::string_view s) -> double {
    std::string str(s);
    // Trim surrounding whitespace.
    const auto b = str.find_first_not_of(" \t");
    const auto e = str.find_last_not_of(" \t");
    if (b == std::string::npos) throw GrammarError(tok.line, tok.column, "empty probability");
    str = str.substr(b, e - b + 1);
    bool digit_seen = false;
    for (char c : str) {
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digit_seen = true;
      } else if (c != '.' && c != 'e' && c != 'E' && c != '-' && c != '+') {
        throw GrammarError(tok.line, tok.column, "malformed probability '" + tok.text + "'");
      }
    }
    if (!digit_seen) throw GrammarError(tok.line, tok.column, "malformed probability '" + tok.text + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      throw GrammarError(tok.line, tok.column, "malformed probability '" + tok.text + "'");
    }
    if (used != str.size())
      throw GrammarError(tok.line, tok.column, "malformed probability '" + tok.text + "'");
    return v;
  };
  const auto slash = tok.text.find('/');
  double p = 0.0;
  if (slash == std::string::npos) {
    p = parse_decimal(tok.text);
  } else {
    const double num = parse_decimal(std::string_view(tok.text).substr(0, slash));
    const double den = parse_decimal(std::string_view(tok.text).substr(slash + 1));
    if (den == 0.0) throw GrammarError(tok.line, tok.column, "zero denominator in probability");
    p = num / den;
  }
  if (!(p >= 0.0 && p <= 1.0))
    throw GrammarError(tok.line, tok.column, "probability '" + tok.text + "' outside [0,1]");
  return p;
}

GrammarSymbol classify_word(const Tok& tok) {
  const unsigned char first = static_cast<unsigned char>(tok.text.front());
  if (std::isupper(first)) {
    for (unsigned char c : tok.text)
      if (!std::isalnum(c) && c != '_')
        throw GrammarError(tok.line, tok.column, "invalid nonterminal name '" + tok.text + "'");
    return {tok.text, false};
  }
  if (tok.text.size() == 1) return {tok.text, true};
  throw GrammarError(tok.line, tok.column,
                     "bare word '" + tok.text + "' is neither a nonterminal nor a single character; quote it");
}

}  // namespace

Pcfg parse_pcfg(std::string_view text) {
  const std::vector<Tok> toks = Lexer(text).run();
  std::size_t i = 0;
  auto peek = [&](std::size_t k = 0) -> const Tok& { return toks[std::min(i + k, toks.size() - 1)]; };

  struct Pending {
    std::string name;
    std::size_t line, column;
    std::vector<Production> prods;
    std::vector<const Tok*> symbol_toks;  // for undefined-symbol locations
  };
  std::vector<Pending> blocks;

  while (peek().kind != TokKind::end) {
    const Tok& lhs = peek();
    if (lhs.kind != TokKind::word || !std::isupper(static_cast<unsigned char>(lhs.text.front())))
      throw GrammarError(lhs.line, lhs.column, "expected nonterminal at start of rule, got '" + lhs.text + "'");
    if (peek(1).kind != TokKind::arrow)
      throw GrammarError(peek(1).line, peek(1).column, "expected '->' after '" + lhs.text + "'");
    classify_word(lhs);
    for (const auto& b : blocks)
      if (b.name == lhs.text)
        throw GrammarError(lhs.line, lhs.column, "duplicate rule block for '" + lhs.text + "'");
    Pending block{lhs.text, lhs.line, lhs.column, {}, {}};
    i += 2;

    while (true) {
      Production prod;
      while (peek().kind == TokKind::word || peek().kind == TokKind::quoted) {
        // A word followed by '->' starts the next rule.
        if (peek().kind == TokKind::word && peek(1).kind == TokKind::arrow) break;
        const Tok& t = peek();
        prod.symbols.push_back(t.kind == TokKind::quoted ? GrammarSymbol{t.text, true} : classify_word(t));
        block.symbol_toks.push_back(&t);
        ++i;
      }
      if (prod.symbols.empty())
        throw GrammarError(peek().line, peek().column, "expected symbols in alternative for '" + block.name + "'");
      if (peek().kind != TokKind::prob)
        throw GrammarError(peek().line, peek().column, "expected '[probability]' after alternative");
      prod.probability = parse_probability(peek());
      ++i;
      block.prods.push_back(std::move(prod));
      if (peek().kind == TokKind::pipe) {
        ++i;
        continue;
      }
      break;
    }
    blocks.push_back(std::move(block));
  }
  if (blocks.empty()) throw GrammarError(1, 1, "grammar has no rules");

  for (auto& b : blocks) {
    double sum = 0.0;
    for (const auto& p : b.prods) sum += p.probability;
    const double dev = std::abs(sum - 1.0);
    if (dev > kRoundedSumTolerance) {
      std::ostringstream msg;
      msg << "probabilities for '" << b.name << "' sum to " << sum << ", not 1";
      throw GrammarError(b.line, b.column, msg.str());
    }
    if (dev > kSumTolerance)
      for (auto& p : b.prods) p.probability /= sum;
  }
  for (const auto& b : blocks)
    for (const Tok* t : b.symbol_toks) {
      if (t->kind != TokKind::word || !std::isupper(static_cast<unsigned char>(t->text.front()))) continue;
      bool defined = false;
      for (const auto& other : blocks) defined = defined || other.name == t->text;
      if (!defined) throw GrammarError(t->line, t->column, "undefined nonterminal '" + t->text + "'");
    }

  std::vector<std::pair<std::string, std::vector<Production>>> rules;
  for (auto& b : blocks) rules.emplace_back(b.name, std::move(b.prods));
  return Pcfg(std::move(rules));
}

Pcfg load_pcfg(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open grammar file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pcfg(ss.str());
}

void DerivationBudget::validate() const {
  if (max_expansion_depth == 0 || max_output_chars == 0)
    throw std::invalid_argument("derivation budget limits must be positive");
}

std::optional<std::string> sample_derivation(const Pcfg& pcfg, const DerivationBudget& budget,
                                             Rng& rng, DerivationStats* stats) {
  const auto& compiled = pcfg.compiled();
  const auto& terminals = pcfg.terminals();
  if (stats && stats->rule_counts.size() != pcfg.total_rules())
    stats->rule_counts.assign(pcfg.total_rules(), 0);

  struct Frame {
    Pcfg::CompiledItem item;
    std::size_t depth;
  };
  std::vector<Frame> stack;
  stack.push_back({{false, 0}, 0});
  std::string out;

  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.item.terminal) {
      out += terminals[f.item.id];
      if (out.size() > budget.max_output_chars) return std::nullopt;
      continue;
    }
    if (f.depth >= budget.max_expansion_depth) return std::nullopt;
    const auto& alternatives = compiled[f.item.id];
    const double u = rng.uniform();
    std::size_t choice = 0;
    while (choice + 1 < alternatives.size() && u >= alternatives[choice].cumulative) ++choice;
    if (stats) ++stats->rule_counts[pcfg.rule_offset(f.item.id) + choice];
    const auto& items = alternatives[choice].items;
    for (auto it = items.rbegin(); it != items.rend(); ++it) stack.push_back({*it, f.depth + 1});
  }
  return out;
}

}  // namespace condgen
