#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "condgen/rng.hpp"

namespace condgen {

class GrammarError : public std::runtime_error {
 public:
  GrammarError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct GrammarSymbol {
  std::string text;
  bool terminal = true;

  bool operator==(const GrammarSymbol&) const = default;
};

struct Production {
  std::vector<GrammarSymbol> symbols;
  double probability = 0.0;
};

/// Weighted context-free grammar. Immutable once constructed; the
/// constructor enforces the probability and closure invariants.
class Pcfg {
 public:
  /// `rules` in declaration order; the first nonterminal is the start symbol.
  explicit Pcfg(std::vector<std::pair<std::string, std::vector<Production>>> rules);

  const std::string& start_symbol() const { return names_.front(); }
  const std::vector<std::string>& nonterminals() const { return names_; }
  const std::vector<Production>& rules(std::string_view nonterminal) const;
  bool has_rules(std::string_view nonterminal) const;

  // Compiled form used by the sampler.
  struct CompiledItem {
    bool terminal;
    std::size_t id;  // nonterminal id, or index into terminal table
  };
  struct CompiledRule {
    std::vector<CompiledItem> items;
    double cumulative;  // inclusive upper edge in [0, 1]
  };
  const std::vector<std::vector<CompiledRule>>& compiled() const { return compiled_; }
  const std::vector<std::string>& terminals() const { return terminals_; }
  std::size_t rule_offset(std::size_t nonterminal) const { return rule_offsets_[nonterminal]; }
  std::size_t total_rules() const { return total_rules_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::size_t, std::less<>> ids_;
  std::vector<std::vector<Production>> rules_;
  std::vector<std::vector<CompiledRule>> compiled_;
  std::vector<std::string> terminals_;
  std::vector<std::size_t> rule_offsets_;
  std::size_t total_rules_ = 0;
};

/// Parses the text grammar format:
///   NT -> sym sym [p] | sym [p]
/// Lines without `->` continue the previous rule. Quoted symbols and bare
/// single characters are terminals; bare words starting with an uppercase
/// letter are nonterminals; `#` starts a comment. Probabilities are decimals
/// or fractions `a/b`. A rule set whose written probabilities are rounded
/// (sum within 1e-3 of one) is renormalized; larger deviations are errors.
Pcfg parse_pcfg(std::string_view text);
Pcfg load_pcfg(const std::string& path);

struct DerivationBudget {
  std::size_t max_expansion_depth = 64;
  std::size_t max_output_chars = 64;

  void validate() const;
};

/// Per-rule choice counts, indexed by Pcfg::rule_offset(nt) + rule.
struct DerivationStats {
  std::vector<std::uint64_t> rule_counts;
};

/// Leftmost derivation from the start symbol. Returns nullopt when the budget
/// is exceeded; callers discard and resample.
std::optional<std::string> sample_derivation(const Pcfg& pcfg, const DerivationBudget& budget,
                                             Rng& rng, DerivationStats* stats = nullptr);

}  // namespace condgen
