#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "condgen/grammar.hpp"
#include "test_util.hpp"

using namespace condgen;

TEST(Grammar, ExpressionGrammarRuleProbabilities) {
  const Pcfg g = expression_grammar();
  EXPECT_EQ(g.start_symbol(), "S");
  const auto& number = g.rules("Number");
  ASSERT_EQ(number.size(), 2u);
  EXPECT_NEAR(number[0].probability, 0.9, 1e-12);
  EXPECT_EQ(number[0].symbols.size(), 2u);
  EXPECT_EQ(number[0].symbols[0].text, "Nonzero");
  EXPECT_FALSE(number[0].symbols[0].terminal);
  EXPECT_NEAR(number[1].probability, 0.1, 1e-12);
  for (const auto& nt : g.nonterminals()) {
    double sum = 0.0;
    for (const auto& p : g.rules(nt)) sum += p.probability;
    EXPECT_NEAR(sum, 1.0, 1e-9) << nt;
  }
}

TEST(Grammar, SingleRule) {
  const Pcfg g = parse_pcfg("S -> '1' [1.0]");
  ASSERT_EQ(g.rules("S").size(), 1u);
  EXPECT_DOUBLE_EQ(g.rules("S")[0].probability, 1.0);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_derivation(g, {}, rng).value(), "1");
}

TEST(Grammar, ProbabilitySumViolation) { EXPECT_THROW(parse_pcfg("S -> 'a' [0.6] | 'b' [0.3]"), GrammarError); }

TEST(Grammar, UndefinedSymbol) { EXPECT_THROW(parse_pcfg("S -> Missing [1.0]"), GrammarError); }

TEST(Grammar, SyntaxErrorReportsPosition) {
  try {
    parse_pcfg("S -> 'a' [1.0]\nT -> 'b' [zz]\n");
    FAIL() << "expected a syntax error";
  } catch (const GrammarError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_GT(e.column(), 0u);
  }
}

TEST(Grammar, FractionProbabilities) {
  const Pcfg g = parse_pcfg("S -> 'a' [1/3] | 'b' [2/3]");
  EXPECT_NEAR(g.rules("S")[0].probability, 1.0 / 3.0, 1e-15);
}

TEST(Grammar, SeedDeterminism) {
  const Pcfg g = expression_grammar();
  Rng a(11), b(11);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(sample_derivation(g, {}, a), sample_derivation(g, {}, b));
}

TEST(Grammar, AlphabetOfSamples) {
  const Pcfg g = expression_grammar();
  Rng rng(5);
  for (int i = 0; i < 5000; ++i) {
    const auto s = sample_derivation(g, {}, rng);
    if (!s) continue;
    for (char c : *s) EXPECT_NE(std::string("0123456789+-*/()").find(c), std::string::npos) << *s;
  }
}

TEST(Grammar, BudgetExceededIsSignalled) {
  const Pcfg g = parse_pcfg("S -> S S [0.9] | 'a' [0.1]");
  DerivationBudget budget{8, 16};
  Rng rng(1);
  int exceeded = 0;
  for (int i = 0; i < 200; ++i) exceeded += !sample_derivation(g, budget, rng).has_value();
  EXPECT_GT(exceeded, 0);
}

// Every rule's empirical choice frequency within 3 multinomial sigmas of its
// declared probability over >= 100k expansions.
TEST(Grammar, RuleFrequenciesMatchProbabilities) {
  const Pcfg g = expression_grammar();
  DerivationStats stats;
  Rng rng(2024);
  for (int i = 0; i < 100000; ++i) sample_derivation(g, {}, rng, &stats);
  const auto& nts = g.nonterminals();
  for (std::size_t nt = 0; nt < nts.size(); ++nt) {
    const auto& rules = g.rules(nts[nt]);
    std::uint64_t total = 0;
    for (std::size_t r = 0; r < rules.size(); ++r) total += stats.rule_counts[g.rule_offset(nt) + r];
    if (nts[nt] == "Op") {
      EXPECT_GE(total, 100000u);
    }
    for (std::size_t r = 0; r < rules.size(); ++r) {
      const double p = rules[r].probability;
      const double freq = static_cast<double>(stats.rule_counts[g.rule_offset(nt) + r]) / static_cast<double>(total);
      const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(total));
      EXPECT_LE(std::abs(freq - p), 3.0 * sigma + 1e-12) << nts[nt] << " rule " << r;
    }
  }
}

TEST(Grammar, OpPlusFrequency) {
  const Pcfg g = expression_grammar();
  DerivationStats stats;
  Rng rng(99);
  for (int i = 0; i < 100000; ++i) sample_derivation(g, {}, rng, &stats);
  std::size_t op = 0;
  while (g.nonterminals()[op] != "Op") ++op;
  std::uint64_t total = 0;
  for (std::size_t r = 0; r < 4; ++r) total += stats.rule_counts[g.rule_offset(op) + r];
  const double freq = static_cast<double>(stats.rule_counts[g.rule_offset(op)]) / static_cast<double>(total);
  EXPECT_NEAR(freq, 0.3, 3.0 * std::sqrt(0.3 * 0.7 / static_cast<double>(total)));
}
