#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "condgen/dataset.hpp"
#include "condgen/evaluator.hpp"
#include "test_util.hpp"

using namespace condgen;

TEST(Vocabulary, ExpressionTable) {
  const Vocabulary v = Vocabulary::expressions();
  EXPECT_EQ(v.size(), 19u);
  EXPECT_EQ(v.symbol(kPadToken), "<pad>");
  EXPECT_EQ(v.symbol(kStartToken), "<s>");
  EXPECT_EQ(v.symbol(kStopToken), "</s>");
  EXPECT_TRUE(v.contains('/'));
  EXPECT_FALSE(v.contains('a'));
}

TEST(Vocabulary, EncodeDecode) {
  const Vocabulary v = Vocabulary::expressions();
  const auto t = v.encode("1+1");
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t.front(), kStartToken);
  EXPECT_EQ(t.back(), kStopToken);
  EXPECT_EQ(t[1], v.index_of('1'));
  EXPECT_EQ(t[2], v.index_of('+'));
  EXPECT_EQ(v.decode(t), "1+1");
  EXPECT_THROW(v.encode("1a"), DatasetError);
  EXPECT_THROW(v.decode({kStartToken, v.index_of('1')}), DatasetError);
  EXPECT_THROW(v.decode({kStartToken, kPadToken, kStopToken}), DatasetError);
  EXPECT_THROW(v.decode({kStartToken, 99, kStopToken}), DatasetError);
}

TEST(Vocabulary, SerializeRoundTrip) {
  const Vocabulary v = Vocabulary::expressions();
  EXPECT_EQ(Vocabulary::parse(v.serialize()), v);
}

TEST(Dataset, RoundTripOnSampledStrings) {
  const Pcfg g = expression_grammar();
  const Vocabulary v = Vocabulary::expressions();
  Rng rng(8);
  for (int n = 0; n < 10000;) {
    const auto s = sample_derivation(g, {}, rng);
    if (!s) continue;
    ++n;
    ASSERT_EQ(v.decode(v.encode(*s)), *s);
  }
}

TEST(Dataset, InsufficientUnique) {
  const Pcfg g = parse_pcfg("S -> '1' [1.0]");
  BuildOptions opt;
  opt.n_samples = 10;
  opt.validation_size = 2;
  opt.test_size = 2;
  opt.seed = 1;
  EXPECT_THROW(build_dataset(g, opt), DatasetError);
  opt.validation_size = 0;
  opt.test_size = 0;
  const auto r = build_dataset(g, opt);
  EXPECT_EQ(r.stats.unique, 1u);
  EXPECT_EQ(r.splits.train.size(), 1u);
}

TEST(Dataset, StarvedGrammarThrows) {
  const Pcfg g = parse_pcfg("S -> '1' '//' '0' [1.0]");
  BuildOptions opt;
  opt.n_samples = 5;
  opt.validation_size = 0;
  opt.test_size = 0;
  opt.seed = 1;
  EXPECT_THROW(build_dataset(g, opt), DatasetError);
}

namespace {
BuildResult small_build(std::uint64_t seed) {
  BuildOptions opt;
  opt.n_samples = 20000;
  opt.validation_size = 1000;
  opt.test_size = 500;
  opt.seed = seed;
  return build_dataset(expression_grammar(), opt);
}
}  // namespace

TEST(Dataset, SplitInvariants) {
  const auto r = small_build(3);
  const auto& s = r.splits;
  EXPECT_EQ(s.validation.size(), 1000u);
  EXPECT_EQ(s.test.size(), 500u);
  EXPECT_EQ(r.stats.samples, 20000u);
  EXPECT_EQ(r.stats.derivations, r.stats.samples + r.stats.invalid);
  EXPECT_EQ(s.train.size() + 1500u, r.stats.unique);
  std::set<std::string> seen;
  for (const auto* split : {&s.train, &s.validation, &s.test})
    for (const auto& ex : *split) {
      EXPECT_TRUE(seen.insert(ex.expression).second) << ex.expression;
      EXPECT_LE(ex.expression.size(), 30u);
      EXPECT_EQ(eval_expr(ex.expression).value(), ex.value);
      ASSERT_EQ(ex.y_cond.size(), 1u);
      EXPECT_GT(ex.y_cond[0], -1.0);
      EXPECT_LT(ex.y_cond[0], 1.0);
      EXPECT_DOUBLE_EQ(ex.y_cond[0], static_cast<double>(ex.value) / 1000.0);
      EXPECT_EQ(s.vocab.decode(ex.tokens), ex.expression);
    }
}

TEST(Dataset, Deterministic) {
  const auto a = small_build(5), b = small_build(5), c = small_build(6);
  EXPECT_EQ(dataset_hash(a.splits), dataset_hash(b.splits));
  EXPECT_NE(dataset_hash(a.splits), dataset_hash(c.splits));
}

TEST(Dataset, MaxUniqueCap) {
  BuildOptions opt;
  opt.n_samples = 20000;
  opt.validation_size = 100;
  opt.test_size = 100;
  opt.seed = 4;
  opt.max_unique = 1000;
  const auto r = build_dataset(expression_grammar(), opt);
  EXPECT_EQ(r.stats.kept, 1000u);
  EXPECT_EQ(r.splits.train.size(), 800u);
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto r = small_build(9);
  const auto dir = scratch_dir("dataset_io");
  write_splits(dir, r.splits);
  const auto back = read_splits(dir);
  EXPECT_EQ(dataset_hash(back), dataset_hash(r.splits));
  ASSERT_EQ(back.test.size(), r.splits.test.size());
  EXPECT_EQ(back.test[7].tokens, r.splits.test[7].tokens);
  std::ifstream in(dir / "train.tsv");
  std::string line;
  std::getline(in, line);
  EXPECT_NE(line.find('\t'), std::string::npos);
}

TEST(Dataset, ReadTsvFormats) {
  const auto dir = scratch_dir("dataset_tsv");
  std::ofstream(dir / "bad.tsv") << "1+1\tx\n";
  std::ofstream(dir / "notab.tsv") << "1+1\n";
  std::ofstream(dir / "extra.tsv") << "1+1\t2\t17\t1\n";
  EXPECT_THROW(read_tsv(dir / "bad.tsv", Vocabulary::expressions()), DatasetError);
  EXPECT_THROW(read_tsv(dir / "notab.tsv", Vocabulary::expressions()), DatasetError);
  const auto ex = read_tsv(dir / "extra.tsv", Vocabulary::expressions());
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(ex[0].value, 2);
}
