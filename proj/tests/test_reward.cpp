#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "condgen/reward.hpp"
#include "oracles/dense_oracles.hpp"
#include "test_util.hpp"

using namespace condgen;

TEST(Reward, Scalar) {
  EXPECT_DOUBLE_EQ(reward_scalar(5, 5), 1.0);
  EXPECT_NEAR(reward_scalar(6, 5), 0.606531, 1e-6);
  EXPECT_NEAR(reward_scalar(10, 5), 3.726653e-6, 1e-11);
  EXPECT_DOUBLE_EQ(reward_scalar(4, 5), reward_scalar(6, 5));
}

TEST(Reward, L1Threshold) {
  RewardSpec spec{RewardKind::l1_threshold, 1.0, 0.3};
  EXPECT_DOUBLE_EQ(reward_l1({0.5, 0.5}, {0.5, 0.5}, spec), 1.0);
  EXPECT_NEAR(reward_l1({0.1, 0.0}, {0.0, 0.1}, spec), 0.818731, 1e-6);
  EXPECT_DOUBLE_EQ(reward_l1({0.31}, {0.0}, spec), 0.0);
  EXPECT_THROW(reward_l1({0.0}, {0.0, 1.0}, spec), std::invalid_argument);
}

TEST(Reward, SpecValidation) {
  EXPECT_THROW((RewardSpec{RewardKind::l1_threshold, 0.0, 0.3}.validate()), std::invalid_argument);
  EXPECT_THROW((RewardSpec{RewardKind::l1_threshold, 1.0, -0.1}.validate()), std::invalid_argument);
}

TEST(Reward, NormalizeOverSet) {
  const auto r = normalize_over_set({1, 1, 2});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[0].second, 0.25);
  EXPECT_DOUBLE_EQ(r[2].second, 0.5);
  EXPECT_DOUBLE_EQ(normalize_over_set({3})[0].second, 1.0);
  const auto z = normalize_over_set({0, 2, 0});
  ASSERT_EQ(z.size(), 1u);
  EXPECT_EQ(z[0].first, 1u);
  EXPECT_THROW(normalize_over_set({0, 0}), NoSupportError);
  Rng rng(3);
  std::vector<double> w(5);
  double total = 0.0;
  for (auto& x : w) total += (x = rng.uniform());
  const auto n = normalize_over_set(w);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(n[k].second, w[k] / total, 1e-12);
}

TEST(MatchIndex, ScalarBuckets) {
  const auto idx = MatchIndex::scalar({2, 2, 7});
  EXPECT_EQ(idx.bucket(2), (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(idx.bucket(7), (std::vector<std::uint32_t>{2}));
  EXPECT_TRUE(idx.bucket_empty(3));
}

namespace {
std::vector<std::vector<double>> random_props(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> p(n, std::vector<double>(dim));
  for (auto& row : p)
    for (auto& x : row) x = rng.uniform() * 0.6;
  return p;
}
}  // namespace

TEST(MatchIndex, VectorRowsMatchDenseOracle) {
  const auto props = random_props(50, 3, 11);
  RewardSpec spec{RewardKind::l1_threshold, 1.0, 0.3};
  const auto idx = MatchIndex::vector(props, spec);
  const auto dense = oracle::dense_match_rows(props, 1.0, 0.3);
  for (std::size_t i = 0; i < props.size(); ++i) {
    std::vector<double> got(props.size(), 0.0);
    double sum = 0.0;
    for (const auto& [j, p] : idx.row(i)) {
      EXPECT_GT(p, 0.0);
      got[j] = p;
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (std::size_t j = 0; j < props.size(); ++j) EXPECT_NEAR(got[j], dense[i][j], 1e-12) << i << "," << j;
  }
}

TEST(MatchIndex, LargeLambdaIsPointMass) {
  std::vector<std::vector<double>> props;
  for (int i = 0; i < 6; ++i) props.push_back({0.1 * i, 0.05 * i});
  const auto idx = MatchIndex::vector(props, {RewardKind::l1_threshold, 1e6, 0.3});
  for (std::size_t i = 0; i < props.size(); ++i) {
    ASSERT_EQ(idx.row(i).size(), 1u);
    EXPECT_EQ(idx.row(i)[0].first, i);
    EXPECT_DOUBLE_EQ(idx.row(i)[0].second, 1.0);
  }
}

TEST(MatchIndex, EqualRewardsUniform) {
  const std::vector<std::vector<double>> props(4, std::vector<double>{0.2});
  const auto idx = MatchIndex::vector(props, {RewardKind::l1_threshold, 1.0, 0.3});
  for (const auto& [j, p] : idx.row(2)) EXPECT_EQ(p, 0.25);
}

TEST(MatchIndex, NonzeroCapKeepsLargest) {
  const auto props = random_props(40, 1, 5);
  const auto idx = MatchIndex::vector(props, {RewardKind::l1_threshold, 1.0, 10.0}, 4);
  const auto dense = oracle::dense_match_rows(props, 1.0, 10.0);
  for (std::size_t i = 0; i < props.size(); ++i) {
    ASSERT_EQ(idx.row(i).size(), 4u);
    std::vector<double> sorted = dense[i];
    std::sort(sorted.rbegin(), sorted.rend());
    for (const auto& [j, p] : idx.row(i)) EXPECT_GE(dense[i][j], sorted[3] - 1e-15);
  }
}

TEST(MatchIndex, SaveLoadAndLineage) {
  const auto dir = scratch_dir("index");
  const auto props = random_props(30, 2, 7);
  const auto idx = MatchIndex::vector(props, {RewardKind::l1_threshold, 1.0, 0.3});
  idx.save(dir / "v.idx", 42);
  const auto back = MatchIndex::load(dir / "v.idx", 42);
  ASSERT_EQ(back.num_rows(), idx.num_rows());
  for (std::size_t i = 0; i < idx.num_rows(); ++i) EXPECT_EQ(back.row(i), idx.row(i));
  EXPECT_THROW(MatchIndex::load(dir / "v.idx", 43), IndexMismatchError);
  const auto s = MatchIndex::scalar({1, 5, 5, -3});
  s.save(dir / "s.idx", 9);
  const auto sb = MatchIndex::load(dir / "s.idx", 9);
  EXPECT_EQ(sb.bucket(5), s.bucket(5));
  EXPECT_EQ(sb.bucket(-3), s.bucket(-3));
  EXPECT_EQ(sb.kind(), MatchIndex::Kind::scalar);
}

TEST(MatchSampler, CentralMass) {
  Rng rng(2);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += sample_rounded_truncated_normal(123.0, 1.0, rng) == 123;
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.382925, 0.01);
}

TEST(MatchSampler, TotalVariationAgainstAnalytic) {
  Rng rng(4);
  std::map<long, double> freq;
  const int n = 100000;
  for (int i = 0; i < n; ++i) freq[sample_rounded_truncated_normal(0.0, 1.0, rng)] += 1.0 / n;
  const auto pmf = oracle::discretized_truncated_normal(0.0, 1.0, -999.0, 999.0);
  double tv = 0.0;
  std::map<long, double> all = pmf;
  for (const auto& [v, f] : freq) all[v] += 0.0;
  for (const auto& [v, unused] : all) {
    const double p = pmf.count(v) ? pmf.at(v) : 0.0;
    const double q = freq.count(v) ? freq.at(v) : 0.0;
    tv += 0.5 * std::abs(p - q);
  }
  EXPECT_LT(tv, 0.02);
}

TEST(MatchSampler, NearBoundaryStaysInRange) {
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    const auto v = sample_rounded_truncated_normal(998.7, 1.0, rng);
    EXPECT_LE(v, 999);
  }
}

TEST(MatchSampler, SingleBucket) {
  const auto idx = MatchIndex::scalar({7, 7, 7});
  Rng rng(1);
  for (auto j : sample_matches_scalar(7, idx, 200, rng)) EXPECT_LT(j, 3u);
  // Far target falls back to the nearest populated bucket.
  for (auto j : sample_matches_scalar(400, idx, 20, rng)) EXPECT_LT(j, 3u);
}

TEST(MatchSampler, EmptyIndex) {
  const auto idx = MatchIndex::scalar({});
  Rng rng(1);
  EXPECT_THROW(sample_matches_scalar(0, idx, 1, rng), NoSupportError);
}

TEST(Presample, CountsAndDeterminism) {
  std::vector<std::int64_t> values;
  for (int i = 0; i < 200; ++i) values.push_back(i % 20 - 10);
  const auto idx = MatchIndex::scalar(values);
  const auto a = presample_training_pairs(idx, values, 10, 5);
  const auto b = presample_training_pairs(idx, values, 10, 5);
  ASSERT_EQ(a.pairs.size(), 2000u);
  for (std::size_t k = 0; k < a.pairs.size(); ++k) {
    EXPECT_EQ(a.pairs[k].source, b.pairs[k].source);
    EXPECT_EQ(a.pairs[k].target, k / 10);
    // matched value has non-negligible truncated-normal mass around the target
    EXPECT_LE(std::abs(values[a.pairs[k].source] - values[a.pairs[k].target]), 6);
  }
}

TEST(Presample, DegenerateReproducesDataset) {
  const std::vector<std::int64_t> values{-5, 0, 3, 9};
  const auto idx = MatchIndex::scalar(values);
  const auto r = presample_training_pairs(idx, values, 1, 3, 1e-9);
  for (std::size_t i = 0; i < values.size(); ++i) EXPECT_EQ(r.pairs[i].source, i);
}

// Expected reward under p equals c(y) times the expectation of p under R-bar.
TEST(RewardProperty, FlipExpectationIdentity) {
  const auto seqs = enumerate_sequences(3, 3);
  EXPECT_EQ(seqs.size(), 40u);
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> r(seqs.size()), p(seqs.size());
    double pz = 0.0;
    for (std::size_t k = 0; k < seqs.size(); ++k) {
      r[k] = rng.uniform() < 0.3 ? 0.0 : rng.uniform() * 3.0;
      pz += (p[k] = rng.uniform());
    }
    for (auto& x : p) x /= pz;
    const auto table = NormalizedRewardTable::build(r);
    double lhs = 0.0, rhs = 0.0, mass = 0.0;
    for (std::size_t k = 0; k < seqs.size(); ++k) {
      lhs += p[k] * r[k];
      rhs += table.normalized[k] * p[k];
      mass += table.normalized[k];
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_NEAR(lhs, table.normalizer * rhs, 1e-12);
  }
}

// p(j|i) over a training subset equals R-bar restricted and renormalized; the
// dropped factor depends on i only.
TEST(RewardProperty, ScalarFactorCaveat) {
  const auto seqs = enumerate_sequences(3, 3);
  auto props_of = [](const std::vector<int>& s) {
    double sum = 0.0;
    for (int t : s) sum += t;
    return std::vector<double>{0.1 * static_cast<double>(s.size()), 0.05 * sum};
  };
  std::vector<std::size_t> train;
  for (std::size_t k = 0; k < seqs.size(); k += 3) train.push_back(k);
  std::vector<std::vector<double>> train_props;
  for (auto k : train) train_props.push_back(props_of(seqs[k]));
  const RewardSpec spec{RewardKind::l1_threshold, 2.0, 0.25};
  const auto idx = MatchIndex::vector(train_props, spec);
  for (std::size_t i = 0; i < train.size(); ++i) {
    std::vector<double> r_all;
    for (const auto& s : seqs) r_all.push_back(reward_l1(props_of(s), train_props[i], spec));
    const auto table = NormalizedRewardTable::build(r_all);
    double restricted = 0.0;
    for (auto k : train) restricted += table.normalized[k];
    for (const auto& [j, p] : idx.row(i)) {
      EXPECT_NEAR(p, table.normalized[train[j]] / restricted, 1e-12);
      const double factor = table.normalized[train[j]] / p;
      EXPECT_NEAR(factor, restricted, 1e-12);
    }
  }
}
