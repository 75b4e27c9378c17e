#include "condgen/reward.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace condgen {

void RewardSpec::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("reward lambda must be positive");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("reward epsilon must be non-negative");
}

double reward_scalar(std::int64_t fx, std::int64_t y, double lambda) {
  const double d = static_cast<double>(fx - y);
  return std::exp(-0.5 * lambda * d * d);
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("property dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

double reward_l1(const std::vector<double>& fx, const std::vector<double>& y, const RewardSpec& spec) {
  const double d = l1_distance(fx, y);
  return d <= spec.epsilon ? std::exp(-spec.lambda * d) : 0.0;
}

SparseRow normalize_over_set(const std::vector<double>& rewards) {
  double total = 0.0;
  for (double r : rewards) {
    if (!(r >= 0.0)) throw std::invalid_argument("rewards must be non-negative");
    total += r;
  }
  if (!(total > 0.0)) throw NoSupportError("all rewards are zero");
  SparseRow row;
  for (std::size_t k = 0; k < rewards.size(); ++k)
    if (rewards[k] > 0.0) row.emplace_back(k, rewards[k] / total);
  return row;
}

MatchIndex MatchIndex::scalar(const std::vector<std::int64_t>& train_values) {
  MatchIndex idx;
  idx.kind_ = Kind::scalar;
  idx.n_ = train_values.size();
  idx.buckets_.assign(static_cast<std::size_t>(kBucketMax - kBucketMin + 1), {});
  for (std::size_t j = 0; j < train_values.size(); ++j) {
    const std::int64_t v = train_values[j];
    if (v < kBucketMin || v > kBucketMax) throw std::invalid_argument("training value out of bucket range");
    idx.buckets_[static_cast<std::size_t>(v - kBucketMin)].push_back(static_cast<std::uint32_t>(j));
  }
  return idx;
}

MatchIndex MatchIndex::vector(const std::vector<std::vector<double>>& props, const RewardSpec& spec,
                              std::size_t max_nonzeros) {
  spec.validate();
  if (max_nonzeros == 0) throw std::invalid_argument("max_nonzeros must be positive");
  MatchIndex idx;
  idx.kind_ = Kind::vector;
  idx.n_ = props.size();
  idx.rows_.resize(props.size());
  const std::size_t n = props.size();

#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < n; ++i) {
    // Rewards are taken relative to the nearest in-range match so that rows
    // with large lambda do not underflow to all-zero.
    std::vector<std::pair<double, std::uint64_t>> kept;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = l1_distance(props[j], props[i]);
      if (d <= spec.epsilon) kept.emplace_back(d, j);
    }
    if (kept.empty()) continue;
    if (kept.size() > max_nonzeros) {
      std::nth_element(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(max_nonzeros), kept.end());
      kept.resize(max_nonzeros);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    double d_min = std::numeric_limits<double>::infinity();
    for (const auto& e : kept) d_min = std::min(d_min, e.first);
    std::vector<double> w(kept.size());
    double total = 0.0;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      w[k] = std::exp(-spec.lambda * (kept[k].first - d_min));
      total += w[k];
    }
    SparseRow& row = idx.rows_[i];
    for (std::size_t k = 0; k < kept.size(); ++k)
      if (w[k] > 0.0) row.emplace_back(kept[k].second, w[k] / total);
  }
  return idx;
}

const std::vector<std::uint32_t>& MatchIndex::bucket(std::int64_t value) const {
  static const std::vector<std::uint32_t> kEmpty;
  if (kind_ != Kind::scalar || value < kBucketMin || value > kBucketMax) return kEmpty;
  return buckets_[static_cast<std::size_t>(value - kBucketMin)];
}

std::size_t MatchIndex::empty_rows() const {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.empty();
  return n;
}

std::size_t MatchIndex::nonzeros() const {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.size();
  for (const auto& b : buckets_) n += b.size();
  return n;
}

namespace {

constexpr char kIndexMagic[8] = {'C', 'G', 'I', 'D', 'X', '\0', '\0', '\1'};
constexpr std::uint32_t kIndexVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated index file");
  return v;
}

}  // namespace

void MatchIndex::save(const std::filesystem::path& path, std::uint64_t dataset_hash) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(kIndexMagic, sizeof kIndexMagic);
  put<std::uint32_t>(out, kIndexVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kind_));
  put<std::uint64_t>(out, n_);
  put<std::uint64_t>(out, dataset_hash);
  if (kind_ == Kind::scalar) {
    // One row per non-empty bucket, keyed by value - kBucketMin, uniform weights.
    std::uint64_t rows = 0;
    for (const auto& b : buckets_) rows += !b.empty();
    put<std::uint64_t>(out, rows);
    for (std::size_t v = 0; v < buckets_.size(); ++v) {
      const auto& b = buckets_[v];
      if (b.empty()) continue;
      put<std::uint64_t>(out, v);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(b.size()));
      const double p = 1.0 / static_cast<double>(b.size());
      for (auto j : b) {
        put<std::uint64_t>(out, j);
        put<double>(out, p);
      }
    }
  } else {
    put<std::uint64_t>(out, rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      put<std::uint64_t>(out, i);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(rows_[i].size()));
      for (const auto& [j, p] : rows_[i]) {
        put<std::uint64_t>(out, j);
        put<double>(out, p);
      }
    }
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

MatchIndex MatchIndex::load(const std::filesystem::path& path, std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kIndexMagic, sizeof magic) != 0) throw std::runtime_error("not an index file");
  if (get<std::uint32_t>(in) != kIndexVersion) throw std::runtime_error("unsupported index version");
  MatchIndex idx;
  const auto kind = get<std::uint32_t>(in);
  if (kind != 1 && kind != 2) throw std::runtime_error("unknown index kind");
  idx.kind_ = static_cast<Kind>(kind);
  idx.n_ = get<std::uint64_t>(in);
  const auto hash = get<std::uint64_t>(in);
  if (hash != expected_hash) throw IndexMismatchError("index was built for a different dataset");
  const auto rows = get<std::uint64_t>(in);
  if (idx.kind_ == Kind::scalar)
    idx.buckets_.assign(static_cast<std::size_t>(kBucketMax - kBucketMin + 1), {});
  else
    idx.rows_.resize(idx.n_);
  for (std::uint64_t r = 0; r < rows; ++r) {
    const auto key = get<std::uint64_t>(in);
    const auto count = get<std::uint32_t>(in);
    SparseRow row(count);
    for (auto& e : row) {
      e.first = get<std::uint64_t>(in);
      e.second = get<double>(in);
      if (e.first >= idx.n_) throw std::runtime_error("index entry out of range");
    }
    if (idx.kind_ == Kind::scalar) {
      if (key >= idx.buckets_.size()) throw std::runtime_error("bucket key out of range");
      for (const auto& e : row) idx.buckets_[key].push_back(static_cast<std::uint32_t>(e.first));
    } else {
      if (key >= idx.rows_.size()) throw std::runtime_error("row key out of range");
      idx.rows_[key] = std::move(row);
    }
  }
  return idx;
}

std::int64_t sample_rounded_truncated_normal(double y, double sigma, Rng& rng) {
  const double lo = static_cast<double>(kBucketMin), hi = static_cast<double>(kBucketMax);
  if (y <= lo - 50.0 * sigma || y >= hi + 50.0 * sigma) throw std::invalid_argument("mean far outside truncation range");
  for (;;) {
    const double v = y + sigma * rng.normal();
    if (v > lo && v < hi) return static_cast<std::int64_t>(std::round(v));
  }
}

std::vector<std::uint32_t> sample_matches_scalar(std::int64_t y, const MatchIndex& index, std::size_t k, Rng& rng,
                                                 double sigma) {
  if (index.kind() != MatchIndex::Kind::scalar) throw std::invalid_argument("scalar sampler needs a scalar index");
  if (index.train_size() == 0) throw NoSupportError("match index is empty");
  std::vector<std::uint32_t> out;
  out.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    std::int64_t v = 0;
    bool found = false;
    for (int attempt = 0; attempt < 32 && !found; ++attempt) {
      v = sample_rounded_truncated_normal(static_cast<double>(y), sigma, rng);
      found = !index.bucket_empty(v);
    }
    if (!found) {
      for (std::int64_t off = 0; !found; ++off) {
        if (y - off < kBucketMin && y + off > kBucketMax) throw NoSupportError("match index is empty");
        if (!index.bucket_empty(y - off)) {
          v = y - off;
          found = true;
        } else if (!index.bucket_empty(y + off)) {
          v = y + off;
          found = true;
        }
      }
    }
    const auto& b = index.bucket(v);
    out.push_back(b[rng.uniform_index(b.size())]);
  }
  return out;
}

std::uint32_t sample_from_row(const SparseRow& row, Rng& rng) {
  if (row.empty()) throw NoSupportError("empty match row");
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& [j, p] : row) {
    acc += p;
    if (u < acc) return static_cast<std::uint32_t>(j);
  }
  return static_cast<std::uint32_t>(row.back().first);
}

PresampleResult presample_training_pairs(const MatchIndex& index, const std::vector<std::int64_t>& target_values,
                                         std::size_t k, std::uint64_t seed, double sigma) {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  PresampleResult res;
  const std::size_t n = index.kind() == MatchIndex::Kind::scalar ? target_values.size() : index.num_rows();
  res.pairs.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto t = static_cast<std::uint32_t>(i);
    if (index.kind() == MatchIndex::Kind::scalar) {
      for (auto j : sample_matches_scalar(target_values[i], index, k, rng, sigma)) res.pairs.push_back({j, t});
    } else {
      const auto& row = index.row(i);
      if (row.empty()) {
        ++res.skipped_targets;
        continue;
      }
      for (std::size_t r = 0; r < k; ++r) res.pairs.push_back({sample_from_row(row, rng), t});
    }
  }
  return res;
}

std::vector<std::vector<int>> enumerate_sequences(int alphabet, int max_len) {
  std::vector<std::vector<int>> out{{}};
  std::size_t level_start = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t level_end = out.size();
    for (std::size_t s = level_start; s < level_end; ++s)
      for (int a = 0; a < alphabet; ++a) {
        auto next = out[s];
        next.push_back(a);
        out.push_back(std::move(next));
      }
    level_start = level_end;
  }
  return out;
}

NormalizedRewardTable NormalizedRewardTable::build(std::vector<double> rewards) {
  NormalizedRewardTable t;
  for (double r : rewards) {
    if (!(r >= 0.0)) throw std::invalid_argument("rewards must be non-negative");
    t.normalizer += r;
  }
  if (!(t.normalizer > 0.0)) throw NoSupportError("all rewards are zero");
  t.normalized.reserve(rewards.size());
  for (double r : rewards) t.normalized.push_back(r / t.normalizer);
  t.reward = std::move(rewards);
  return t;
}

}  // namespace condgen
