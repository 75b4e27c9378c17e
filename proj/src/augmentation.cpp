#include "condgen/augmentation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace condgen {

void AugmentConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (max_edit_distance < 1) throw std::invalid_argument("max_edit_distance must be at least 1");
}

double log_substitution_count(std::size_t seq_len, std::size_t vocab_size, int m) {
  if (m < 0) throw std::invalid_argument("negative edit distance");
  if (static_cast<std::size_t>(m) > seq_len) return -INFINITY;
  const double n = static_cast<double>(seq_len), k = static_cast<double>(m);
  const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return log_binom + k * std::log(static_cast<double>(vocab_size) - 1.0);
}

std::vector<double> edit_distance_distribution(const AugmentConfig& config, std::size_t seq_len,
                                               std::size_t vocab_size) {
  config.validate();
  if (seq_len < 1) throw std::invalid_argument("seq_len must be at least 1");
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be at least 2");
  const std::size_t n = static_cast<std::size_t>(config.max_edit_distance) + 1;
  std::vector<double> logw(n);
  for (std::size_t m = 0; m < n; ++m) {
    logw[m] = -static_cast<double>(m) / config.tau;
    if (config.distance_mode == DistanceMode::count_weighted)
      logw[m] += log_substitution_count(seq_len, vocab_size, static_cast<int>(m));
  }
  double mx = -INFINITY;
  for (double v : logw) mx = std::max(mx, v);
  std::vector<double> p(n);
  double total = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    p[m] = std::exp(logw[m] - mx);
    total += p[m];
  }
  for (double& v : p) v /= total;
  return p;
}

double calibration_p0(const AugmentConfig& config, std::size_t seq_len, std::size_t vocab_size) {
  return edit_distance_distribution(config, seq_len, vocab_size)[0];
}

int sample_edit_distance(const AugmentConfig& config, std::size_t seq_len, std::size_t vocab_size, Rng& rng) {
  const auto p = edit_distance_distribution(config, seq_len, vocab_size);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t m = 0; m < p.size(); ++m) {
    acc += p[m];
    if (u < acc) return static_cast<int>(m);
  }
  return static_cast<int>(p.size() - 1);
}

double proposal_log_q(const AugmentConfig& config, int m, std::size_t seq_len, std::size_t vocab_size) {
  const auto p = edit_distance_distribution(config, seq_len, vocab_size);
  if (m < 0 || static_cast<std::size_t>(m) >= p.size()) throw std::invalid_argument("edit distance out of range");
  // Strings shorter than m still admit m edits through insertions.
  const double log_n = m == 0 ? 0.0 : log_substitution_count(std::max<std::size_t>(seq_len, m), vocab_size, m);
  return std::log(p[static_cast<std::size_t>(m)]) - log_n;
}

std::string perturb(std::string_view s, int m, Rng& rng, std::string_view alphabet) {
  if (m < 0) throw std::invalid_argument("negative edit count");
  if (alphabet.empty()) throw std::invalid_argument("empty alphabet");
  std::string out(s);
  for (int e = 0; e < m; ++e) {
    enum { insert, erase, substitute };
    int op = static_cast<int>(rng.uniform_index(3));
    if (out.empty()) op = insert;
    const char ch = alphabet[rng.uniform_index(alphabet.size())];
    switch (op) {
      case insert:
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(out.size() + 1)), ch);
        break;
      case erase:
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(out.size())));
        break;
      default:
        out[rng.uniform_index(out.size())] = ch;
        break;
    }
  }
  return out;
}

namespace {

AugmentResult augment(const std::vector<LabeledExample>& train, const PropertyOracle& oracle,
                      const AugmentConfig& config, std::uint64_t seed, std::string_view alphabet, bool relabel) {
  config.validate();
  const std::size_t vocab = alphabet.size();
  std::vector<std::vector<AugmentedPair>> per(train.size());
  std::vector<std::size_t> shortfall(train.size()), attempts(train.size());

#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < train.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    const std::string& src = train[i].expression;
    std::unordered_set<std::string> seen{src};
    std::size_t tries = 0;
    while (per[i].size() < config.per_instance_target && tries < config.max_attempts) {
      ++tries;
      const int m = sample_edit_distance(config, std::max<std::size_t>(src.size(), 1), vocab, rng);
      std::string cand = perturb(src, m, rng, alphabet);
      if (seen.count(cand)) continue;
      const auto prop = oracle.evaluate(cand);
      if (!prop) continue;
      seen.insert(cand);
      const std::int64_t label = relabel ? static_cast<std::int64_t>(std::llround((*prop)[0])) : train[i].value;
      per[i].push_back({std::move(cand), label, i, m});
    }
    attempts[i] = tries;
    shortfall[i] = config.per_instance_target - per[i].size();
  }

  AugmentResult res;
  std::unordered_set<std::string> taken;
  for (const auto& ex : train) taken.insert(ex.expression);
  for (std::size_t i = 0; i < train.size(); ++i) {
    res.shortfall += shortfall[i];
    res.attempts += attempts[i];
    for (auto& p : per[i]) {
      if (!taken.insert(p.expression).second) {
        ++res.dropped_duplicates;
        continue;
      }
      res.added.push_back(std::move(p));
    }
  }
  return res;
}

}  // namespace

AugmentResult augment_classic(const std::vector<LabeledExample>& train, const PropertyOracle& oracle,
                              const AugmentConfig& config, std::uint64_t seed, std::string_view alphabet) {
  return augment(train, oracle, config, seed, alphabet, true);
}

AugmentResult augment_raml(const std::vector<LabeledExample>& train, const PropertyOracle& oracle,
                           const AugmentConfig& config, std::uint64_t seed, std::string_view alphabet) {
  return augment(train, oracle, config, seed, alphabet, false);
}

std::vector<LabeledExample> extend_dataset(const std::vector<LabeledExample>& train, const AugmentResult& aug,
                                           const Vocabulary& vocab) {
  std::vector<LabeledExample> out = train;
  out.reserve(train.size() + aug.added.size());
  for (const auto& p : aug.added) out.push_back(make_example(p.expression, p.value, vocab));
  return out;
}

std::string augmented_tsv(const AugmentResult& aug) {
  std::string out;
  for (const auto& p : aug.added)
    out += p.expression + '\t' + std::to_string(p.value) + '\t' + std::to_string(p.source) + '\t' +
           std::to_string(p.edit_distance) + '\n';
  return out;
}

std::vector<SensitivityRow> edit_sensitivity_study(const std::vector<LabeledExample>& train, int m_min, int m_max,
                                                   std::size_t strings_per_m, std::size_t perturbations_per_string,
                                                   std::uint64_t seed, std::string_view alphabet) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (m_min < 0 || m_max < m_min) throw std::invalid_argument("bad edit-distance range");
  std::vector<SensitivityRow> rows;
  for (int m = m_min; m <= m_max; ++m) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
    SensitivityRow row;
    row.m = m;
    std::size_t valid = 0;
    double sq = 0.0;
    std::unordered_set<std::string> distinct;
    for (std::size_t s = 0; s < strings_per_m; ++s) {
      const auto& ex = train[rng.uniform_index(train.size())];
      for (std::size_t k = 0; k < perturbations_per_string; ++k) {
        const std::string x = perturb(ex.expression, m, rng, alphabet);
        ++row.perturbations;
        const EvalOutcome r = eval_expr(x);
        if (!r.ok()) continue;
        ++valid;
        const double d = static_cast<double>(r.value() - ex.value);
        sq += d * d;
        distinct.insert(x);
      }
    }
    row.validity = static_cast<double>(valid) / static_cast<double>(row.perturbations);
    row.uniqueness = valid ? static_cast<double>(distinct.size()) / static_cast<double>(valid) : 0.0;
    row.mse = valid ? sq / static_cast<double>(valid) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string sensitivity_csv(const std::vector<SensitivityRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "m,perturbations,validity,uniqueness,mse\n";
  for (const auto& r : rows)
    os << r.m << ',' << r.perturbations << ',' << r.validity << ',' << r.uniqueness << ',' << r.mse << '\n';
  return os.str();
}

}  // namespace condgen
