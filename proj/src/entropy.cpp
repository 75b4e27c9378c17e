#include "condgen/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace condgen {

const char* to_string(EntropyEstimator e) {
  switch (e) {
    case EntropyEstimator::exact_enum: return "exact_enum";
    case EntropyEstimator::mc_A: return "mc_A";
    case EntropyEstimator::decomposed_B: return "decomposed_B";
    case EntropyEstimator::greedy: return "greedy";
    case EntropyEstimator::straight_through: return "straight_through";
  }
  return "unknown";
}

namespace {

struct Terminal {
  TokenSequence tokens;
  double log_prob;
};

void check_enumerable(const ConditionalLstm& model, double limit) {
  const auto& c = model.config();
  const double count = std::pow(static_cast<double>(c.vocab_size), static_cast<double>(c.max_len - 1));
  if (count > limit) throw std::length_error("sequence space too large to enumerate");
}

void walk(const ConditionalLstm& model, const std::vector<double>& cond, TokenSequence& prefix, double logp,
          EnumeratedEntropy& acc, std::vector<Terminal>* terminals) {
  const auto& cfg = model.config();
  const auto p = model.step_distribution(prefix, cond);
  const double weight = std::exp(logp);
  double h = 0.0;
  for (double q : p)
    if (q > 0.0) h -= q * std::log(q);
  acc.decomposed += weight * h;
  const bool last = prefix.size() + 1 == static_cast<std::size_t>(cfg.max_len);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] > 0.0)) continue;
    const double lp = logp + std::log(p[k]);
    prefix.push_back(static_cast<int>(k));
    if (static_cast<int>(k) == cfg.stop_token || last) {
      const double q = std::exp(lp);
      acc.exact -= q * lp;
      acc.total_mass += q;
      ++acc.events;
      if (terminals) terminals->push_back({prefix, lp});
    } else {
      walk(model, cond, prefix, lp, acc, terminals);
    }
    prefix.pop_back();
  }
}

EnumeratedEntropy enumerate(const ConditionalLstm& model, const std::vector<double>& cond, double limit,
                            std::vector<Terminal>* terminals) {
  check_enumerable(model, limit);
  EnumeratedEntropy acc;
  TokenSequence prefix{model.config().start_token};
  walk(model, cond, prefix, 0.0, acc, terminals);
  return acc;
}

std::vector<Rng> split_rngs(Rng& rng, std::size_t n) {
  std::vector<Rng> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(rng.next_u64());
  return out;
}

void mean_and_se(const std::vector<double>& v, double& mean, double& se) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  se = 0.0;
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

EnumeratedEntropy enumerate_entropy(const ConditionalLstm& model, const std::vector<double>& cond, double limit) {
  return enumerate(model, cond, limit, nullptr);
}

double entropy_exact_enum(const ConditionalLstm& model, const std::vector<double>& cond) {
  return enumerate_entropy(model, cond).exact;
}

double entropy_decomposed_B_exhaustive(const ConditionalLstm& model, const std::vector<double>& cond) {
  return enumerate_entropy(model, cond).decomposed;
}

MatchedEstimates entropy_A_and_B(const ConditionalLstm& model, const std::vector<double>& cond, std::size_t samples,
                                 Rng& rng) {
  if (samples == 0) throw std::invalid_argument("S must be at least 1");
  auto rngs = split_rngs(rng, samples);
  const auto traces = model.sample_traced(std::vector<std::vector<double>>(samples, cond), rngs);
  std::vector<double> a(samples), b(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    a[s] = -traces[s].log_prob;
    b[s] = traces[s].entropy_sum;
  }
  MatchedEstimates out;
  out.a.estimator = EntropyEstimator::mc_A;
  out.b.estimator = EntropyEstimator::decomposed_B;
  out.a.samples = out.b.samples = samples;
  mean_and_se(a, out.a.value, out.a.std_error);
  mean_and_se(b, out.b.value, out.b.std_error);
  return out;
}

EntropyEstimate entropy_mc_A(const ConditionalLstm& model, const std::vector<double>& cond, std::size_t samples,
                             Rng& rng) {
  return entropy_A_and_B(model, cond, samples, rng).a;
}

EntropyEstimate entropy_decomposed_B(const ConditionalLstm& model, const std::vector<double>& cond,
                                     std::size_t samples, Rng& rng) {
  return entropy_A_and_B(model, cond, samples, rng).b;
}

EntropyEstimate entropy_greedy(const ConditionalLstm& model, const std::vector<double>& cond) {
  EntropyEstimate e;
  e.estimator = EntropyEstimator::greedy;
  e.value = model.greedy_traced({cond})[0].entropy_sum;
  return e;
}

EntropyEstimate entropy_straight_through(const ConditionalLstm& model, const std::vector<double>& cond) {
  // Forward only: the tape is discarded without running backward, so the
  // parameters and their gradient buffers are left untouched.
  auto& mutable_model = const_cast<ConditionalLstm&>(model);
  nn::Tape tape;
  const nn::Var h = mutable_model.straight_through_entropy(tape, cond);
  EntropyEstimate e;
  e.estimator = EntropyEstimator::straight_through;
  e.value = tape.value(h)(0, 0);
  return e;
}

nn::Var entropy_greedy_term(ConditionalLstm& model, nn::Tape& tape, const std::vector<std::vector<double>>& conds,
                            const std::vector<double>& weights) {
  if (conds.size() != weights.size()) throw std::invalid_argument("one weight per target required");
  const auto seqs = model.greedy_batch(conds);
  std::vector<SequenceRow> rows;
  rows.reserve(conds.size());
  for (std::size_t i = 0; i < conds.size(); ++i) rows.push_back({&seqs[i], &conds[i], weights[i]});
  // The tape keeps only values, so the sequences may go out of scope after the unroll.
  return model.weighted_prefix_entropy(tape, rows);
}

double entropy_gradient_analytic(ConditionalLstm& model, const std::vector<double>& cond) {
  std::vector<Terminal> terminals;
  const auto acc = enumerate(model, cond, 1e6, &terminals);
  std::vector<SequenceRow> rows;
  rows.reserve(terminals.size());
  for (const auto& t : terminals) {
    const double p = std::exp(t.log_prob);
    // dH = sum_x p (1 + log p) dNLL(x)
    rows.push_back({&t.tokens, &cond, p * (1.0 + t.log_prob)});
  }
  nn::Tape tape;
  const nn::Var loss = model.weighted_nll(tape, rows);
  tape.backward(loss);
  return acc.exact;
}

EntropyBenchReport entropy_bench(const ConditionalLstm& model, const std::vector<std::vector<double>>& targets,
                                 const EntropyBenchConfig& config) {
  if (config.trials == 0 || config.sample_grid.empty()) throw std::invalid_argument("empty benchmark grid");
  EntropyBenchReport rep;
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    const auto& cond = targets[ti];
    double exact = std::nan("");
    if (config.with_exact) {
      try {
        exact = entropy_exact_enum(model, cond);
      } catch (const std::length_error&) {
      }
    }
    rep.exact.push_back(exact);
    const double greedy = entropy_greedy(model, cond).value;
    const double st = entropy_straight_through(model, cond).value;
    for (std::size_t s : config.sample_grid) {
      for (std::size_t trial = 0; trial < config.trials; ++trial) {
        Rng rng(derive_seed(derive_seed(config.seed, ti), s * 1000003ULL + trial));
        const auto m = entropy_A_and_B(model, cond, s, rng);
        rep.rows.push_back({EntropyEstimator::mc_A, s, trial, ti, m.a.value});
        rep.rows.push_back({EntropyEstimator::decomposed_B, s, trial, ti, m.b.value});
        rep.rows.push_back({EntropyEstimator::greedy, s, trial, ti, greedy});
        rep.rows.push_back({EntropyEstimator::straight_through, s, trial, ti, st});
        if (!std::isnan(exact)) rep.rows.push_back({EntropyEstimator::exact_enum, s, trial, ti, exact});
      }
    }
  }
  std::map<std::tuple<int, std::size_t, std::size_t>, std::vector<double>> groups;
  for (const auto& r : rep.rows) groups[{static_cast<int>(r.estimator), r.samples, r.target}].push_back(r.value);
  for (const auto& [key, vals] : groups) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
    rep.summary.push_back({static_cast<EntropyEstimator>(std::get<0>(key)), std::get<1>(key), std::get<2>(key), mean,
                           sd, vals.size()});
  }
  return rep;
}

std::string bench_csv(const std::vector<EntropyBenchRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "estimator,S,trial,target,value\n";
  for (const auto& r : rows)
    os << to_string(r.estimator) << ',' << r.samples << ',' << r.trial << ',' << r.target << ',' << r.value << '\n';
  return os.str();
}

std::string bench_histogram_csv(const std::vector<EntropyBenchRow>& rows, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("bins must be positive");
  std::map<std::pair<int, std::size_t>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{static_cast<int>(r.estimator), r.samples}].push_back(r.value);
  std::ostringstream os;
  os.precision(10);
  os << "estimator,S,bin_lo,bin_hi,count\n";
  for (const auto& [key, vals] : groups) {
    const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
    const double lo = *lo_it;
    const double width = (*hi_it > lo) ? (*hi_it - lo) / static_cast<double>(bins) : 1.0;
    std::vector<std::size_t> counts(bins, 0);
    for (double v : vals) counts[std::min(bins - 1, static_cast<std::size_t>((v - lo) / width))]++;
    for (std::size_t b = 0; b < bins; ++b)
      os << to_string(static_cast<EntropyEstimator>(key.first)) << ',' << key.second << ',' << lo + width * b << ','
         << lo + width * (b + 1) << ',' << counts[b] << '\n';
  }
  return os.str();
}

}  // namespace condgen
