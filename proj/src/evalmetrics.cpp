#include "condgen/evalmetrics.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace condgen {

GenerationMetrics generation_metrics(const std::vector<std::optional<std::string>>& samples,
                                     const std::unordered_set<std::string>& train_set) {
  if (samples.empty()) throw std::invalid_argument("no samples to score");
  GenerationMetrics m;
  m.total = samples.size();
  std::unordered_set<std::string> distinct;
  for (const auto& s : samples) {
    if (!s || !is_valid(*s)) continue;
    ++m.valid;
    if (distinct.insert(*s).second && !train_set.count(*s)) ++m.novel;
  }
  m.distinct_valid = distinct.size();
  m.validity = static_cast<double>(m.valid) / static_cast<double>(m.total);
  if (m.valid == 0) {
    m.degenerate = true;
    return m;
  }
  m.uniqueness = static_cast<double>(m.distinct_valid) / static_cast<double>(m.valid);
  m.novelty = static_cast<double>(m.novel) / static_cast<double>(m.distinct_valid);
  return m;
}

GenerationMetrics generation_metrics(const std::vector<std::string>& samples,
                                     const std::unordered_set<std::string>& train_set) {
  return generation_metrics(std::vector<std::optional<std::string>>(samples.begin(), samples.end()), train_set);
}

std::vector<std::optional<std::string>> ModelSampler::sample(const std::vector<std::vector<double>>& conds,
                                                             std::vector<Rng>& rngs) const {
  const auto seqs = model_.sample_batch(conds, rngs);
  std::vector<std::optional<std::string>> out;
  out.reserve(seqs.size());
  for (const auto& t : seqs) {
    std::string s;
    if (t.size() >= 2 && t.back() == model_.config().stop_token &&
        vocab_.try_decode_payload(TokenSequence(t.begin() + 1, t.end() - 1), s))
      out.emplace_back(std::move(s));
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

namespace {

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::vector<std::optional<std::string>> draw(const ConditionalSampler& sampler,
                                             const std::vector<LabeledExample>& targets, std::size_t per_target,
                                             std::uint64_t seed) {
  std::vector<std::vector<double>> conds;
  std::vector<Rng> rngs;
  conds.reserve(targets.size() * per_target);
  rngs.reserve(targets.size() * per_target);
  for (std::size_t t = 0; t < targets.size(); ++t)
    for (std::size_t s = 0; s < per_target; ++s) {
      conds.push_back(targets[t].y_cond);
      rngs.emplace_back(derive_seed(seed, t * per_target + s));
    }
  auto out = sampler.sample(conds, rngs);
  if (out.size() != conds.size()) throw std::runtime_error("sampler returned the wrong number of samples");
  return out;
}

}  // namespace

EvalReport conditional_eval_scalar(const ConditionalSampler& sampler, const std::vector<LabeledExample>& targets,
                                   const std::unordered_set<std::string>& train_set, const ScalarEvalOptions& options,
                                   const ConditionalLstm* model) {
  if (targets.empty()) throw std::invalid_argument("no evaluation targets");
  if (options.samples_per_target == 0 || options.repeats == 0) throw std::invalid_argument("S and repeats must be positive");
  EvalReport rep;
  rep.seed = options.seed;
  rep.samples_per_target = options.samples_per_target;
  rep.repeats = options.repeats;
  rep.targets = targets.size();
  std::vector<double> validity, uniqueness, novelty, mae, exact, within3;
  const std::size_t per = options.samples_per_target;
  for (std::size_t r = 0; r < options.repeats; ++r) {
    const auto samples = draw(sampler, targets, per, derive_seed(options.seed, r));
    const GenerationMetrics g = generation_metrics(samples, train_set);
    rep.degenerate = rep.degenerate || g.degenerate;
    rep.invalid_samples += g.total - g.valid;
    validity.push_back(g.validity);
    uniqueness.push_back(g.uniqueness);
    novelty.push_back(g.novelty);
    double abs_err = 0.0;
    std::size_t n_valid = 0, n_exact = 0, n_within = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& tgt = targets[i / per];
      EvalOutcome o = samples[i] ? eval_expr(*samples[i]) : EvalOutcome::invalid(InvalidReason::parse_error);
      if (options.keep_samples)
        rep.raw.push_back({r, i / per, tgt.value, samples[i].value_or(""), o.ok(), o.ok() ? o.value() : 0});
      if (!o.ok()) continue;
      const double d = std::abs(static_cast<double>(o.value() - tgt.value));
      ++n_valid;
      abs_err += d;
      n_exact += d == 0.0;
      n_within += d <= 3.0;
    }
    const double nv = static_cast<double>(std::max<std::size_t>(n_valid, 1));
    mae.push_back(n_valid ? abs_err / nv : 0.0);
    exact.push_back(n_valid ? static_cast<double>(n_exact) / nv : 0.0);
    within3.push_back(n_valid ? static_cast<double>(n_within) / nv : 0.0);
  }
  rep.validity = stat_of(validity);
  rep.uniqueness = stat_of(uniqueness);
  rep.novelty = stat_of(novelty);
  rep.mae = stat_of(mae);
  rep.exact_accuracy = stat_of(exact);
  rep.within_3_accuracy = stat_of(within3);
  if (model) {
    std::vector<SequenceRow> rows;
    double tokens = 0.0;
    for (const auto& t : targets) {
      rows.push_back({&t.tokens, &t.y_cond, 1.0});
      tokens += static_cast<double>(t.tokens.size() - 1);
    }
    double nll = 0.0;
    for (double lp : model->log_prob_batch(rows)) nll -= lp;
    rep.test_nll_per_token = nll / tokens;
    rep.has_nll = true;
  }
  return rep;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  // Welford co-moment update.
  double mx = 0.0, my = 0.0, cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    mx += dx / n;
    my += dy / n;
    cxx += dx * (x[i] - mx);
    cyy += dy * (y[i] - my);
    cxy += dx * (y[i] - my);
  }
  if (!(cxx > 0.0) || !(cyy > 0.0)) return std::nullopt;
  return std::clamp(cxy / std::sqrt(cxx * cyy), -1.0, 1.0);
}

EvalReport conditional_eval_vector(const ConditionalSampler& sampler, const PropertyOracle& oracle,
                                   const std::vector<LabeledExample>& targets, std::size_t samples_per_target,
                                   std::uint64_t seed) {
  if (targets.empty()) throw std::invalid_argument("no evaluation targets");
  if (samples_per_target == 0) throw std::invalid_argument("S must be positive");
  const std::size_t dim = oracle.arity();
  EvalReport rep;
  rep.seed = seed;
  rep.samples_per_target = samples_per_target;
  rep.repeats = 1;
  rep.targets = targets.size();
  const auto samples = draw(sampler, targets, samples_per_target, seed);
  std::vector<std::vector<double>> pred(dim), truth(dim);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t].y_cond.size() != dim) throw std::invalid_argument("target dimension does not match the oracle");
    std::vector<double> acc(dim, 0.0);
    std::size_t n = 0;
    for (std::size_t s = 0; s < samples_per_target; ++s) {
      const auto& str = samples[t * samples_per_target + s];
      const auto prop = str ? oracle.evaluate(*str) : std::nullopt;
      if (!prop) {
        ++rep.invalid_samples;
        continue;
      }
      for (std::size_t k = 0; k < dim; ++k) acc[k] += (*prop)[k];
      ++n;
    }
    if (n == 0) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      pred[k].push_back(acc[k] / static_cast<double>(n));
      truth[k].push_back(targets[t].y_cond[k]);
    }
  }
  rep.vector_targets_scored = dim ? pred[0].size() : 0;
  if (rep.vector_targets_scored == 0) throw std::runtime_error("all generations invalid");
  for (std::size_t k = 0; k < dim; ++k) {
    double mse = 0.0;
    for (std::size_t i = 0; i < pred[k].size(); ++i) mse += (pred[k][i] - truth[k][i]) * (pred[k][i] - truth[k][i]);
    rep.per_property_mse.push_back(mse / static_cast<double>(pred[k].size()));
    const auto r = pearson(pred[k], truth[k]);
    rep.per_property_correlation.push_back(r.value_or(0.0));
    rep.correlation_degenerate.push_back(!r.has_value());
  }
  const double total = static_cast<double>(targets.size() * samples_per_target);
  rep.validity.mean = 1.0 - static_cast<double>(rep.invalid_samples) / total;
  return rep;
}

std::string report_json(const EvalReport& r) {
  auto stat = [](const Stat& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.stddev}}; };
  nlohmann::json j;
  j["validity"] = stat(r.validity);
  j["uniqueness"] = stat(r.uniqueness);
  j["novelty"] = stat(r.novelty);
  j["mae"] = stat(r.mae);
  j["exact_accuracy"] = stat(r.exact_accuracy);
  j["within_3_accuracy"] = stat(r.within_3_accuracy);
  j["test_nll_per_token"] = r.has_nll ? nlohmann::json(r.test_nll_per_token) : nlohmann::json();
  j["invalid_samples"] = r.invalid_samples;
  j["degenerate"] = r.degenerate;
  if (!r.per_property_mse.empty()) {
    j["per_property_mse"] = r.per_property_mse;
    j["per_property_correlation"] = r.per_property_correlation;
    j["correlation_degenerate"] = r.correlation_degenerate;
    j["vector_targets_scored"] = r.vector_targets_scored;
  }
  j["metadata"] = {{"seed", r.seed},
                   {"checkpoint_hash", r.checkpoint_hash},
                   {"samples_per_target", r.samples_per_target},
                   {"repeats", r.repeats},
                   {"targets", r.targets},
                   {"nll_convention", "per-token mean over ground-truth test pairs"},
                   {"uniqueness_denominator", "valid samples"},
                   {"novelty_denominator", "distinct valid samples"},
                   {"invalid_handling", "excluded from mae and accuracies, counted in validity"}};
  return j.dump(2) + "\n";
}

std::string samples_tsv(const EvalReport& r) {
  std::string out = "repeat\ttarget\ttarget_value\texpression\tvalid\tvalue\n";
  for (const auto& s : r.raw)
    out += std::to_string(s.repeat) + '\t' + std::to_string(s.target) + '\t' + std::to_string(s.target_value) + '\t' +
           s.expression + '\t' + (s.valid ? "1" : "0") + '\t' + (s.valid ? std::to_string(s.value) : "") + '\n';
  return out;
}

}  // namespace condgen
