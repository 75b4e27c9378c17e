// condgen: command-line pipeline (data, index, train, eval, augment, entropy bench, edit study).
#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "CLI11.hpp"
#include "condgen/augmentation.hpp"
#include "condgen/config.hpp"
#include "condgen/dataset.hpp"
#include "condgen/entropy.hpp"
#include "condgen/evalmetrics.hpp"
#include "condgen/grammar.hpp"
#include "condgen/hash.hpp"
#include "condgen/nn/kernels.hpp"
#include "condgen/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace condgen;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Bad invocation or inputs: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Inputs that do not belong together (stale index, foreign checkpoint): exit code 1.
struct LineageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string file_hash(const fs::path& p) { return hex64(fnv1a(read_file(p))); }

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw UsageError(std::string(what) + " directory not found: " + p.string());
}

void prepare_out(const fs::path& out, const std::vector<fs::path>& inputs) {
  for (const auto& in : inputs)
    if (!in.empty() && fs::exists(in) && fs::exists(out) && fs::equivalent(in, out))
      throw UsageError("output directory must differ from input " + in.string());
  fs::create_directories(out);
}

const auto g_process_start = std::chrono::steady_clock::now();

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv) {
    j_["command"] = std::move(command);
    j_["argv"] = argv;
    j_["tool_version"] = kVersion;
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }
  void input(const std::string& name, const fs::path& path, const std::string& hash) {
    j_["inputs"][name] = {{"path", path.string()}, {"hash", hash}};
  }
  void output(const fs::path& dir, const std::string& file) {
    j_["outputs"][file] = {{"path", (dir / file).string()}, {"hash", file_hash(dir / file)}};
  }
  json& operator[](const std::string& key) { return j_[key]; }
  void write(const fs::path& dir) {
    j_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - g_process_start).count();
    write_file(dir / "manifest.json", j_.dump(2) + "\n");
  }

 private:
  json j_;
};

struct LoadedData {
  DatasetSplits splits;
  std::uint64_t hash = 0;
  std::optional<MultiPropertyOracle> oracle;  // vector task only
};

/// Reads a split directory; for the vector task refits the property oracle on
/// the training expressions and replaces every y_cond with its properties.
LoadedData load_data(const fs::path& dir, TaskKind task) {
  require_dir(dir, "data");
  LoadedData d;
  d.splits = read_splits(dir);
  d.hash = dataset_hash(d.splits);
  if (task == TaskKind::vector) {
    std::vector<std::string> exprs;
    for (const auto& e : d.splits.train) exprs.push_back(e.expression);
    d.oracle = MultiPropertyOracle::fit(exprs);
    for (auto* split : {&d.splits.train, &d.splits.validation, &d.splits.test})
      for (auto& e : *split) e.y_cond = *d.oracle->evaluate(e.expression);
  }
  return d;
}

TaskKind parse_task(const std::string& s) {
  if (s == "scalar") return TaskKind::scalar;
  if (s == "vector") return TaskKind::vector;
  throw UsageError("task must be scalar or vector");
}

RewardSpec reward_for(const RunConfig& rc) {
  RewardSpec r = rc.reward;
  r.kind = rc.task == TaskKind::vector ? RewardKind::l1_threshold : RewardKind::gaussian_scalar;
  r.validate();
  return r;
}

fs::path default_data_dir() {
  const char* env = std::getenv("CONDGEN_DATA_DIR");
  return env ? fs::path(env) : fs::path();
}

fs::path data_or_env(const std::string& flag) {
  fs::path p = flag.empty() ? default_data_dir() : fs::path(flag);
  if (p.empty()) throw UsageError("--data not given and CONDGEN_DATA_DIR is unset");
  return p;
}

/// Defaults, then the config file, then `key=value` overrides (flags win).
RunConfig load_run_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig rc;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
    apply_all(rc, read_key_values(config_path));
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + o + "'");
    apply_key(rc, o.substr(0, eq), o.substr(eq + 1));
  }
  return rc;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw UsageError("bad list element '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

// ---- gen-data ----

struct GenDataArgs {
  std::string grammar = std::string(CONDGEN_GRAMMAR_DIR) + "/expressions.pcfg";
  std::size_t n = 500000, val = 20000, test = 10000, max_unique = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_gen_data(const GenDataArgs& a, const std::vector<std::string>& argv) {
  if (!fs::is_regular_file(a.grammar)) throw UsageError("grammar file not found: " + a.grammar);
  const Pcfg pcfg = load_pcfg(a.grammar);
  BuildOptions opt;
  opt.n_samples = a.n;
  opt.validation_size = a.val;
  opt.test_size = a.test;
  opt.seed = a.seed;
  opt.max_unique = a.max_unique;
  const BuildResult r = build_dataset(pcfg, opt);
  const fs::path out(a.out);
  prepare_out(out, {});
  write_splits(out, r.splits);
  Manifest m("gen-data", argv);
  m["seed"] = a.seed;
  m.input("grammar", a.grammar, file_hash(a.grammar));
  m["dataset_hash"] = hex64(dataset_hash(r.splits));
  m["stats"] = {{"samples", r.stats.samples}, {"derivations", r.stats.derivations}, {"budget_exceeded", r.stats.budget_exceeded},
                {"invalid", r.stats.invalid},         {"unique", r.stats.unique},
                {"kept", r.stats.kept},               {"train", r.splits.train.size()},
                {"validation", r.splits.validation.size()}, {"test", r.splits.test.size()}};
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "vocab.txt"}) m.output(out, f);
  m.write(out);
  std::cout << "unique " << r.stats.unique << ", train " << r.splits.train.size() << ", valid "
            << r.splits.validation.size() << ", test " << r.splits.test.size() << "\n";
}

// ---- index ----

struct IndexArgs {
  std::string data, out, task, config;
  std::vector<std::string> overrides;
  std::size_t max_nonzeros = 512;
};

void cmd_index(const IndexArgs& a, const std::vector<std::string>& argv) {
  RunConfig rc = load_run_config(a.config, a.overrides);
  if (!a.task.empty()) rc.task = parse_task(a.task);
  const fs::path data = data_or_env(a.data), out(a.out);
  const LoadedData d = load_data(data, rc.task);
  MatchIndex index = [&] {
    if (rc.task == TaskKind::scalar) {
      std::vector<std::int64_t> values;
      for (const auto& e : d.splits.train) values.push_back(e.value);
      return MatchIndex::scalar(values);
    }
    std::vector<std::vector<double>> props;
    for (const auto& e : d.splits.train) props.push_back(e.y_cond);
    return MatchIndex::vector(props, reward_for(rc), a.max_nonzeros);
  }();
  prepare_out(out, {data});
  index.save(out / "index.bin", d.hash);
  Manifest m("index", argv);
  m.input("data", data, hex64(d.hash));
  m["task"] = rc.task == TaskKind::scalar ? "scalar" : "vector";
  m["train_size"] = index.train_size();
  m["rows"] = index.num_rows();
  m["nonzeros"] = index.nonzeros();
  m["empty_rows"] = index.empty_rows();
  m.output(out, "index.bin");
  m.write(out);
  if (rc.task == TaskKind::scalar)
    std::cout << "scalar index over " << index.train_size() << " training examples\n";
  else
    std::cout << "vector index: " << index.num_rows() << " rows, " << index.nonzeros() << " nonzeros, "
              << index.empty_rows() << " empty\n";
}

// ---- train ----

struct TrainArgs {
  std::string data, index, config, objective, out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  RunConfig rc = load_run_config(a.config, a.overrides);
  if (!a.objective.empty()) {
    try {
      rc.train.objective = parse_objective(a.objective);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  rc.train.seed = *a.seed;
  const fs::path data = data_or_env(a.data), out(a.out);
  const LoadedData d = load_data(data, rc.task);
  rc.model.vocab_size = static_cast<int>(d.splits.vocab.size());
  rc.model.cond_dim = rc.task == TaskKind::vector ? 3 : 1;
  rc.model.validate();
  rc.train.validate();
  rc.train.nan_dump_dir = out;

  const bool surrogate =
      rc.train.objective == Objective::surrogate || rc.train.objective == Objective::surrogate_entropy;
  std::optional<MatchIndex> index;
  if (surrogate) {
    if (a.index.empty()) throw UsageError("surrogate objectives need --index (see the index command)");
    const fs::path ip = fs::path(a.index) / "index.bin";
    if (!fs::exists(ip)) throw UsageError("index file not found: " + ip.string());
    try {
      index = MatchIndex::load(ip, d.hash);
    } catch (const IndexMismatchError& e) {
      throw LineageError(std::string("stale index: ") + e.what());
    }
  }
  prepare_out(out, {data, a.index});

  TrainInputs in;
  in.train = &d.splits.train;
  in.validation = &d.splits.validation;
  in.vocab = &d.splits.vocab;
  in.index = index ? &*index : nullptr;
  in.task.oracle = d.oracle ? &*d.oracle : nullptr;
  in.task.reward = reward_for(rc);
  const TrainResult r = rc.train.objective == Objective::reinforce ? train_reinforce_warm(in, rc.model, rc.train)
                                                                    : train(in, rc.model, rc.train);

  r.model.save(out / "model.ckpt", d.hash, r.adam_steps);
  write_file(out / "history.csv", history_csv(r.history));
  write_file(out / "config.txt", to_text(rc));
  json summary = {{"objective", to_string(rc.train.objective)},
                  {"best_epoch", r.best_epoch},
                  {"epochs_run", r.history.empty() ? 0 : r.history.back().epoch},
                  {"early_stopped", r.early_stopped},
                  {"budget_exhausted", r.budget_exhausted},
                  {"compute_units", r.compute_units},
                  {"adam_steps", r.adam_steps},
                  {"counters",
                   {{"batches", r.counters.batches},
                    {"skipped_batches", r.counters.skipped_batches},
                    {"skipped_targets", r.counters.skipped_targets},
                    {"proposals", r.counters.proposals},
                    {"zero_reward_proposals", r.counters.zero_reward_proposals},
                    {"samples", r.counters.samples},
                    {"invalid_samples", r.counters.invalid_samples}}}};
  write_file(out / "train_summary.json", summary.dump(2) + "\n");

  Manifest m("train", argv);
  m["seed"] = *a.seed;
  if (!a.config.empty()) m.input("config", a.config, file_hash(a.config));
  m.input("data", data, hex64(d.hash));
  if (index) m.input("index", fs::path(a.index) / "index.bin", file_hash(fs::path(a.index) / "index.bin"));
  for (const char* f : {"model.ckpt", "history.csv", "config.txt", "train_summary.json"}) m.output(out, f);
  m.write(out);
  std::cout << to_string(rc.train.objective) << ": best epoch " << r.best_epoch << ", "
            << r.history.size() << " validation points\n";
}

// ---- eval ----

struct EvalArgs {
  std::string data, run, out, split = "test";
  std::uint64_t seed = 0;
  std::size_t samples = 25, repeats = 6, limit = 0;
  bool dump = false;
};

void cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const fs::path run(a.run), ckpt = run / "model.ckpt", out(a.out);
  if (!fs::exists(ckpt)) throw UsageError("checkpoint not found: " + ckpt.string());
  RunConfig rc;
  if (fs::exists(run / "config.txt")) apply_all(rc, read_key_values(run / "config.txt"));
  const fs::path data = data_or_env(a.data);
  const LoadedData d = load_data(data, rc.task);
  std::uint64_t trained_on = 0;
  const ConditionalLstm model = ConditionalLstm::load(ckpt, &trained_on);
  if (trained_on != d.hash)
    throw LineageError("checkpoint was trained on dataset " + hex64(trained_on) + " but --data hashes to " +
                       hex64(d.hash));
  std::vector<LabeledExample> targets;
  if (a.split == "test") targets = d.splits.test;
  else if (a.split == "valid") targets = d.splits.validation;
  else throw UsageError("--split must be test or valid");
  if (a.limit && targets.size() > a.limit) targets.resize(a.limit);
  if (targets.empty()) throw UsageError("no evaluation targets");

  std::unordered_set<std::string> train_set;
  for (const auto& e : d.splits.train) train_set.insert(e.expression);
  const ModelSampler sampler(model, d.splits.vocab);
  EvalReport rep;
  if (rc.task == TaskKind::scalar) {
    ScalarEvalOptions opt;
    opt.samples_per_target = a.samples;
    opt.repeats = a.repeats;
    opt.seed = a.seed;
    opt.keep_samples = a.dump;
    rep = conditional_eval_scalar(sampler, targets, train_set, opt, &model);
  } else {
    rep = conditional_eval_vector(sampler, *d.oracle, targets, a.samples, a.seed);
  }
  rep.checkpoint_hash = file_hash(ckpt);
  prepare_out(out, {data, run});
  write_file(out / "report.json", report_json(rep) + "\n");
  Manifest m("eval", argv);
  m["seed"] = a.seed;
  m.input("data", data, hex64(d.hash));
  m.input("checkpoint", ckpt, rep.checkpoint_hash);
  m.output(out, "report.json");
  if (a.dump && rc.task == TaskKind::scalar) {
    write_file(out / "samples.tsv", samples_tsv(rep));
    m.output(out, "samples.tsv");
  }
  m.write(out);
  if (rc.task == TaskKind::scalar)
    std::cout << "validity " << rep.validity.mean << ", mae " << rep.mae.mean << " +- " << rep.mae.stddev
              << ", exact " << rep.exact_accuracy.mean << ", within3 " << rep.within_3_accuracy.mean << "\n";
  else
    std::cout << "scored " << rep.vector_targets_scored << " targets\n";
}

// ---- augment ----

struct AugmentArgs {
  std::string data, out, mode = "classic", distance_mode = "exponential";
  std::uint64_t seed = 0;
  double tau = 0.745;
  int max_edit = 5;
  std::size_t per_instance = 10, max_attempts = 500;
};

void cmd_augment(const AugmentArgs& a, const std::vector<std::string>& argv) {
  const fs::path data = data_or_env(a.data), out(a.out);
  LoadedData d = load_data(data, TaskKind::scalar);
  AugmentConfig c;
  c.tau = a.tau;
  c.max_edit_distance = a.max_edit;
  c.per_instance_target = a.per_instance;
  c.max_attempts = a.max_attempts;
  if (a.distance_mode == "exponential") c.distance_mode = DistanceMode::exponential;
  else if (a.distance_mode == "count_weighted") c.distance_mode = DistanceMode::count_weighted;
  else throw UsageError("--distance-mode must be exponential or count_weighted");
  const ValueOracle oracle;
  const std::string alphabet = d.splits.vocab.characters();
  AugmentResult r;
  if (a.mode == "classic") r = augment_classic(d.splits.train, oracle, c, a.seed, alphabet);
  else if (a.mode == "raml") r = augment_raml(d.splits.train, oracle, c, a.seed, alphabet);
  else throw UsageError("--mode must be classic or raml");
  prepare_out(out, {data});
  DatasetSplits ext = d.splits;
  ext.train = extend_dataset(d.splits.train, r, d.splits.vocab);
  write_splits(out, ext);
  write_file(out / "augmented.tsv", augmented_tsv(r));
  Manifest m("augment", argv);
  m["seed"] = a.seed;
  m["mode"] = a.mode;
  m.input("data", data, hex64(d.hash));
  m["dataset_hash"] = hex64(dataset_hash(ext));
  m["added"] = r.added.size();
  m["shortfall"] = r.shortfall;
  m["attempts"] = r.attempts;
  m["dropped_duplicates"] = r.dropped_duplicates;
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "vocab.txt", "augmented.tsv"}) m.output(out, f);
  m.write(out);
  std::cout << a.mode << ": added " << r.added.size() << " pairs (shortfall " << r.shortfall << ")\n";
}

// ---- entropy-bench ----

struct EntropyArgs {
  std::string run, data, out, grid = "1,10,50", targets = "0";
  std::uint64_t seed = 0;
  std::size_t trials = 15, num_targets = 0, bins = 20;
  bool exact = false;
};

void cmd_entropy_bench(const EntropyArgs& a, const std::vector<std::string>& argv) {
  const fs::path ckpt = fs::path(a.run) / "model.ckpt", out(a.out);
  if (!fs::exists(ckpt)) throw UsageError("checkpoint not found: " + ckpt.string());
  const ConditionalLstm model = ConditionalLstm::load(ckpt);
  std::vector<std::vector<double>> conds;
  if (a.num_targets) {
    RunConfig rc;
    if (fs::exists(fs::path(a.run) / "config.txt")) apply_all(rc, read_key_values(fs::path(a.run) / "config.txt"));
    const LoadedData d = load_data(data_or_env(a.data), rc.task);
    for (std::size_t i = 0; i < std::min(a.num_targets, d.splits.test.size()); ++i)
      conds.push_back(d.splits.test[i].y_cond);
  } else {
    if (model.config().cond_dim != 1) throw UsageError("--targets takes scalar values; use --num-targets");
    std::stringstream ss(a.targets);
    for (std::string v; std::getline(ss, v, ',');) {
      try {
        conds.push_back({scale_target(std::stoll(v))});
      } catch (const std::invalid_argument&) {
        throw UsageError("bad target value '" + v + "'");
      }
    }
  }
  EntropyBenchConfig c;
  c.sample_grid = parse_size_list(a.grid);
  c.trials = a.trials;
  c.seed = a.seed;
  c.with_exact = a.exact;
  const EntropyBenchReport r = entropy_bench(model, conds, c);
  prepare_out(out, {fs::path(a.run)});
  write_file(out / "bench.csv", bench_csv(r.rows));
  write_file(out / "histogram.csv", bench_histogram_csv(r.rows, a.bins));
  std::ostringstream s;
  s.precision(10);
  s << "estimator,S,target,mean,stddev,count\n";
  for (const auto& row : r.summary)
    s << to_string(row.estimator) << ',' << row.samples << ',' << row.target << ',' << row.mean << ',' << row.stddev
      << ',' << row.count << '\n';
  write_file(out / "summary.csv", s.str());
  Manifest m("entropy-bench", argv);
  m["seed"] = a.seed;
  m.input("checkpoint", ckpt, file_hash(ckpt));
  for (const char* f : {"bench.csv", "histogram.csv", "summary.csv"}) m.output(out, f);
  m.write(out);
  std::cout << r.rows.size() << " rows over " << conds.size() << " targets\n";
}

// ---- edit-study ----

struct EditArgs {
  std::string data, out;
  std::uint64_t seed = 0;
  int m_min = 0, m_max = 5;
  std::size_t strings = 1000, perturbations = 100;
};

void cmd_edit_study(const EditArgs& a, const std::vector<std::string>& argv) {
  const fs::path data = data_or_env(a.data), out(a.out);
  const LoadedData d = load_data(data, TaskKind::scalar);
  if (a.m_min < 0 || a.m_max < a.m_min) throw UsageError("need 0 <= m-min <= m-max");
  const auto rows = edit_sensitivity_study(d.splits.train, a.m_min, a.m_max, a.strings, a.perturbations, a.seed,
                                           d.splits.vocab.characters());
  prepare_out(out, {data});
  write_file(out / "sensitivity.csv", sensitivity_csv(rows));
  Manifest m("edit-study", argv);
  m["seed"] = a.seed;
  m.input("data", data, hex64(d.hash));
  m.output(out, "sensitivity.csv");
  m.write(out);
  for (const auto& r : rows)
    std::cout << "m=" << r.m << " validity " << r.validity << " uniqueness " << r.uniqueness << " mse " << r.mse
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Conditional sequence generation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  int threads = 0;
  std::string kernels = "parallel";
  app.add_option("--threads", threads, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_option("--kernels", kernels, "Kernel implementation")->check(CLI::IsMember({"parallel", "reference"}));

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Sample, filter, deduplicate and split the expression dataset");
  gen->add_option("--grammar", gd.grammar, "PCFG file");
  gen->add_option("--n", gd.n, "Valid samples to draw (after length and range filters)");
  gen->add_option("--val", gd.val, "Validation pairs");
  gen->add_option("--test", gd.test, "Test pairs");
  gen->add_option("--max-unique", gd.max_unique, "Keep at most this many unique pairs (0 = all)");
  gen->add_option("--seed", gd.seed, "Random seed")->required();
  gen->add_option("--out", gd.out, "Output directory")->required();

  IndexArgs ix;
  auto* idx = app.add_subcommand("index", "Build the reward-matching index for a dataset");
  idx->add_option("--data", ix.data, "Dataset directory (default $CONDGEN_DATA_DIR)");
  idx->add_option("--task", ix.task, "scalar or vector");
  idx->add_option("--config", ix.config, "Config file (reward_lambda, reward_epsilon)");
  idx->add_option("--set", ix.overrides, "key=value override");
  idx->add_option("--max-nonzeros", ix.max_nonzeros, "Per-row cap for vector indices");
  idx->add_option("--out", ix.out, "Output directory")->required();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a conditional model");
  trn->add_option("--data", tr.data, "Dataset directory (default $CONDGEN_DATA_DIR)");
  trn->add_option("--index", tr.index, "Index directory (surrogate objectives)");
  trn->add_option("--config", tr.config, "Config file");
  trn->add_option("--objective", tr.objective, "ml | surrogate | surrogate-entropy | reinforce | raml-is");
  trn->add_option("--set", tr.overrides, "key=value override");
  trn->add_option("--seed", tr.seed, "Random seed")->required();
  trn->add_option("--out", tr.out, "Run directory")->required();

  EvalArgs ev;
  auto* evl = app.add_subcommand("eval", "Evaluate a trained model");
  evl->add_option("--data", ev.data, "Dataset directory (default $CONDGEN_DATA_DIR)");
  evl->add_option("--run", ev.run, "Run directory holding model.ckpt")->required();
  evl->add_option("--split", ev.split, "test or valid");
  evl->add_option("--S", ev.samples, "Samples per target");
  evl->add_option("--repeats", ev.repeats, "Repetitions (scalar task)");
  evl->add_option("--limit", ev.limit, "Use only the first N targets");
  evl->add_option("--seed", ev.seed, "Random seed")->required();
  evl->add_flag("--dump-samples", ev.dump, "Write samples.tsv");
  evl->add_option("--out", ev.out, "Output directory")->required();

  AugmentArgs au;
  auto* aug = app.add_subcommand("augment", "Edit-distance data augmentation");
  aug->add_option("--data", au.data, "Dataset directory (default $CONDGEN_DATA_DIR)");
  aug->add_option("--mode", au.mode, "classic (relabel with the oracle) or raml (keep source label)");
  aug->add_option("--tau", au.tau, "Edit-distance temperature");
  aug->add_option("--max-edit", au.max_edit, "Largest edit distance");
  aug->add_option("--per-instance", au.per_instance, "Accepted variants per training example");
  aug->add_option("--max-attempts", au.max_attempts, "Attempts per training example");
  aug->add_option("--distance-mode", au.distance_mode, "exponential or count_weighted");
  aug->add_option("--seed", au.seed, "Random seed")->required();
  aug->add_option("--out", au.out, "Output directory")->required();

  EntropyArgs en;
  auto* ent = app.add_subcommand("entropy-bench", "Compare entropy estimators on a trained model");
  ent->add_option("--run", en.run, "Run directory holding model.ckpt")->required();
  ent->add_option("--data", en.data, "Dataset directory for --num-targets");
  ent->add_option("--targets", en.targets, "Comma-separated target values");
  ent->add_option("--num-targets", en.num_targets, "Use the first N test targets instead");
  ent->add_option("--S", en.grid, "Comma-separated sample counts");
  ent->add_option("--trials", en.trials, "Trials per (estimator, S)");
  ent->add_option("--bins", en.bins, "Histogram bins");
  ent->add_flag("--exact", en.exact, "Also enumerate the exact entropy (small models only)");
  ent->add_option("--seed", en.seed, "Random seed")->required();
  ent->add_option("--out", en.out, "Output directory")->required();

  EditArgs ed;
  auto* edt = app.add_subcommand("edit-study", "Validity and value drift under random edits");
  edt->add_option("--data", ed.data, "Dataset directory (default $CONDGEN_DATA_DIR)");
  edt->add_option("--m-min", ed.m_min, "Smallest edit distance");
  edt->add_option("--m-max", ed.m_max, "Largest edit distance");
  edt->add_option("--strings", ed.strings, "Source strings per m");
  edt->add_option("--perturbations", ed.perturbations, "Perturbations per string");
  edt->add_option("--seed", ed.seed, "Random seed")->required();
  edt->add_option("--out", ed.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads > 0) omp_set_num_threads(threads);
  nn::set_kernel_mode(kernels == "reference" ? nn::KernelMode::reference : nn::KernelMode::parallel);

  try {
    if (*gen) cmd_gen_data(gd, args);
    else if (*idx) cmd_index(ix, args);
    else if (*trn) cmd_train(tr, args);
    else if (*evl) cmd_eval(ev, args);
    else if (*aug) cmd_augment(au, args);
    else if (*ent) cmd_entropy_bench(en, args);
    else if (*edt) cmd_edit_study(ed, args);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const GrammarError& e) {
    std::cerr << "grammar error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return 2;
  } catch (const LineageError& e) {
    std::cerr << "lineage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 1;
  }
}
