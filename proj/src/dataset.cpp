#include "condgen/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "condgen/evaluator.hpp"
#include "condgen/hash.hpp"

namespace condgen {

namespace {

const char* kSpecialNames[3] = {"<pad>", "<s>", "</s>"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw DatasetError("write failed for '" + path.string() + "'");
}

}  // namespace

Vocabulary Vocabulary::from_characters(std::string_view chars) {
  std::string sorted(chars);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  Vocabulary v;
  for (const char* name : kSpecialNames) v.symbols_.emplace_back(name);
  for (char c : sorted) {
    if (c == '\n' || c == '\t' || c == '\r') throw DatasetError("control character in vocabulary");
    v.symbols_.emplace_back(1, c);
  }
  v.rebuild_index();
  return v;
}

Vocabulary Vocabulary::expressions() { return from_characters("0123456789+-*/()"); }

void Vocabulary::rebuild_index() {
  std::fill(std::begin(index_), std::end(index_), -1);
  for (std::size_t i = 3; i < symbols_.size(); ++i)
    index_[static_cast<unsigned char>(symbols_[i][0])] = static_cast<int>(i);
}

int Vocabulary::index_of(char c) const {
  const int idx = index_[static_cast<unsigned char>(c)];
  if (idx < 0) throw DatasetError(std::string("character '") + c + "' not in vocabulary");
  return idx;
}

std::string Vocabulary::characters() const {
  std::string out;
  for (std::size_t i = 3; i < symbols_.size(); ++i) out += symbols_[i];
  return out;
}

TokenSequence Vocabulary::encode(std::string_view s) const {
  TokenSequence t;
  t.reserve(s.size() + 2);
  t.push_back(kStartToken);
  for (char c : s) t.push_back(index_of(c));
  t.push_back(kStopToken);
  return t;
}

std::string Vocabulary::decode(const TokenSequence& tokens) const {
  if (tokens.size() < 2 || tokens.front() != kStartToken)
    throw DatasetError("token sequence does not start with START");
  if (tokens.back() != kStopToken) throw DatasetError("token sequence does not end with STOP");
  std::string out;
  for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 3 || static_cast<std::size_t>(t) >= symbols_.size())
      throw DatasetError("malformed token " + std::to_string(t) + " at position " + std::to_string(i));
    out += symbols_[static_cast<std::size_t>(t)];
  }
  return out;
}

bool Vocabulary::try_decode_payload(const TokenSequence& payload, std::string& out) const {
  out.clear();
  for (int t : payload) {
    if (t < 3 || static_cast<std::size_t>(t) >= symbols_.size()) return false;
    out += symbols_[static_cast<std::size_t>(t)];
  }
  return true;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& s : symbols_) out += s + "\n";
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    lines.emplace_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  if (lines.size() < 3) throw DatasetError("vocabulary file has fewer than 3 entries");
  for (int i = 0; i < 3; ++i)
    if (lines[i] != kSpecialNames[i]) throw DatasetError("vocabulary special tokens out of order");
  std::string chars;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (lines[i].size() != 1) throw DatasetError("vocabulary entry '" + lines[i] + "' is not a single character");
    chars += lines[i];
  }
  Vocabulary v = from_characters(chars);
  if (v.size() != lines.size()) throw DatasetError("vocabulary entries not sorted or duplicated");
  for (std::size_t i = 3; i < lines.size(); ++i)
    if (v.symbols_[i] != lines[i]) throw DatasetError("vocabulary entries not in ascending order");
  return v;
}

double scale_target(std::int64_t value) {
  return static_cast<double>(value) / static_cast<double>(kValueLimit);
}

LabeledExample make_example(std::string expression, std::int64_t value, const Vocabulary& vocab) {
  LabeledExample ex;
  ex.tokens = vocab.encode(expression);
  ex.expression = std::move(expression);
  ex.value = value;
  ex.y_cond = {scale_target(value)};
  return ex;
}

BuildResult build_dataset(const Pcfg& pcfg, const BuildOptions& options) {
  options.budget.validate();
  constexpr std::size_t kChunk = 4096;
  const std::size_t n_chunks = (options.n_samples + kChunk - 1) / kChunk;

  struct ChunkOut {
    std::vector<std::pair<std::string, std::int64_t>> valid;
    std::size_t exceeded = 0;
    std::size_t invalid = 0;
  };
  std::vector<ChunkOut> chunks(n_chunks);
  // Guard against grammars that (almost) never yield a valid expression.
  const std::size_t max_failures = 1000 * kChunk;
  std::atomic<bool> starved{false};

#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < n_chunks; ++c) {
    Rng rng(derive_seed(options.seed, c));
    const std::size_t count = std::min(kChunk, options.n_samples - c * kChunk);
    ChunkOut& out = chunks[c];
    while (out.valid.size() < count) {
      if (out.exceeded + out.invalid > max_failures) {
        starved = true;
        break;
      }
      auto s = sample_derivation(pcfg, options.budget, rng);
      if (!s) {
        ++out.exceeded;
        continue;
      }
      const EvalOutcome r = eval_expr(*s);
      if (!r.ok()) {
        ++out.invalid;
        continue;
      }
      out.valid.emplace_back(std::move(*s), r.value());
    }
  }
  if (starved) throw DatasetError("grammar rarely yields valid expressions; gave up after repeated failures");

  BuildResult result;
  result.stats.samples = options.n_samples;
  std::vector<std::pair<std::string, std::int64_t>> unique;
  std::unordered_set<std::string> seen;
  std::string observed;
  for (auto& chunk : chunks) {
    result.stats.budget_exceeded += chunk.exceeded;
    result.stats.invalid += chunk.invalid;
    for (auto& kv : chunk.valid)
      if (seen.insert(kv.first).second) unique.push_back(std::move(kv));
  }
  result.stats.derivations = result.stats.samples + result.stats.invalid;
  result.stats.unique = unique.size();

  Rng shuffle_rng(derive_seed(options.seed, 0xda7a5e7ULL));
  for (std::size_t i = unique.size(); i > 1; --i) {
    const std::size_t j = shuffle_rng.uniform_index(i);
    std::swap(unique[i - 1], unique[j]);
  }
  if (options.max_unique > 0 && unique.size() > options.max_unique) unique.resize(options.max_unique);
  result.stats.kept = unique.size();

  const std::size_t held_out = options.validation_size + options.test_size;
  if (unique.size() <= held_out)
    throw DatasetError("insufficient unique examples: " + std::to_string(unique.size()) +
                       " available, " + std::to_string(held_out) + " requested for validation/test");

  for (const auto& kv : unique) observed += kv.first;
  Vocabulary vocab = Vocabulary::from_characters(observed);
  result.splits.vocab = vocab;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    LabeledExample ex = make_example(std::move(unique[i].first), unique[i].second, vocab);
    if (i < options.validation_size)
      result.splits.validation.push_back(std::move(ex));
    else if (i < held_out)
      result.splits.test.push_back(std::move(ex));
    else
      result.splits.train.push_back(std::move(ex));
  }
  return result;
}

std::string to_tsv(const std::vector<LabeledExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += ex.expression;
    out += '\t';
    out += std::to_string(ex.value);
    out += '\n';
  }
  return out;
}

std::vector<LabeledExample> read_tsv(const std::filesystem::path& path, const Vocabulary& vocab) {
  const std::string text = read_file(path);
  std::vector<LabeledExample> out;
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    ++line_no;
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": missing tab");
    std::string_view value_field = line.substr(tab + 1);
    value_field = value_field.substr(0, value_field.find('\t'));  // extra provenance columns ignored
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(value_field.data(), value_field.data() + value_field.size(), value);
    if (ec != std::errc() || ptr != value_field.data() + value_field.size())
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": bad value field");
    out.push_back(make_example(std::string(line.substr(0, tab)), value, vocab));
  }
  return out;
}

void write_splits(const std::filesystem::path& dir, const DatasetSplits& splits) {
  std::filesystem::create_directories(dir);
  write_file(dir / "train.tsv", to_tsv(splits.train));
  write_file(dir / "valid.tsv", to_tsv(splits.validation));
  write_file(dir / "test.tsv", to_tsv(splits.test));
  write_file(dir / "vocab.txt", splits.vocab.serialize());
}

DatasetSplits read_splits(const std::filesystem::path& dir) {
  DatasetSplits s;
  s.vocab = Vocabulary::parse(read_file(dir / "vocab.txt"));
  s.train = read_tsv(dir / "train.tsv", s.vocab);
  s.validation = read_tsv(dir / "valid.tsv", s.vocab);
  s.test = read_tsv(dir / "test.tsv", s.vocab);
  return s;
}

std::uint64_t dataset_hash(const DatasetSplits& splits) {
  Fnv1a h;
  h.update("train\n");
  h.update(to_tsv(splits.train));
  h.update("valid\n");
  h.update(to_tsv(splits.validation));
  h.update("test\n");
  h.update(to_tsv(splits.test));
  h.update("vocab\n");
  h.update(splits.vocab.serialize());
  return h.digest();
}

}  // namespace condgen
