#include "condgen/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace condgen {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CG_SIZE(key, member)                                                                     \
  {key,                                                                                         \
   {[](RunConfig& c, const std::string& k, const std::string& v) { member = parse_number<std::size_t>(k, v); }, \
    [](const RunConfig& c) { return std::to_string(member); }}}
#define CG_INT(key, member)                                                               \
  {key,                                                                                  \
   {[](RunConfig& c, const std::string& k, const std::string& v) { member = parse_number<int>(k, v); }, \
    [](const RunConfig& c) { return std::to_string(member); }}}
#define CG_REAL(key, member)                                                                 \
  {key,                                                                                     \
   {[](RunConfig& c, const std::string& k, const std::string& v) { member = parse_number<double>(k, v); }, \
    [](const RunConfig& c) { return fmt(member); }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"task",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "scalar") c.task = TaskKind::scalar;
          else if (v == "vector") c.task = TaskKind::vector;
          else throw ConfigError("bad value for " + k + ": '" + v + "'");
        },
        [](const RunConfig& c) { return std::string(c.task == TaskKind::scalar ? "scalar" : "vector"); }}},
      {"objective",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.train.objective = parse_objective(v);
          } catch (const std::exception&) {
            throw ConfigError("bad value for " + k + ": '" + v + "'");
          }
        },
        [](const RunConfig& c) { return std::string(to_string(c.train.objective)); }}},
      {"presampled",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.presampled = parse_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.train.presampled ? "true" : "false"); }}},
      {"distance_mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "exponential") c.train.proposal.distance_mode = DistanceMode::exponential;
          else if (v == "count_weighted") c.train.proposal.distance_mode = DistanceMode::count_weighted;
          else throw ConfigError("bad value for " + k + ": '" + v + "'");
        },
        [](const RunConfig& c) {
          return std::string(c.train.proposal.distance_mode == DistanceMode::exponential ? "exponential"
                                                                                          : "count_weighted");
        }}},
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = parse_number<std::uint64_t>(k, v); },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"max_compute_units",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.max_compute_units = parse_number<std::uint64_t>(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.train.max_compute_units); }}},
      CG_SIZE("batch_size", c.train.batch_size),
      CG_SIZE("max_epochs", c.train.max_epochs),
      CG_REAL("lr", c.train.lr),
      CG_REAL("entropy_weight", c.train.entropy_weight),
      CG_SIZE("samples_per_target", c.train.samples_per_target),
      CG_SIZE("reinforce_samples", c.train.reinforce_samples),
      CG_REAL("reinforce_temperature", c.train.reinforce_temperature),
      CG_SIZE("warm_start_epochs", c.train.warm_start_epochs),
      CG_REAL("early_stop_factor", c.train.early_stop_factor),
      CG_REAL("clip_norm", c.train.clip_norm),
      CG_SIZE("pairs_per_epoch", c.train.pairs_per_epoch),
      CG_SIZE("validation_subset", c.train.validation_subset),
      CG_REAL("invalid_penalty", c.train.invalid_penalty),
      CG_REAL("match_sigma", c.train.match_sigma),
      CG_SIZE("raml_proposals", c.train.raml_proposals),
      CG_REAL("tau", c.train.proposal.tau),
      CG_INT("max_edit_distance", c.train.proposal.max_edit_distance),
      CG_SIZE("per_instance_target", c.train.proposal.per_instance_target),
      CG_SIZE("max_attempts", c.train.proposal.max_attempts),
      CG_INT("embed_dim", c.model.embed_dim),
      CG_INT("hidden_dim", c.model.hidden_dim),
      CG_INT("num_layers", c.model.num_layers),
      CG_INT("max_len", c.model.max_len),
      CG_REAL("reward_lambda", c.reward.lambda),
      CG_REAL("reward_epsilon", c.reward.epsilon),
  };
  return table;
}

#undef CG_SIZE
#undef CG_INT
#undef CG_REAL

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(no) + ": empty key or value");
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(no) + ": duplicate key " + key);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

void apply_key(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key " + key);
  it->second.set(config, key, value);
}

void apply_all(RunConfig& config, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply_key(config, k, v);
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

}  // namespace condgen
