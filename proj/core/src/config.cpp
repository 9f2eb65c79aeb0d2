#include "dualnlu/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace dualnlu::cfg {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& what,
                            const std::string& got) {
  throw ConfigError("config key '" + key + "': expected " + what + ", got '" + got + "'");
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) bad_value(key, "an integer", v);
    return out;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, "an integer", v);
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) bad_value(key, "an unsigned integer", v);
    return out;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, "an unsigned integer", v);
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, "a number", v);
    return out;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, "a number", v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, "a boolean (true/false)", v);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  if (std::strtod(buf, nullptr) == v) return buf;
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct KeyDef {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define STR_KEY(key, field)                                             \
  {key, [](RunConfig& c, const std::string& v) { c.field = v; },        \
   [](const RunConfig& c) { return c.field; }}
#define INT_KEY(key, field)                                                             \
  {key, [](RunConfig& c, const std::string& v) { c.field = parse_int(key, v); },        \
   [](const RunConfig& c) { return std::to_string(c.field); }}
#define DBL_KEY(key, field)                                                             \
  {key, [](RunConfig& c, const std::string& v) { c.field = parse_double(key, v); },     \
   [](const RunConfig& c) { return fmt_double(c.field); }}
#define BOOL_KEY(key, field)                                                            \
  {key, [](RunConfig& c, const std::string& v) { c.field = parse_bool(key, v); },       \
   [](const RunConfig& c) { return fmt_bool(c.field); }}

const std::vector<KeyDef>& table() {
  static const std::vector<KeyDef> t{
      STR_KEY("train", train_path),
      STR_KEY("valid", valid_path),
      STR_KEY("test", test_path),
      STR_KEY("embeddings", embeddings_path),
      STR_KEY("forms", forms_path),
      STR_KEY("output_dir", output_dir),
      STR_KEY("checkpoint_dir", checkpoint_dir),
      STR_KEY("sig_a", sig_a),
      STR_KEY("sig_b", sig_b),
      STR_KEY("mode", mode),
      STR_KEY("regime", regime),
      DBL_KEY("label_ratio", label_ratio),
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      INT_KEY("min_count", min_count),
      INT_KEY("emb_dim", emb_dim),
      INT_KEY("hidden", hidden),
      INT_KEY("tag_emb_dim", tag_emb_dim),
      INT_KEY("intent_emb_dim", intent_emb_dim),
      DBL_KEY("dropout", dropout),
      INT_KEY("max_gen_len", max_gen_len),
      INT_KEY("lm_emb_dim", lm_emb_dim),
      INT_KEY("lm_hidden", lm_hidden),
      INT_KEY("lm_epochs", lm_epochs),
      INT_KEY("epochs", training.epochs),
      INT_KEY("batch_size", training.batch_size),
      INT_KEY("beam_k", training.beam_k),
      INT_KEY("pl_iterations", training.pl_iterations),
      INT_KEY("pl_epochs", training.pl_epochs),
      INT_KEY("dual_epochs", training.dual_epochs),
      DBL_KEY("lr", training.adam.lr),
      DBL_KEY("beta1", training.adam.beta1),
      DBL_KEY("beta2", training.adam.beta2),
      DBL_KEY("adam_eps", training.adam.eps),
      DBL_KEY("l2", training.adam.l2),
      DBL_KEY("clip", training.adam.clip),
      BOOL_KEY("reward_baseline", training.reward_baseline),
      BOOL_KEY("pl_include_labeled", training.pl_include_labeled),
      BOOL_KEY("pl_include_ssg", training.pl_include_ssg),
      DBL_KEY("alpha", training.weights.alpha),
      DBL_KEY("beta", training.weights.beta),
      DBL_KEY("gamma", training.weights.gamma),
      DBL_KEY("omega", training.weights.omega),
      DBL_KEY("lambda", training.weights.lambda),
      DBL_KEY("delta", training.weights.delta),
      INT_KEY("synth_total", synth_total),
      INT_KEY("synth_valid", synth_valid),
      INT_KEY("synth_test", synth_test),
  };
  return t;
}

#undef STR_KEY
#undef INT_KEY
#undef DBL_KEY
#undef BOOL_KEY

const KeyDef* find_key(const std::string& name) {
  for (const auto& k : table())
    if (name == k.name) return &k;
  return nullptr;
}

void apply_assignments(RunConfig& rc,
                       const std::vector<std::pair<std::string, std::string>>& kvs,
                       const std::string& where) {
  std::vector<std::string> unknown;
  for (const auto& [k, v] : kvs) {
    if (!find_key(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config key";
    if (unknown.size() > 1) msg += "s";
    msg += " in " + where + ":";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  for (const auto& [k, v] : kvs) find_key(k)->set(rc, v);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& k : table()) n.push_back(k.name);
    return n;
  }();
  return names;
}

void set_key(RunConfig& rc, const std::string& key, const std::string& value) {
  apply_assignments(rc, {{key, value}}, "assignment");
}

RunConfig defaults_with_env() {
  RunConfig rc;
  if (const char* env = std::getenv("DUALNLU_SEED")) rc.seed = parse_u64("DUALNLU_SEED", env);
  return rc;
}

void load_file(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> kvs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    kvs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  apply_assignments(rc, kvs, path);
}

void apply_overrides(RunConfig& rc, const std::vector<std::string>& assignments) {
  std::vector<std::pair<std::string, std::string>> kvs;
  for (const auto& a : assignments) {
    auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + a);
    kvs.emplace_back(trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
  }
  apply_assignments(rc, kvs, "command-line overrides");
}

void RunConfig::validate() const {
  static const std::set<std::string> kModes{"softmax", "crf", "focus"};
  static const std::set<std::string> kRegimes{"supervised",    "pl",       "dual-pl",
                                              "dual-learning", "combined", "template-synthesis"};
  if (!kModes.count(mode)) throw ConfigError("mode must be softmax|crf|focus, got '" + mode + "'");
  if (!kRegimes.count(regime))
    throw ConfigError(
        "regime must be supervised|pl|dual-pl|dual-learning|combined|template-synthesis, got '" +
        regime + "'");
  if (!(label_ratio > 0.0 && label_ratio <= 1.0))
    throw ConfigError("label_ratio must be in (0,1]");
  if (emb_dim < 1 || hidden < 1 || tag_emb_dim < 1 || intent_emb_dim < 1)
    throw ConfigError("model dimensions must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
  if (max_gen_len < 1) throw ConfigError("max_gen_len must be >= 1");
  if (lm_emb_dim < 1 || lm_hidden < 1) throw ConfigError("lm dimensions must be >= 1");
  if (lm_epochs < 0) throw ConfigError("lm_epochs must be >= 0");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (synth_total < 0 || synth_valid < 0 || synth_test < 0)
    throw ConfigError("synth sizes must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  nlu::mode_from_string(mode);
  training.validate();
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_kv() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : table()) out.emplace_back(k.name, k.get(*this));
  return out;
}

}  // namespace dualnlu::cfg
