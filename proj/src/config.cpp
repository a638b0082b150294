#include "egsw/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "egsw/error.hpp"

namespace egsw {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"task",
       {"name", "vocab_size", "eos", "prompt_len", "max_completion_len",
        "modulus", "secret", "secret_len", "prompt_pool", "task_seed",
        "fixed_length"}},
      {"train",
       {"algorithm", "group_size", "prompts_per_step", "steps_per_iteration",
        "iterations", "learning_rate", "optimizer", "adam_beta1", "adam_beta2",
        "adam_eps", "beta", "eps_clip", "sigma_min", "max_completion_len",
        "policy", "context_order", "init_scale"}},
      {"egsw",
       {"alpha", "temperature", "entropy_mode", "weight_rescale",
        "force_uniform", "granularity"}},
      {"run",
       {"out_dir", "seeds", "flush_interval", "threshold", "threshold_window",
        "record_wall_clock"}},
      {"gradcheck",
       {"instances", "seed", "h", "fd_tolerance", "exact_tolerance",
        "max_vocab", "max_group", "max_len"}},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const RawConfig& raw, const RawEntry& e) {
  if (e.line == 0) return raw.source + ": override " + e.section + "." + e.key;
  return raw.source + ":" + std::to_string(e.line);
}

[[noreturn]] void bad_value(const RawConfig& raw, const RawEntry& e,
                            const std::string& expected) {
  throw ConfigError(where(raw, e) + ": invalid value '" + e.value + "' for " +
                    e.section + "." + e.key + " (expected " + expected + ")");
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// Typed accessors over one section's entries.
class Section {
 public:
  Section(const RawConfig& raw, std::string name)
      : raw_(raw), name_(std::move(name)) {}

  const RawEntry* get(const std::string& key) const {
    return raw_.find(name_, key);
  }

  void read(const std::string& key, int& out) const {
    if (const RawEntry* e = get(key)) {
      if (!parse_number(e->value, out)) bad_value(raw_, *e, "integer");
    }
  }
  void read(const std::string& key, std::uint64_t& out) const {
    if (const RawEntry* e = get(key)) {
      if (!parse_number(e->value, out)) {
        bad_value(raw_, *e, "unsigned integer");
      }
    }
  }
  void read(const std::string& key, double& out) const {
    if (const RawEntry* e = get(key)) {
      std::istringstream in(e->value);
      in.imbue(std::locale::classic());
      double v = 0.0;
      char rest = 0;
      if (!(in >> v) || (in >> rest)) bad_value(raw_, *e, "real number");
      out = v;
    }
  }
  void read(const std::string& key, bool& out) const {
    if (const RawEntry* e = get(key)) {
      if (e->value == "true" || e->value == "1") {
        out = true;
      } else if (e->value == "false" || e->value == "0") {
        out = false;
      } else {
        bad_value(raw_, *e, "true/false");
      }
    }
  }
  void read(const std::string& key, std::string& out) const {
    if (const RawEntry* e = get(key)) out = e->value;
  }
  template <typename Enum, typename Parse>
  void read_enum(const std::string& key, Enum& out, Parse parse,
                 const std::string& choices) const {
    if (const RawEntry* e = get(key)) {
      try {
        out = parse(e->value);
      } catch (const InputError&) {
        bad_value(raw_, *e, choices);
      }
    }
  }

 private:
  const RawConfig& raw_;
  std::string name_;
};

TokenSeq parse_token_list(const RawConfig& raw, const RawEntry& e) {
  TokenSeq out;
  std::stringstream in(e.value);
  std::string item;
  while (std::getline(in, item, ',')) {
    Token t = 0;
    if (!parse_number(trim(item), t)) bad_value(raw, e, "comma-separated tokens");
    out.push_back(t);
  }
  if (out.empty()) bad_value(raw, e, "comma-separated tokens");
  return out;
}

}  // namespace

const RawEntry* RawConfig::find(const std::string& section,
                                const std::string& key) const {
  for (const RawEntry& e : entries) {
    if (e.section == section && e.key == key) return &e;
  }
  return nullptr;
}

void RawConfig::set(const std::string& section, const std::string& key,
                    const std::string& value) {
  for (RawEntry& e : entries) {
    if (e.section == section && e.key == key) {
      e.value = value;
      e.line = 0;
      return;
    }
  }
  entries.push_back({section, key, value, 0});
}

bool is_known_parameter(const std::string& section, const std::string& key) {
  const auto it = schema().find(section);
  return it != schema().end() && it->second.count(key) > 0;
}

RawConfig parse_raw_config(const std::string& text, const std::string& source) {
  RawConfig raw;
  raw.source = source;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = source + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(at + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!schema().count(section)) {
        throw ConfigError(at + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(at + "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError(at + "key '" + key + "' outside of any section");
    }
    if (!is_known_parameter(section, key)) {
      throw ConfigError(at + "unknown key '" + key + "' in section [" +
                        section + "]");
    }
    if (raw.find(section, key)) {
      throw ConfigError(at + "duplicate key '" + key + "' in section [" +
                        section + "]");
    }
    if (value.empty()) {
      throw ConfigError(at + "empty value for key '" + key + "'");
    }
    raw.entries.push_back({section, key, value, lineno});
  }
  return raw;
}

RawConfig read_raw_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_raw_config(buf.str(), path);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::uint64_t s = 0;
    if (!parse_number(trim(item), s)) {
      throw ConfigError("invalid seed '" + trim(item) + "'");
    }
    seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError("seed list must be non-empty");
  return seeds;
}

ExperimentConfig build_config(const RawConfig& raw) {
  for (const RawEntry& e : raw.entries) {
    if (!is_known_parameter(e.section, e.key)) {
      throw ConfigError(where(raw, e) + ": unknown key '" + e.key +
                        "' in section [" + e.section + "]");
    }
  }
  ExperimentConfig cfg;
  cfg.raw = raw;

  const Section task(raw, "task");
  Task& t = cfg.task;
  t.vocab.size = 8;
  task.read_enum("name", t.kind, task_kind_from_string,
                 "copy|reverse|mod_sum|sparse_treasure");
  task.read("vocab_size", t.vocab.size);
  t.vocab.eos = t.vocab.size - 1;
  task.read("eos", t.vocab.eos);
  task.read("prompt_len", t.prompt_len);
  t.max_completion_len = t.prompt_len + 1;
  task.read("max_completion_len", t.max_completion_len);
  task.read("modulus", t.modulus);
  task.read("prompt_pool", t.prompt_pool);
  task.read("task_seed", t.task_seed);
  task.read("fixed_length", t.fixed_length);
  if (const RawEntry* e = task.get("secret")) t.secret = parse_token_list(raw, *e);
  if (const RawEntry* e = task.get("secret_len")) {
    if (!t.secret.empty()) {
      throw ConfigError(where(raw, *e) +
                        ": secret and secret_len are mutually exclusive");
    }
    int len = 0;
    task.read("secret_len", len);
    if (len < 1) bad_value(raw, *e, "positive integer");
    try {
      t.secret = make_secret(t.vocab, len, t.task_seed);
    } catch (const InputError& err) {
      throw ConfigError(where(raw, *e) + ": " + err.what());
    }
  }

  const Section train(raw, "train");
  TrainConfig& c = cfg.train;
  train.read_enum("algorithm", c.algorithm, algorithm_from_string,
                  "grpo|grpo_egsw");
  train.read("group_size", c.group_size);
  train.read("prompts_per_step", c.prompts_per_step);
  train.read("steps_per_iteration", c.steps_per_iteration);
  train.read("iterations", c.iterations);
  train.read("learning_rate", c.learning_rate);
  train.read_enum("optimizer", c.optimizer, optimizer_from_string, "sgd|adam");
  train.read("adam_beta1", c.adam_beta1);
  train.read("adam_beta2", c.adam_beta2);
  train.read("adam_eps", c.adam_eps);
  train.read("beta", c.beta);
  train.read("eps_clip", c.eps_clip);
  train.read("sigma_min", c.sigma_min);
  train.read("max_completion_len", c.max_completion_len);
  train.read_enum("policy", c.policy, policy_kind_from_string,
                  "tabular_ngram|linear_softmax");
  train.read("context_order", c.context_order);
  train.read("init_scale", c.init_scale);

  const Section egsw(raw, "egsw");
  EgswConfig& w = c.egsw;
  egsw.read("alpha", w.alpha);
  egsw.read("temperature", w.temperature);
  egsw.read_enum("entropy_mode", w.entropy_mode, entropy_mode_from_string,
                 "raw|normalized");
  egsw.read("weight_rescale", w.weight_rescale);
  egsw.read("force_uniform", w.force_uniform);
  egsw.read_enum("granularity", w.granularity, granularity_from_string,
                 "step|trajectory");

  const Section run(raw, "run");
  RunConfig& r = cfg.run;
  run.read("out_dir", r.out_dir);
  if (const RawEntry* e = run.get("seeds")) {
    try {
      r.seeds = parse_seed_list(e->value);
    } catch (const ConfigError&) {
      bad_value(raw, *e, "non-empty comma-separated seed list");
    }
  }
  run.read("flush_interval", r.flush_interval);
  run.read("threshold", r.threshold);
  run.read("threshold_window", r.threshold_window);
  run.read("record_wall_clock", r.record_wall_clock);
  if (r.flush_interval < 1) {
    throw ConfigError(raw.source + ": run.flush_interval must be >= 1");
  }
  if (r.threshold_window < 1) {
    throw ConfigError(raw.source + ": run.threshold_window must be >= 1");
  }

  const Section gc(raw, "gradcheck");
  oracle::GradcheckOptions& g = cfg.gradcheck;
  gc.read("instances", g.instances);
  gc.read("seed", g.seed);
  gc.read("h", g.h);
  gc.read("fd_tolerance", g.fd_tolerance);
  gc.read("exact_tolerance", g.exact_tolerance);
  gc.read("max_vocab", g.max_vocab);
  gc.read("max_group", g.max_group);
  gc.read("max_len", g.max_len);

  try {
    t.validate();
    c.validate();
  } catch (const InputError& err) {
    throw ConfigError(raw.source + ": " + err.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return build_config(read_raw_config(path));
}

}  // namespace egsw
