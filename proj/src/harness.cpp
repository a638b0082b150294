#include "egsw/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "egsw/error.hpp"
#include "egsw/oracle.hpp"

namespace egsw {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kSummaryCsvHeader =
    "seed,algorithm,updates,final_mean_reward,auc_reward,"
    "updates_to_threshold,mean_length_q1,mean_length_q2,mean_length_q3,"
    "mean_length_q4,status";

namespace {

// Shortest round-trip representation, matching the JSONL records.
std::string fmt(double v) { return json(v).dump(); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void apply_cli(ExperimentConfig& cfg, const CliOptions& opts) {
  if (opts.out_dir) cfg.run.out_dir = *opts.out_dir;
  if (opts.seeds) {
    if (opts.seeds->empty()) throw ConfigError("--seeds must be non-empty");
    cfg.run.seeds = *opts.seeds;
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + dir.string() +
                      "': " + ec.message());
  }
}

bool any_failed(const std::vector<SeedRun>& runs) {
  return std::any_of(runs.begin(), runs.end(),
                     [](const SeedRun& r) { return !r.error.empty(); });
}

int threshold_or_sentinel(const RunSummary& s) {
  return s.updates_to_threshold ? *s.updates_to_threshold : s.updates + 1;
}

std::string optional_int(const std::optional<int>& v) {
  return v ? std::to_string(*v) : "";
}

}  // namespace

double trailing_mean(const std::vector<double>& rewards, std::size_t end,
                     int window) {
  if (end == 0 || end > rewards.size()) {
    throw InputError("trailing_mean: end out of range");
  }
  const std::size_t w = std::min<std::size_t>(window, end);
  double sum = 0.0;
  for (std::size_t i = end - w; i < end; ++i) sum += rewards[i];
  return sum / static_cast<double>(w);
}

std::optional<int> updates_to_threshold(const std::vector<double>& rewards,
                                        double threshold, int window) {
  for (std::size_t end = 1; end <= rewards.size(); ++end) {
    if (trailing_mean(rewards, end, window) >= threshold) {
      return static_cast<int>(end);
    }
  }
  return std::nullopt;
}

RunSummary summarize(const TrainMetrics& metrics, std::uint64_t seed,
                     Algorithm algorithm, double threshold, int window) {
  RunSummary s;
  s.seed = seed;
  s.algorithm = algorithm;
  const auto& recs = metrics.records;
  s.updates = static_cast<int>(recs.size());
  if (recs.empty()) return s;
  std::vector<double> rewards;
  rewards.reserve(recs.size());
  for (const UpdateRecord& r : recs) rewards.push_back(r.mean_reward);
  s.final_mean_reward = trailing_mean(rewards, rewards.size(), window);
  s.auc_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                 static_cast<double>(rewards.size());
  s.updates_to_threshold = updates_to_threshold(rewards, threshold, window);
  const std::size_t n = recs.size();
  for (std::size_t q = 0; q < 4; ++q) {
    const std::size_t lo = q * n / 4;
    std::size_t hi = (q + 1) * n / 4;
    if (hi == lo) hi = std::min(n, lo + 1);
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += recs[i].mean_length;
    s.length_digest[q] = sum / static_cast<double>(hi - lo);
  }
  return s;
}

json header_record(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Task& t = cfg.task;
  const TrainConfig& c = cfg.train;
  const EgswConfig& w = c.egsw;
  json task = {
      {"name", to_string(t.kind)},
      {"vocab_size", t.vocab.size},
      {"eos", t.vocab.eos},
      {"prompt_len", t.prompt_len},
      {"max_completion_len", t.max_completion_len},
      {"modulus", t.modulus},
      {"secret", t.secret},
      {"prompt_pool", t.prompt_pool},
      {"task_seed", t.task_seed},
      {"fixed_length", t.fixed_length},
  };
  json train = {
      {"algorithm", to_string(c.algorithm)},
      {"group_size", c.group_size},
      {"prompts_per_step", c.prompts_per_step},
      {"steps_per_iteration", c.steps_per_iteration},
      {"iterations", c.iterations},
      {"learning_rate", c.learning_rate},
      {"optimizer", to_string(c.optimizer)},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"beta", c.beta},
      {"eps_clip", c.eps_clip},
      {"sigma_min", c.sigma_min},
      {"max_completion_len", c.max_completion_len},
      {"policy", to_string(c.policy)},
      {"context_order", c.context_order},
      {"init_scale", c.init_scale},
  };
  json egsw = {
      {"alpha", w.alpha},
      {"temperature", w.temperature},
      {"entropy_mode", to_string(w.entropy_mode)},
      {"weight_rescale", w.weight_rescale},
      {"force_uniform", w.force_uniform},
      {"granularity", to_string(w.granularity)},
  };
  return {{"type", "header"}, {"seed", seed},   {"task", task},
          {"train", train},   {"egsw", egsw},
          {"updates", c.total_updates()}};
}

json update_record(const UpdateRecord& rec, bool wall_clock) {
  json j = {
      {"type", "update"},
      {"update", rec.update},
      {"iteration", rec.iteration},
      {"step", rec.step},
      {"mean_reward", rec.mean_reward},
      {"mean_abs_advantage", rec.mean_abs_advantage},
      {"mean_entropy", rec.mean_entropy},
      {"mean_kl", rec.mean_kl},
      {"grad_norm", rec.grad_norm},
      {"mean_length", rec.mean_length},
  };
  if (wall_clock) j["wall_clock_s"] = rec.wall_clock_s;
  return j;
}

void write_summary_csv(const std::string& path,
                       const std::vector<RunSummary>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << kSummaryCsvHeader << '\n';
  for (const RunSummary& s : rows) {
    out << s.seed << ',' << to_string(s.algorithm) << ',' << s.updates << ','
        << fmt(s.final_mean_reward) << ',' << fmt(s.auc_reward) << ','
        << optional_int(s.updates_to_threshold);
    for (double d : s.length_digest) out << ',' << fmt(d);
    out << ',' << (s.failed ? "error" : "ok") << '\n';
  }
}

std::string metrics_file_name(std::uint64_t seed) {
  return "metrics_seed" + std::to_string(seed) + ".jsonl";
}

SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                 const std::string& metrics_path) {
  std::ofstream out(metrics_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + metrics_path + "'");
  out << header_record(cfg, seed).dump() << '\n';
  out.flush();

  TrainConfig tc = cfg.train;
  tc.master_seed = seed;
  SeedRun run;
  int pending = 0;
  TrainHooks hooks;
  hooks.on_record = [&](const UpdateRecord& rec) {
    run.metrics.records.push_back(rec);
    out << update_record(rec, cfg.run.record_wall_clock).dump() << '\n';
    if (++pending >= cfg.run.flush_interval) {
      out.flush();
      pending = 0;
    }
  };
  try {
    train(cfg.task, tc, hooks);
  } catch (const TrainingError& e) {
    run.error = e.what();
    const json rec = {
        {"type", "error"},
        {"update", static_cast<int>(run.metrics.records.size()) + 1},
        {"message", run.error}};
    out << rec.dump() << '\n';
  }
  out.flush();
  run.summary = summarize(run.metrics, seed, cfg.train.algorithm,
                          cfg.run.threshold, cfg.run.threshold_window);
  run.summary.failed = !run.error.empty();
  return run;
}

std::vector<SeedRun> run_experiment(const ExperimentConfig& cfg,
                                    const std::string& out_dir,
                                    std::ostream* log) {
  ensure_dir(out_dir);
  std::vector<SeedRun> runs;
  std::vector<RunSummary> rows;
  for (std::uint64_t seed : cfg.run.seeds) {
    const fs::path path = fs::path(out_dir) / metrics_file_name(seed);
    SeedRun r = run_seed(cfg, seed, path.string());
    if (log) {
      *log << "seed " << seed << ": " << r.summary.updates << " updates";
      if (r.error.empty()) {
        *log << ", final mean reward " << r.summary.final_mean_reward
             << ", updates to threshold "
             << (r.summary.updates_to_threshold
                     ? std::to_string(*r.summary.updates_to_threshold)
                     : "not reached");
      } else {
        *log << ", error: " << r.error;
      }
      *log << '\n';
    }
    rows.push_back(r.summary);
    runs.push_back(std::move(r));
  }
  write_summary_csv((fs::path(out_dir) / "summary.csv").string(), rows);
  return runs;
}

int cmd_train(const std::string& config_path, const CliOptions& opts,
              std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig cfg = load_config(config_path);
    apply_cli(cfg, opts);
    const auto runs =
        run_experiment(cfg, cfg.run.out_dir, opts.quiet ? nullptr : &out);
    if (any_failed(runs)) {
      for (const SeedRun& r : runs) {
        if (!r.error.empty()) {
          err << "seed " << r.summary.seed << ": training error: " << r.error
              << '\n';
        }
      }
      return 1;
    }
    return 0;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return 2;
  }
}

namespace {

void require_match(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("compare: configs differ in " + what);
}

void validate_matched(const ExperimentConfig& a, const ExperimentConfig& b) {
  const json ta = header_record(a, 0)["task"];
  const json tb = header_record(b, 0)["task"];
  require_match(ta == tb, "task");
  require_match(a.run.seeds == b.run.seeds, "seeds");
  const TrainConfig& x = a.train;
  const TrainConfig& y = b.train;
  require_match(x.group_size == y.group_size &&
                    x.prompts_per_step == y.prompts_per_step &&
                    x.steps_per_iteration == y.steps_per_iteration &&
                    x.iterations == y.iterations &&
                    x.max_completion_len == y.max_completion_len,
                "budget (group_size, prompts_per_step, steps_per_iteration, "
                "iterations, max_completion_len)");
  require_match(a.run.threshold == b.run.threshold &&
                    a.run.threshold_window == b.run.threshold_window,
                "threshold");
}

}  // namespace

int cmd_compare(const std::string& config_grpo, const std::string& config_egsw,
                const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig a = load_config(config_grpo);
    ExperimentConfig b = load_config(config_egsw);
    apply_cli(a, opts);
    apply_cli(b, opts);
    validate_matched(a, b);
    const fs::path root = a.run.out_dir;
    std::ostream* log = opts.quiet ? nullptr : &out;
    if (log) *log << "[grpo arm: " << config_grpo << "]\n";
    const auto ra = run_experiment(a, (root / "grpo").string(), log);
    if (log) *log << "[egsw arm: " << config_egsw << "]\n";
    const auto rb = run_experiment(b, (root / "egsw").string(), log);

    const fs::path csv = root / "compare.csv";
    std::ofstream f(csv);
    if (!f) throw ConfigError("cannot write '" + csv.string() + "'");
    f << "seed,grpo_updates_to_threshold,egsw_updates_to_threshold,"
         "grpo_final_mean_reward,egsw_final_mean_reward,egsw_no_later\n";
    int wins = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
      const RunSummary& sa = ra[i].summary;
      const RunSummary& sb = rb[i].summary;
      // A seed counts when EGSW reached the threshold at or before GRPO.
      // If neither arm reached it the seed does not count.
      const bool no_later =
          sb.updates_to_threshold &&
          threshold_or_sentinel(sb) <= threshold_or_sentinel(sa);
      wins += no_later ? 1 : 0;
      f << sa.seed << ',' << optional_int(sa.updates_to_threshold) << ','
        << optional_int(sb.updates_to_threshold) << ','
        << fmt(sa.final_mean_reward) << ',' << fmt(sb.final_mean_reward)
        << ',' << (no_later ? 1 : 0) << '\n';
    }
    std::ostringstream verdict;
    verdict << "verdict: egsw reached threshold " << a.run.threshold
            << " no later than grpo in " << wins << "/" << ra.size()
            << " seeds";
    out << verdict.str() << '\n';
    std::ofstream v(root / "verdict.txt");
    v << verdict.str() << '\n';
    if (any_failed(ra) || any_failed(rb)) {
      err << "compare: at least one seed ended with a training error\n";
      return 1;
    }
    return 0;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return 2;
  }
}

std::string format_report(const oracle::CheckResult& r) {
  std::ostringstream os;
  os << "check=" << r.name << " status=" << (r.passed ? "pass" : "fail")
     << " max_rel_error=" << r.report.max_rel_error
     << " mean_rel_error=" << r.report.mean_rel_error
     << " tolerance=" << r.tolerance << " h=" << r.report.h
     << " worst_coordinate=" << r.report.worst_index
     << " worst_instance=" << r.worst_instance
     << " coordinates=" << r.report.coordinates;
  if (r.report.subset) os << " subset_seed=" << r.report.subset_seed;
  return os.str();
}

int cmd_gradcheck(const std::optional<std::string>& config_path,
                  const std::string& corrupt, const CliOptions& opts,
                  std::ostream& out, std::ostream& err) {
  try {
    oracle::GradcheckOptions g;
    if (config_path) g = load_config(*config_path).gradcheck;
    g.corrupt = corrupt;
    const auto results = oracle::run_gradcheck_suite(g);
    std::vector<std::string> failing;
    for (const auto& r : results) {
      if (!opts.quiet || !r.passed) out << format_report(r) << '\n';
      if (!r.passed) failing.push_back(r.name);
    }
    if (!failing.empty()) {
      err << "gradcheck failed:";
      for (const auto& n : failing) err << ' ' << n;
      err << '\n';
      return 1;
    }
    return 0;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return 2;
  } catch (const OracleError& e) {
    err << "gradcheck: " << e.what() << '\n';
    return 1;
  }
}

std::vector<SweepAxis> parse_sweep_spec(const std::string& text,
                                        const std::string& source) {
  std::vector<SweepAxis> axes;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError(at + "expected 'section.key = v1, v2, ...'");
    }
    SweepAxis axis;
    axis.section = trim(line.substr(0, dot));
    axis.key = trim(line.substr(dot + 1, eq - dot - 1));
    if (!is_known_parameter(axis.section, axis.key)) {
      throw ConfigError(at + "unknown sweep parameter '" + axis.section + "." +
                        axis.key + "'");
    }
    if (axis.section == "run" || axis.section == "gradcheck" ||
        (axis.section == "task" && axis.key == "secret")) {
      throw ConfigError(at + "parameter '" + axis.section + "." + axis.key +
                        "' cannot be swept");
    }
    for (const auto& a : axes) {
      if (a.section == axis.section && a.key == axis.key) {
        throw ConfigError(at + "parameter '" + axis.section + "." + axis.key +
                          "' listed twice");
      }
    }
    std::stringstream vs(line.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      v = trim(v);
      if (v.empty()) throw ConfigError(at + "empty grid value");
      axis.values.push_back(v);
    }
    if (axis.values.empty()) throw ConfigError(at + "empty value grid");
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw ConfigError(source + ": sweep spec lists no parameters");
  return axes;
}

int cmd_sweep(const std::string& config_path, const std::string& sweep_spec,
              const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const RawConfig base = read_raw_config(config_path);
    std::ifstream sf(sweep_spec);
    if (!sf) throw ConfigError(sweep_spec + ": cannot open sweep spec");
    std::stringstream buf;
    buf << sf.rdbuf();
    const auto axes = parse_sweep_spec(buf.str(), sweep_spec);

    std::size_t cells = 1;
    for (const auto& a : axes) cells *= a.values.size();
    // Validate every cell before running any of them.
    std::vector<ExperimentConfig> configs;
    std::vector<std::vector<std::string>> assignments;
    for (std::size_t c = 0; c < cells; ++c) {
      RawConfig raw = base;
      std::vector<std::string> chosen;
      std::size_t rem = c;
      for (std::size_t k = axes.size(); k-- > 0;) {
        const auto& a = axes[k];
        chosen.insert(chosen.begin(), a.values[rem % a.values.size()]);
        rem /= a.values.size();
      }
      for (std::size_t k = 0; k < axes.size(); ++k) {
        raw.set(axes[k].section, axes[k].key, chosen[k]);
      }
      ExperimentConfig cfg = build_config(raw);
      apply_cli(cfg, opts);
      configs.push_back(std::move(cfg));
      assignments.push_back(std::move(chosen));
    }

    struct Row {
      std::size_t cell;
      int reached;
      double mean_updates;
      double mean_final;
      double mean_auc;
    };
    std::vector<Row> rows;
    bool failed = false;
    const fs::path root = configs.front().run.out_dir;
    for (std::size_t c = 0; c < cells; ++c) {
      std::ostringstream name;
      name << "cell_" << std::setw(3) << std::setfill('0') << c;
      const fs::path dir = root / name.str();
      std::ostream* log = opts.quiet ? nullptr : &out;
      if (log) {
        *log << "[" << name.str();
        for (std::size_t k = 0; k < axes.size(); ++k) {
          *log << ' ' << axes[k].section << '.' << axes[k].key << '='
               << assignments[c][k];
        }
        *log << "]\n";
      }
      const auto runs = run_experiment(configs[c], dir.string(), log);
      failed = failed || any_failed(runs);
      Row r{c, 0, 0.0, 0.0, 0.0};
      for (const SeedRun& s : runs) {
        r.reached += s.summary.updates_to_threshold ? 1 : 0;
        r.mean_updates += threshold_or_sentinel(s.summary);
        r.mean_final += s.summary.final_mean_reward;
        r.mean_auc += s.summary.auc_reward;
      }
      const double n = static_cast<double>(runs.size());
      r.mean_updates /= n;
      r.mean_final /= n;
      r.mean_auc /= n;
      rows.push_back(r);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
      if (x.mean_updates != y.mean_updates) {
        return x.mean_updates < y.mean_updates;
      }
      return x.mean_final > y.mean_final;
    });

    const fs::path csv = root / "sweep_ranked.csv";
    std::ofstream f(csv);
    if (!f) throw ConfigError("cannot write '" + csv.string() + "'");
    f << "rank,cell";
    for (const auto& a : axes) f << ',' << a.section << '.' << a.key;
    f << ",seeds_reached,mean_updates_to_threshold,mean_final_reward,"
         "mean_auc_reward\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      f << i + 1 << ',' << r.cell;
      for (const auto& v : assignments[r.cell]) f << ',' << v;
      f << ',' << r.reached << ',' << fmt(r.mean_updates) << ','
        << fmt(r.mean_final) << ',' << fmt(r.mean_auc) << '\n';
    }
    if (!opts.quiet) out << "ranked " << rows.size() << " cells: " << csv.string() << '\n';
    return failed ? 1 : 0;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return 2;
  }
}

}  // namespace egsw
