// Acceptance suite: one PASS/FAIL line per criterion, followed by indented
// informational lines. Usage: acceptance [output_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "egsw/config.hpp"
#include "egsw/grpo.hpp"
#include "egsw/harness.hpp"
#include "egsw/oracle.hpp"
#include "egsw/rng.hpp"
#include "egsw/trainer.hpp"
#include "egsw/weighting.hpp"

using namespace egsw;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
  std::vector<std::string> info;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

ExperimentConfig config_from(const std::string& text, const std::string& name) {
  return build_config(parse_raw_config(text, name));
}

// Random group with staggered lengths for the weighting properties.
GroupBatch random_group(Rng& rng, int vocab) {
  GroupBatch b;
  b.prompt = {0};
  const int k = 1 + static_cast<int>(rng.below(8));
  for (int i = 0; i < k; ++i) {
    Rollout r;
    r.prompt = b.prompt;
    const int len = 1 + static_cast<int>(rng.below(6));
    for (int t = 0; t < len; ++t) {
      r.tokens.push_back(static_cast<Token>(rng.below(vocab)));
      r.log_probs.push_back(-1.0);
      r.entropies.push_back(std::log(static_cast<double>(vocab)) * rng.uniform());
    }
    b.rollouts.push_back(r);
    b.advantages.emplace_back(len, 4.0 * rng.uniform() - 2.0);
  }
  return b;
}

EgswConfig random_egsw(Rng& rng) {
  EgswConfig c;
  c.alpha = rng.uniform();
  c.temperature = 0.25 + 3.0 * rng.uniform();
  c.entropy_mode = rng.uniform() < 0.5 ? EntropyMode::kRaw : EntropyMode::kNormalized;
  return c;
}

// 1. Both analytic gradients against central finite differences.
Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const oracle::GradcheckOptions opts;
  const auto results = oracle::run_gradcheck_suite(opts);
  const double secs = seconds_since(t0);
  Outcome o;
  double egsw = 1.0, grpo = 1.0;
  for (const auto& r : results) {
    if (r.name == "egsw_gradient") egsw = r.report.max_rel_error;
    if (r.name == "grpo_gradient") grpo = r.report.max_rel_error;
    o.info.push_back(format_report(r));
  }
  o.passed = egsw < 1e-4 && grpo < 1e-4 && secs < 60.0;
  o.detail = "instances=" + std::to_string(opts.instances) + " h=1e-05 egsw max_rel=" +
             fmt("%.3e", egsw) + " grpo max_rel=" + fmt("%.3e", grpo) +
             " (limit 1e-4), runtime " + fmt("%.2f", secs) + " s (limit 60 s)";
  return o;
}

// 2. Per-step sums, shift invariance, temperature rank invariance and the
// alpha = 0 / uniform-entropy reduction on random tables.
Outcome criterion_weighting() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(2026, {2}));
  double sum_err = 0.0, shift_err = 0.0, reduce_err = 0.0;
  int rank_flips = 0;
  for (int n = 0; n < 1000; ++n) {
    const int vocab = 2 + static_cast<int>(rng.below(15));
    GroupBatch b = random_group(rng, vocab);
    const EgswConfig cfg = random_egsw(rng);
    const WeightTable w = build_weight_table(b, cfg, vocab);

    for (int t = 0; t < w.steps(); ++t) {
      double s = 0.0;
      for (int i = 0; i < w.rollouts(); ++i) s += w.weight(i, t);
      sum_err = std::max(sum_err, std::abs(s - 1.0));
    }

    GroupBatch shifted = b;
    const double c = 10.0 * rng.uniform() - 5.0;
    for (auto& row : shifted.advantages) {
      for (double& a : row) a += c;
    }
    const WeightTable ws = build_weight_table(shifted, cfg, vocab);
    for (int i = 0; i < w.rollouts(); ++i) {
      for (int t = 0; t < w.steps(); ++t) {
        shift_err = std::max(shift_err, std::abs(w.weight(i, t) - ws.weight(i, t)));
      }
    }

    EgswConfig hot = cfg;
    hot.temperature = cfg.temperature * (1.5 + 4.0 * rng.uniform());
    const WeightTable wh = build_weight_table(b, hot, vocab);
    for (int t = 0; t < w.steps(); ++t) {
      for (int i = 0; i < w.rollouts(); ++i) {
        for (int j = 0; j < w.rollouts(); ++j) {
          if (!w.alive(i, t) || !w.alive(j, t)) continue;
          const bool a = w.weight(i, t) < w.weight(j, t);
          const bool h = wh.weight(i, t) < wh.weight(j, t);
          rank_flips += a != h ? 1 : 0;
        }
      }
    }

    // alpha = 0, then equal entropies with alpha > 0: both reduce to
    // softmax(A / P) over the live rollouts, evaluated here in long double.
    for (int variant = 0; variant < 2; ++variant) {
      EgswConfig rc = cfg;
      GroupBatch rb = b;
      if (variant == 0) {
        rc.alpha = 0.0;
      } else {
        const double h = rng.uniform();
        for (Rollout& r : rb.rollouts) std::fill(r.entropies.begin(), r.entropies.end(), h);
      }
      const WeightTable wr = build_weight_table(rb, rc, vocab);
      for (int t = 0; t < wr.steps(); ++t) {
        long double den = 0.0L;
        for (int i = 0; i < wr.rollouts(); ++i) {
          if (wr.alive(i, t)) den += std::exp(static_cast<long double>(rb.advantages[i][t]) / rc.temperature);
        }
        for (int i = 0; i < wr.rollouts(); ++i) {
          if (!wr.alive(i, t)) continue;
          const long double want =
              std::exp(static_cast<long double>(rb.advantages[i][t]) / rc.temperature) / den;
          reduce_err = std::max(reduce_err,
                                static_cast<double>(std::abs(wr.weight(i, t) - want)));
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.passed = sum_err <= 1e-9 && shift_err <= 1e-9 && rank_flips == 0 &&
             reduce_err <= 1e-12 && secs < 10.0;
  o.detail = "1000 tables: max |sum-1|=" + fmt("%.2e", sum_err) + " (1e-9), shift max diff=" +
             fmt("%.2e", shift_err) + " (1e-9), rank flips=" + std::to_string(rank_flips) +
             " (0), reduction max diff=" + fmt("%.2e", reduce_err) + " (1e-12), runtime " +
             fmt("%.2f", secs) + " s (limit 10 s)";
  return o;
}

// 3. Step entropy against brute force, the uniform case, and the trajectory
// sum.
Outcome criterion_entropy() {
  Rng rng(derive_seed(2026, {3}));
  double brute_err = 0.0, uniform_err = 0.0;
  int sum_mismatch = 0;
  for (int n = 0; n < 1000; ++n) {
    const int v = 2 + static_cast<int>(rng.below(31));
    PolicyParams p = PolicyParams::tabular({v, v - 1}, 0);
    const double scale = n % 4 == 0 ? 20.0 : 2.0;
    for (double& w : p.weights()) w = scale * rng.normal();
    const StepDistribution d = step_distribution(p, {}, {});
    long double brute = 0.0L;
    for (double q : d.probs) {
      if (q > 0.0) brute -= static_cast<long double>(q) * std::log(static_cast<long double>(q));
    }
    brute_err = std::max(brute_err, std::abs(step_entropy(d) - static_cast<double>(brute)));

    const StepDistribution u = step_distribution(PolicyParams::tabular({v, v - 1}, 0), {}, {});
    uniform_err = std::max(uniform_err, std::abs(step_entropy(u) - std::log(static_cast<double>(v))));

    std::vector<double> hs(1 + rng.below(10));
    for (double& h : hs) {
      for (double& w : p.weights()) w = 2.0 * rng.normal();
      h = step_entropy(step_distribution(p, {}, {}));
    }
    double seq = 0.0;
    for (double h : hs) seq += h;
    sum_mismatch += trajectory_entropy(hs) == seq ? 0 : 1;
  }
  Outcome o;
  o.passed = brute_err <= 1e-12 && uniform_err <= 1e-9 && sum_mismatch == 0;
  o.detail = "1000 distributions: max brute-force diff=" + fmt("%.2e", brute_err) +
             " (1e-12), uniform diff=" + fmt("%.2e", uniform_err) +
             " (1e-9), trajectory sum mismatches=" + std::to_string(sum_mismatch) + " (exact)";
  return o;
}

// 4. Standardized advantages.
Outcome criterion_advantages() {
  Rng rng(derive_seed(2026, {4}));
  double mean_err = 0.0, std_err = 0.0;
  int nonzero_constant = 0, groups = 0;
  const double sigma_min = 1e-6;
  while (groups < 1000) {
    std::vector<double> r(2 + rng.below(31));
    const int kind = static_cast<int>(rng.below(3));
    for (double& x : r) {
      x = kind == 0 ? rng.uniform() : kind == 1 ? (rng.uniform() < 0.3 ? 1.0 : 0.0)
                                                : std::floor(4.0 * rng.uniform()) / 3.0;
    }
    double mu = 0.0;
    for (double x : r) mu += x;
    mu /= r.size();
    double var = 0.0;
    for (double x : r) var += (x - mu) * (x - mu);
    if (std::sqrt(var / r.size()) < sigma_min) continue;
    ++groups;
    const auto a = normalize_advantages(r, sigma_min);
    double m = 0.0;
    for (double x : a) m += x;
    m /= a.size();
    double v = 0.0;
    for (double x : a) v += (x - m) * (x - m);
    mean_err = std::max(mean_err, std::abs(m));
    std_err = std::max(std_err, std::abs(std::sqrt(v / a.size()) - 1.0));
  }
  for (int n = 0; n < 1000; ++n) {
    const double c = rng.uniform();
    for (double x : normalize_advantages(std::vector<double>(2 + rng.below(31), c), sigma_min)) {
      nonzero_constant += x == 0.0 ? 0 : 1;
    }
  }
  Outcome o;
  o.passed = mean_err <= 1e-9 && std_err <= 1e-6 && nonzero_constant == 0;
  o.detail = "1000 groups: max |mean|=" + fmt("%.2e", mean_err) + " (1e-9), max |std-1|=" +
             fmt("%.2e", std_err) + " (1e-6); 1000 constant groups, nonzero advantages=" +
             std::to_string(nonzero_constant);
  return o;
}

// 5. k3 is nonnegative and vanishes at the reference.
Outcome criterion_kl() {
  Rng rng(derive_seed(2026, {5}));
  int negative = 0;
  long tokens = 0;
  double self_max = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const int v = 2 + static_cast<int>(rng.below(7));
    const Vocab vocab{v, v - 1};
    const PolicyParams base = n % 2 == 0 ? PolicyParams::tabular(vocab, static_cast<int>(rng.below(3)))
                                         : PolicyParams::linear(vocab);
    PolicyParams cur = base;
    PolicyParams ref = base;
    const double scale = n % 5 == 0 ? 15.0 : 1.5;
    for (double& w : cur.weights()) w = scale * rng.normal();
    for (double& w : ref.weights()) w = scale * rng.normal();
    TokenSeq prompt(2);
    for (Token& t : prompt) t = static_cast<Token>(rng.below(v - 1));
    std::vector<Rollout> rs;
    for (int i = 0; i < 4; ++i) rs.push_back(sample_rollout(cur, prompt, 6, rng.next()));
    const GroupBatch b = make_group_batch(prompt, rs, 1e-6);
    for (const auto& row : kl_k3(cur, ref, b)) {
      for (double x : row) {
        ++tokens;
        negative += x >= 0.0 && std::isfinite(x) ? 0 : 1;
      }
    }
    for (const auto& row : kl_k3(cur, cur, b)) {
      for (double x : row) self_max = std::max(self_max, std::abs(x));
    }
  }
  Outcome o;
  o.passed = negative == 0 && self_max <= 1e-12;
  o.detail = "1000 policy pairs, " + std::to_string(tokens) +
             " tokens: negative or non-finite k3=" + std::to_string(negative) +
             ", max |k3| at new = ref " + fmt("%.2e", self_max) + " (1e-12)";
  return o;
}

const char* const kCopyReduction = R"([task]
name = copy
vocab_size = 6
prompt_len = 2
max_completion_len = 3
task_seed = 1

[train]
group_size = 8
steps_per_iteration = 25
iterations = 2
beta = 0.04
context_order = 1

[run]
seeds = 11
)";

ExperimentConfig reduction_config(bool egsw) {
  RawConfig raw = parse_raw_config(kCopyReduction, "reduction");
  if (egsw) {
    raw.set("train", "algorithm", "grpo_egsw");
    raw.set("egsw", "alpha", "0");
    raw.set("egsw", "temperature", "1");
    raw.set("egsw", "force_uniform", "true");
    raw.set("egsw", "weight_rescale", "true");
  }
  return build_config(raw);
}

// Update records of a metrics file, header excluded.
std::string update_stream(const fs::path& p) {
  const auto lines = lines_of(p);
  std::string out;
  for (std::size_t i = 1; i < lines.size(); ++i) out += lines[i] + "\n";
  return out;
}

// 6. alpha = 0, forced uniform exponents and rescaling reproduce the GRPO
// update stream.
Outcome criterion_reduction(const fs::path& out) {
  const fs::path dir = out / "c6_reduction";
  const ExperimentConfig a = reduction_config(false);
  const ExperimentConfig b = reduction_config(true);
  const auto ra = run_experiment(a, (dir / "grpo").string(), nullptr);
  const auto rb = run_experiment(b, (dir / "egsw").string(), nullptr);
  const std::string name = metrics_file_name(11);
  const std::string sa = update_stream(dir / "grpo" / name);
  const std::string sb = update_stream(dir / "egsw" / name);
  const std::size_t records = lines_of(dir / "grpo" / name).size() - 1;
  Outcome o;
  o.passed = ra[0].error.empty() && rb[0].error.empty() && records == 50 && sa == sb;
  o.detail = "copy task, 50 updates, beta 0.04 on both sides: update stream " +
             std::string(sa == sb ? "byte-identical" : "DIFFERS") + " (" +
             std::to_string(sa.size()) + " bytes)";
  o.info.push_back("header records differ only in algorithm/egsw fields and are excluded");
  return o;
}

// 7. EGSW gradient norm never exceeds the all-ones-weight norm of the same
// batch on an equal-length run.
Outcome criterion_shrinkage() {
  Task task;
  task.kind = TaskKind::kCopy;
  task.vocab = {8, 7};
  task.prompt_len = 3;
  task.max_completion_len = 3;
  task.fixed_length = true;
  TrainConfig cfg;
  cfg.algorithm = Algorithm::kGrpoEgsw;
  cfg.steps_per_iteration = 200;
  cfg.context_order = 1;
  cfg.master_seed = 2026007;
  cfg.egsw.weight_rescale = false;
  int updates = 0, violations = 0;
  double worst = 0.0;
  TrainHooks hooks;
  hooks.on_update = [&](const UpdateContext& ctx) {
    std::vector<WeightTable> ones;
    for (const WeightTable& w : ctx.weights) {
      WeightTable one(w.rollouts(), w.steps());
      for (int i = 0; i < w.rollouts(); ++i) {
        for (int t = 0; t < w.steps(); ++t) {
          if (!w.alive(i, t)) continue;
          one.set_alive(i, t, true);
          ++one.live_count(t);
          one.weight(i, t) = 1.0;
        }
      }
      ones.push_back(std::move(one));
    }
    const double full = egsw_gradient(ctx.current, ctx.ref, ctx.batches, ones, cfg.beta).l2_norm();
    const double mine = ctx.gradient.l2_norm();
    ++updates;
    violations += mine <= full ? 0 : 1;
    if (full > 0.0) worst = std::max(worst, mine / full);
  };
  train(task, cfg, hooks);
  Outcome o;
  o.passed = updates == 200 && violations == 0;
  o.detail = std::to_string(updates) + " updates, violations=" + std::to_string(violations) +
             ", max EGSW/all-ones norm ratio " + fmt("%.4f", worst);
  return o;
}

const char* const kCopyLearning = R"([task]
name = copy
vocab_size = 8
prompt_len = 1
max_completion_len = 2
prompt_pool = 1
task_seed = 7

[train]
algorithm = grpo
group_size = 8
steps_per_iteration = 300
learning_rate = 0.01
policy = tabular_ngram
context_order = 0

[run]
seeds = 2026101, 2026102, 2026103, 2026104, 2026105, 2026106, 2026107, 2026108, 2026109, 2026110
)";

double window_mean(const TrainMetrics& m, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += m.records[i].mean_reward;
  return s / static_cast<double>(end - begin);
}

// 8. GRPO learns the copy task.
Outcome criterion_learning(const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = config_from(kCopyLearning, "copy_learning");
  const auto runs = run_experiment(cfg, (out / "c8_learning").string(), nullptr);
  const double secs = seconds_since(t0);
  int ok = 0;
  Outcome o;
  for (const SeedRun& r : runs) {
    const double first = window_mean(r.metrics, 0, 20);
    const double last = window_mean(r.metrics, 280, 300);
    ok += last - first >= 0.3 ? 1 : 0;
    o.info.push_back("seed " + std::to_string(r.summary.seed) + ": initial " +
                     fmt("%.3f", first) + " final " + fmt("%.3f", last) + " gain " +
                     fmt("%+.3f", last - first));
  }
  o.passed = ok >= 9 && secs < 120.0;
  o.detail = std::to_string(ok) + "/10 seeds gained >= 0.3 trailing-20 mean reward (need 9), runtime " +
             fmt("%.2f", secs) + " s (limit 120 s)";
  return o;
}

std::string treasure_config(bool egsw, std::uint64_t seed) {
  std::ostringstream os;
  os << "[task]\nname = sparse_treasure\nvocab_size = 8\nprompt_len = 2\n"
        "max_completion_len = 4\nsecret_len = 3\nprompt_pool = 1\n"
     << "task_seed = " << seed + 31000 << "\n"
     << "[train]\nalgorithm = " << (egsw ? "grpo_egsw" : "grpo")
     << "\ngroup_size = 8\nsteps_per_iteration = 2000\niterations = 1\n"
        "learning_rate = 0.01\noptimizer = adam\nbeta = 0.04\n"
        "policy = tabular_ngram\ncontext_order = 3\n"
        "[egsw]\nalpha = 0.3\ntemperature = 1\n"
        "[run]\nthreshold = 0.5\nthreshold_window = 20\n"
     << "seeds = " << seed << "\n";
  return os.str();
}

constexpr std::uint64_t kTreasureSeeds[] = {2026201, 2026202, 2026203, 2026204, 2026205,
                                            2026206, 2026207, 2026208, 2026209, 2026210};

std::vector<double> rewards_of(const TrainMetrics& m) {
  std::vector<double> r;
  for (const UpdateRecord& rec : m.records) r.push_back(rec.mean_reward);
  return r;
}

// 9. EGSW reaches the reward threshold no later than GRPO on sparse_treasure.
// Each seed draws its own secret from its task seed.
Outcome criterion_exploration(const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = out / "c9_exploration";
  fs::create_directories(dir);
  std::ofstream csv(dir / "compare.csv");
  csv << "seed,grpo_updates_to_threshold,egsw_updates_to_threshold,"
         "grpo_final_mean_reward,egsw_final_mean_reward,egsw_no_later\n";
  const double thresholds[] = {0.1, 0.2, 0.3, 0.5, 0.7, 0.9};
  int wins_at[6] = {0, 0, 0, 0, 0, 0};
  int wins = 0;
  bool errors = false;
  Outcome o;
  o.info.push_back("seed        secret  grpo@0.5  egsw@0.5  grpo_final  egsw_final");
  for (std::uint64_t seed : kTreasureSeeds) {
    const ExperimentConfig ga = config_from(treasure_config(false, seed), "treasure_grpo");
    const ExperimentConfig eb = config_from(treasure_config(true, seed), "treasure_egsw");
    const auto ra = run_experiment(ga, (dir / "grpo").string() + "/" + std::to_string(seed), nullptr);
    const auto rb = run_experiment(eb, (dir / "egsw").string() + "/" + std::to_string(seed), nullptr);
    errors = errors || !ra[0].error.empty() || !rb[0].error.empty();
    const RunSummary& sa = ra[0].summary;
    const RunSummary& sb = rb[0].summary;
    const int never = sa.updates + 1;
    const bool no_later = sb.updates_to_threshold &&
                          *sb.updates_to_threshold <= sa.updates_to_threshold.value_or(never);
    wins += no_later ? 1 : 0;
    for (int k = 0; k < 6; ++k) {
      const auto ua = updates_to_threshold(rewards_of(ra[0].metrics), thresholds[k], 20);
      const auto ub = updates_to_threshold(rewards_of(rb[0].metrics), thresholds[k], 20);
      wins_at[k] += ub && *ub <= ua.value_or(never) ? 1 : 0;
    }
    auto cell = [&](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("-"); };
    csv << seed << ',' << (sa.updates_to_threshold ? std::to_string(*sa.updates_to_threshold) : "")
        << ',' << (sb.updates_to_threshold ? std::to_string(*sb.updates_to_threshold) : "") << ','
        << sa.final_mean_reward << ',' << sb.final_mean_reward << ',' << (no_later ? 1 : 0) << '\n';
    std::string secret;
    for (Token t : ga.task.secret) secret += std::to_string(t);
    char row[160];
    std::snprintf(row, sizeof row, "%-10llu  %6s  %8s  %8s  %10.3f  %10.3f",
                  static_cast<unsigned long long>(seed), secret.c_str(),
                  cell(sa.updates_to_threshold).c_str(), cell(sb.updates_to_threshold).c_str(),
                  sa.final_mean_reward, sb.final_mean_reward);
    o.info.push_back(row);
  }
  const double secs = seconds_since(t0);
  std::ostringstream verdict;
  verdict << "verdict: egsw reached threshold 0.5 no later than grpo in " << wins << "/10 seeds";
  std::ofstream(dir / "verdict.txt") << verdict.str() << '\n';
  o.info.push_back(verdict.str());
  for (int k = 0; k < 6; ++k) {
    if (thresholds[k] == 0.5) continue;
    o.info.push_back("informational: threshold " + fmt("%.1f", thresholds[k]) +
                     ", egsw no later in " + std::to_string(wins_at[k]) + "/10");
  }
  o.passed = !errors && wins >= 7 && secs < 600.0;
  o.detail = "sparse_treasure |A|=8 |s|=3 K=8 2000 updates, alpha 0.3 P 1, threshold 0.5 (both arms): " +
             std::to_string(wins) + "/10 seeds EGSW no later (need 7), runtime " +
             fmt("%.1f", secs) + " s (limit 600 s)";
  return o;
}

// 10. Repeating acceptance runs reproduces their metrics byte for byte.
Outcome criterion_determinism(const fs::path& out) {
  const fs::path again = out / "c10_repeat";
  int compared = 0, differing = 0;
  auto compare_dirs = [&](const fs::path& a, const fs::path& b) {
    for (const auto& entry : fs::directory_iterator(a)) {
      if (entry.path().extension() != ".jsonl") continue;
      ++compared;
      differing += slurp(entry.path()) == slurp(b / entry.path().filename()) ? 0 : 1;
    }
  };
  run_experiment(reduction_config(false), (again / "c6_grpo").string(), nullptr);
  run_experiment(reduction_config(true), (again / "c6_egsw").string(), nullptr);
  compare_dirs(out / "c6_reduction" / "grpo", again / "c6_grpo");
  compare_dirs(out / "c6_reduction" / "egsw", again / "c6_egsw");
  run_experiment(config_from(kCopyLearning, "copy_learning"), (again / "c8").string(), nullptr);
  compare_dirs(out / "c8_learning", again / "c8");
  for (std::size_t i = 0; i < 2; ++i) {
    const std::uint64_t seed = kTreasureSeeds[i];
    for (bool egsw : {false, true}) {
      const std::string arm = egsw ? "egsw" : "grpo";
      const fs::path dir = again / ("c9_" + arm) / std::to_string(seed);
      run_experiment(config_from(treasure_config(egsw, seed), "treasure"), dir.string(), nullptr);
      compare_dirs(out / "c9_exploration" / arm / std::to_string(seed), dir);
    }
  }
  Outcome o;
  o.passed = compared == 2 + 10 + 4 && differing == 0;
  o.detail = std::to_string(compared) + " metrics files regenerated (criteria 6, 8 and two seeds of 9), " +
             std::to_string(differing) + " differ";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::remove_all(out);
  fs::create_directories(out);

  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> entries = {
      {1, "gradient correctness", criterion_gradients},
      {2, "weighting invariants", criterion_weighting},
      {3, "entropy correctness", criterion_entropy},
      {4, "advantage normalization", criterion_advantages},
      {5, "k3 estimator", criterion_kl},
      {6, "reduction identity", [&] { return criterion_reduction(out); }},
      {7, "gradient shrinkage", criterion_shrinkage},
      {8, "learning sanity", [&] { return criterion_learning(out); }},
      {9, "exploration benefit", [&] { return criterion_exploration(out); }},
      {10, "determinism", [&] { return criterion_determinism(out); }},
  };
  int passed = 0;
  for (const Entry& e : entries) {
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o.passed = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    passed += o.passed ? 1 : 0;
    std::printf("%s [%d] %s: %s\n", o.passed ? "PASS" : "FAIL", e.id, e.name, o.detail.c_str());
    for (const auto& line : o.info) std::printf("       %s\n", line.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d/%zu criteria passed\n", passed, entries.size());
  return passed == static_cast<int>(entries.size()) ? 0 : 1;
}
