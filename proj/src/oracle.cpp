#include "egsw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egsw/error.hpp"
#include "egsw/rng.hpp"
#include "egsw/trainer.hpp"

namespace egsw::oracle {

namespace {

using Real = long double;

std::vector<Token> joined(std::span<const Token> prompt,
                          std::span<const Token> prefix) {
  std::vector<Token> seq(prompt.begin(), prompt.end());
  seq.insert(seq.end(), prefix.begin(), prefix.end());
  return seq;
}

// Rows of W that are active at this context, each with feature value 1.
std::vector<int> active_rows(const PolicyParams& params,
                             std::span<const Token> prompt,
                             std::span<const Token> prefix) {
  const int v = params.vocab().size;
  const std::vector<Token> seq = joined(prompt, prefix);
  if (params.kind() == PolicyKind::kTabularNgram) {
    const int c = params.context_order();
    int row = 0;
    int place = 1;
    // Walk backwards: most recent token is the least significant digit.
    for (int back = 1; back <= c; ++back) {
      const int pos = static_cast<int>(seq.size()) - back;
      const Token tok = pos >= 0 ? seq[pos] : params.vocab().eos;
      row += tok * place;
      place *= v;
    }
    return {row};
  }
  const int t = static_cast<int>(prefix.size());
  const int len = static_cast<int>(prompt.size());
  const Token last = seq.empty() ? params.vocab().eos : seq.back();
  const int same = t < len ? prompt[t] : v;
  const int mirror = t < len ? prompt[len - 1 - t] : v;
  return {0, 1 + last, 1 + v + same, 1 + v + (v + 1) + mirror};
}

std::vector<Real> naive_probs(const PolicyParams& params,
                              std::span<const Token> prompt,
                              std::span<const Token> prefix) {
  const int v = params.vocab().size;
  std::vector<Real> z(v, 0.0L);
  for (int row : active_rows(params, prompt, prefix)) {
    for (int a = 0; a < v; ++a) z[a] += params.at(row, a);
  }
  Real total = 0.0L;
  for (Real& x : z) {
    x = std::exp(x);
    total += x;
  }
  for (Real& x : z) x /= total;
  return z;
}

Real naive_k3(Real p_ref, Real p_cur) {
  const Real ratio = p_ref / p_cur;
  return ratio - std::log(ratio) - 1.0L;
}

// d log pi(a) / dW = sum over active rows of e_row (onehot(a) - p).
void add_naive_score(const PolicyParams& params, std::span<const Token> prompt,
                     std::span<const Token> prefix, Token a, Real coef,
                     std::vector<Real>& out) {
  const int v = params.vocab().size;
  const std::vector<Real> p = naive_probs(params, prompt, prefix);
  for (int row : active_rows(params, prompt, prefix)) {
    for (int b = 0; b < v; ++b) {
      out[static_cast<std::size_t>(row) * v + b] +=
          coef * ((b == a ? 1.0L : 0.0L) - p[b]);
    }
  }
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

ParamGradient finite_diff_gradient(const Objective& objective,
                                   const PolicyParams& params, double h) {
  if (!(h > 0.0)) throw OracleError("finite difference step must be > 0");
  PolicyParams probe = params;
  ParamGradient grad(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double saved = probe.weights()[j];
    probe.weights()[j] = saved + h;
    const double up = objective(probe);
    probe.weights()[j] = saved - h;
    const double down = objective(probe);
    probe.weights()[j] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleError("objective not finite at coordinate " +
                        std::to_string(j));
    }
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

FiniteDiffReport check_gradient(const std::string& name,
                                const Objective& objective,
                                const PolicyParams& params,
                                const ParamGradient& analytic, double h,
                                std::size_t max_coords,
                                std::uint64_t subset_seed) {
  if (analytic.size() != params.size()) {
    throw OracleError("analytic gradient has the wrong size");
  }
  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  FiniteDiffReport rep;
  rep.name = name;
  rep.h = h;
  if (coords.size() > max_coords) {
    Rng rng(subset_seed);
    for (std::size_t j = 0; j < max_coords; ++j) {  // partial Fisher-Yates
      std::swap(coords[j], coords[j + rng.below(coords.size() - j)]);
    }
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
    rep.subset = true;
    rep.subset_seed = subset_seed;
  }
  PolicyParams probe = params;
  double sum = 0.0;
  for (std::size_t j : coords) {
    const double saved = probe.weights()[j];
    probe.weights()[j] = saved + h;
    const double up = objective(probe);
    probe.weights()[j] = saved - h;
    const double down = objective(probe);
    probe.weights()[j] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleError("objective not finite at coordinate " +
                        std::to_string(j));
    }
    const double err = relative_error(analytic[j], (up - down) / (2.0 * h));
    sum += err;
    if (err > rep.max_rel_error || rep.coordinates == 0) {
      rep.max_rel_error = err;
      rep.worst_index = j;
    }
    ++rep.coordinates;
  }
  rep.mean_rel_error = coords.empty() ? 0.0 : sum / coords.size();
  return rep;
}

double literal_log_prob(const PolicyParams& params,
                        std::span<const Token> prompt,
                        std::span<const Token> prefix, Token action) {
  return static_cast<double>(
      std::log(naive_probs(params, prompt, prefix)[action]));
}

std::vector<double> literal_probs(const PolicyParams& params,
                                  std::span<const Token> prompt,
                                  std::span<const Token> prefix) {
  const std::vector<Real> p = naive_probs(params, prompt, prefix);
  return {p.begin(), p.end()};
}

double literal_entropy(std::span<const double> probs) {
  Real h = 0.0L;
  for (double p : probs) {
    if (p > 0.0) h -= static_cast<Real>(p) * std::log(static_cast<Real>(p));
  }
  return static_cast<double>(h);
}

std::vector<double> literal_advantages(std::span<const double> rewards,
                                       double sigma_min) {
  const Real k = static_cast<Real>(rewards.size());
  Real mu = 0.0L;
  for (double r : rewards) mu += r;
  mu /= k;
  Real var = 0.0L;
  for (double r : rewards) var += (r - mu) * (r - mu);
  const Real sigma = std::sqrt(var / k);
  std::vector<double> adv;
  for (double r : rewards) {
    adv.push_back(sigma < sigma_min ? 0.0
                                    : static_cast<double>((r - mu) / sigma));
  }
  return adv;
}

double literal_grpo_objective(const PolicyParams& current,
                              const PolicyParams& old, const PolicyParams& ref,
                              std::span<const GroupBatch> batches,
                              double eps_clip, double beta) {
  Real outer = 0.0L;
  for (const GroupBatch& b : batches) {
    const std::vector<double> adv = literal_advantages(b.rewards, 1e-6);
    Real group = 0.0L;
    for (std::size_t i = 0; i < b.rollouts.size(); ++i) {
      const TokenSeq& a = b.rollouts[i].tokens;
      Real inner = 0.0L;
      for (std::size_t t = 0; t < a.size(); ++t) {
        const std::span<const Token> prefix(a.data(), t);
        const Real p_cur = naive_probs(current, b.prompt, prefix)[a[t]];
        const Real p_old = naive_probs(old, b.prompt, prefix)[a[t]];
        const Real p_ref = naive_probs(ref, b.prompt, prefix)[a[t]];
        const Real r = p_cur / p_old;
        const Real lo = 1.0L - eps_clip;
        const Real hi = 1.0L + eps_clip;
        const Real r_clip = r < lo ? lo : (r > hi ? hi : r);
        const Real unclipped = r * adv[i];
        const Real clipped = r_clip * adv[i];
        inner += std::min(unclipped, clipped) - beta * naive_k3(p_ref, p_cur);
      }
      group += inner / static_cast<Real>(a.size());
    }
    outer += group / static_cast<Real>(b.rollouts.size());
  }
  return static_cast<double>(outer / static_cast<Real>(batches.size()));
}

double literal_raw_weight(double advantage, double entropy, double alpha,
                          double temperature, bool normalized,
                          int vocab_size) {
  const Real h = normalized ? entropy / std::log(static_cast<Real>(vocab_size))
                            : static_cast<Real>(entropy);
  return static_cast<double>(
      std::exp((static_cast<Real>(advantage) + alpha * h) / temperature));
}

std::vector<std::vector<double>> literal_weight_table(const GroupBatch& batch,
                                                      const EgswConfig& cfg,
                                                      int vocab_size) {
  const std::vector<double> adv = literal_advantages(batch.rewards, 1e-6);
  std::size_t longest = 0;
  for (const Rollout& r : batch.rollouts) {
    longest = std::max(longest, r.tokens.size());
  }
  const bool normalized = cfg.entropy_mode == EntropyMode::kNormalized;
  std::vector<std::vector<double>> w(batch.rollouts.size(),
                                     std::vector<double>(longest, 0.0));
  for (std::size_t t = 0; t < longest; ++t) {
    Real denom = 0.0L;
    std::vector<Real> raw(batch.rollouts.size(), 0.0L);
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
      if (t >= batch.rollouts[i].tokens.size()) continue;
      raw[i] = cfg.force_uniform
                   ? 1.0L
                   : literal_raw_weight(adv[i], batch.rollouts[i].entropies[t],
                                        cfg.alpha, cfg.temperature, normalized,
                                        vocab_size);
      denom += raw[i];
    }
    Real live = 0.0L;
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
      live += t < batch.rollouts[i].tokens.size() ? 1.0L : 0.0L;
    }
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
      if (t >= batch.rollouts[i].tokens.size()) continue;
      Real wi = raw[i] / denom;
      if (cfg.weight_rescale) wi *= live;
      w[i][t] = static_cast<double>(wi);
    }
  }
  return w;
}

double egsw_surrogate(const PolicyParams& current, const PolicyParams& ref,
                      std::span<const GroupBatch> batches,
                      std::span<const WeightTable> weights, double beta) {
  Real outer = 0.0L;
  for (std::size_t g = 0; g < batches.size(); ++g) {
    const GroupBatch& b = batches[g];
    const std::vector<double> adv = literal_advantages(b.rewards, 1e-6);
    Real group = 0.0L;
    for (std::size_t i = 0; i < b.rollouts.size(); ++i) {
      const TokenSeq& a = b.rollouts[i].tokens;
      Real inner = 0.0L;
      for (std::size_t t = 0; t < a.size(); ++t) {
        const std::span<const Token> prefix(a.data(), t);
        const Real p_cur = naive_probs(current, b.prompt, prefix)[a[t]];
        const Real p_ref = naive_probs(ref, b.prompt, prefix)[a[t]];
        const Real w = weights[g].weight(static_cast<int>(i),
                                         static_cast<int>(t));
        inner += w * (adv[i] * std::log(p_cur) - beta * naive_k3(p_ref, p_cur));
      }
      group += inner / static_cast<Real>(a.size());
    }
    outer += group / static_cast<Real>(b.rollouts.size());
  }
  return static_cast<double>(outer / static_cast<Real>(batches.size()));
}

ParamGradient literal_egsw_gradient(const PolicyParams& current,
                                    const PolicyParams& ref,
                                    std::span<const GroupBatch> batches,
                                    std::span<const WeightTable> weights,
                                    double beta) {
  std::vector<Real> acc(current.size(), 0.0L);
  const Real groups = static_cast<Real>(batches.size());
  for (std::size_t g = 0; g < batches.size(); ++g) {
    const GroupBatch& b = batches[g];
    const std::vector<double> adv = literal_advantages(b.rewards, 1e-6);
    const Real k = static_cast<Real>(b.rollouts.size());
    for (std::size_t i = 0; i < b.rollouts.size(); ++i) {
      const TokenSeq& a = b.rollouts[i].tokens;
      const Real n = static_cast<Real>(a.size());
      for (std::size_t t = 0; t < a.size(); ++t) {
        const std::span<const Token> prefix(a.data(), t);
        const Real p_cur = naive_probs(current, b.prompt, prefix)[a[t]];
        const Real p_ref = naive_probs(ref, b.prompt, prefix)[a[t]];
        const Real w = weights[g].weight(static_cast<int>(i),
                                         static_cast<int>(t));
        const Real bracket = adv[i] + beta * (p_ref / p_cur - 1.0L);
        add_naive_score(current, b.prompt, prefix, a[t],
                        w * bracket / (groups * k * n), acc);
      }
    }
  }
  return ParamGradient(std::vector<double>(acc.begin(), acc.end()));
}

Expectations enumerate_expectations(const PolicyParams& params,
                                    const Task& task, const TokenSeq& prompt,
                                    int max_len) {
  if (max_len < 1 || max_len > 8) {
    throw InputError("enumeration needs 1 <= max_len <= 8");
  }
  const double leaves = std::pow(static_cast<double>(params.vocab().size),
                                 static_cast<double>(max_len));
  if (leaves > 1e6) throw InputError("enumeration exceeds |A|^max_len <= 1e6");
  Expectations out;
  const Token eos = params.vocab().eos;
  const bool stop_at_eos = !task.fixed_length;
  TokenSeq prefix;
  std::function<void(Real)> walk = [&](Real path_p) {
    const std::vector<Real> p = naive_probs(params, prompt, prefix);
    const std::vector<double> pd(p.begin(), p.end());
    out.steps.push_back({prefix, static_cast<double>(path_p),
                         literal_entropy(pd)});
    for (int a = 0; a < params.vocab().size; ++a) {
      if (p[a] <= 0.0L) continue;
      const Real q = path_p * p[a];
      prefix.push_back(a);
      if ((stop_at_eos && a == eos) ||
          static_cast<int>(prefix.size()) == max_len) {
        out.expected_reward += static_cast<double>(q) *
                               score(task, prompt, prefix);
        out.expected_length += static_cast<double>(q) * prefix.size();
      } else {
        walk(q);
      }
      prefix.pop_back();
    }
  };
  walk(1.0L);
  return out;
}

GradcheckInstance make_gradcheck_instance(std::uint64_t seed,
                                          const GradcheckOptions& opts) {
  Rng rng(derive_seed(seed, {0x6c}));
  Vocab vocab;
  vocab.size = 2 + static_cast<int>(rng.below(opts.max_vocab - 1));
  vocab.eos = vocab.size - 1;

  const std::uint64_t family = rng.below(4);
  PolicyParams base = family < 3 ? PolicyParams::tabular(
                                       vocab, static_cast<int>(family))
                                 : PolicyParams::linear(vocab);
  for (double& w : base.weights()) w = rng.normal();

  auto perturbed = [&](const PolicyParams& p, double scale) {
    PolicyParams q = p;
    for (double& w : q.weights()) w += scale * rng.normal();
    return q;
  };

  GradcheckInstance inst{base, base, perturbed(base, 0.3), {}, {}, {}, 0.2,
                         0.5 * rng.uniform()};
  inst.egsw.alpha = rng.uniform();
  inst.egsw.temperature = 0.5 + 1.5 * rng.uniform();
  inst.egsw.entropy_mode =
      rng.below(2) == 0 ? EntropyMode::kRaw : EntropyMode::kNormalized;
  inst.egsw.weight_rescale = rng.below(2) == 1;

  const int groups = 1 + static_cast<int>(rng.below(2));
  for (int g = 0; g < groups; ++g) {
    TokenSeq prompt(1 + rng.below(3));
    for (Token& t : prompt) t = static_cast<Token>(rng.below(vocab.size - 1));
    const int k = 2 + static_cast<int>(rng.below(opts.max_group - 1));
    std::vector<Rollout> rollouts;
    for (int i = 0; i < k; ++i) {
      const int len = 1 + static_cast<int>(rng.below(opts.max_len));
      Rollout r = sample_rollout(base, prompt, len, mix64(rng.below(1u << 30)));
      r.reward = rng.uniform();
      rollouts.push_back(std::move(r));
    }
    inst.batches.push_back(make_group_batch(prompt, std::move(rollouts), 1e-6));
  }

  // The old snapshot differs from the current policy so that ratios spread
  // across the clip band; redraw while any ratio sits on a kink.
  for (int attempt = 0;; ++attempt) {
    inst.old = perturbed(base, 0.3);
    bool near_kink = false;
    for (const GroupBatch& b : inst.batches) {
      for (const auto& row : likelihood_ratios(inst.current, inst.old, b).values) {
        for (double r : row) {
          near_kink |= std::abs(r - (1.0 - inst.eps_clip)) < 1e-3 ||
                       std::abs(r - (1.0 + inst.eps_clip)) < 1e-3;
        }
      }
    }
    if (!near_kink) break;
    if (attempt > 100) throw OracleError("could not place ratios off the kinks");
  }
  for (const GroupBatch& b : inst.batches) {
    inst.weights.push_back(build_weight_table(b, inst.egsw, vocab.size));
  }
  return inst;
}

namespace {

struct Aggregate {
  CheckResult result;
  double sum_mean = 0.0;
  int count = 0;

  void add(const FiniteDiffReport& rep, int instance) {
    if (count == 0 || rep.max_rel_error > result.report.max_rel_error) {
      result.report = rep;
      result.worst_instance = instance;
    }
    sum_mean += rep.mean_rel_error;
    ++count;
  }

  CheckResult finish() {
    result.report.name = result.name;
    result.report.mean_rel_error = count ? sum_mean / count : 0.0;
    result.passed = result.report.max_rel_error < result.tolerance;
    return result;
  }
};

FiniteDiffReport compare_exact(const std::vector<double>& engine,
                               const std::vector<double>& literal) {
  FiniteDiffReport rep;
  double sum = 0.0;
  for (std::size_t j = 0; j < engine.size(); ++j) {
    const double err = relative_error(engine[j], literal[j]);
    sum += err;
    if (err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst_index = j;
    }
  }
  rep.coordinates = engine.size();
  rep.mean_rel_error = engine.empty() ? 0.0 : sum / engine.size();
  return rep;
}

void corrupt_first(std::vector<double>& v) {
  if (!v.empty()) v[0] += 1e-2 * (1.0 + std::abs(v[0]));
}

}  // namespace

std::vector<CheckResult> run_gradcheck_suite(const GradcheckOptions& opts) {
  if (opts.instances < 1) throw OracleError("gradcheck needs >= 1 instance");
  if (opts.max_vocab < 2 || opts.max_group < 2 || opts.max_len < 1) {
    throw OracleError("gradcheck instance limits too small");
  }
  auto make = [&](const std::string& name, double tol) {
    Aggregate a;
    a.result.name = name;
    a.result.tolerance = tol;
    return a;
  };
  Aggregate glp = make("grad_log_prob", opts.fd_tolerance);
  Aggregate egsw_fd = make("egsw_gradient", opts.fd_tolerance);
  Aggregate egsw_lit = make("egsw_gradient_transcription", opts.exact_tolerance);
  Aggregate grpo_fd = make("grpo_gradient", opts.fd_tolerance);
  Aggregate grpo_obj = make("grpo_objective", opts.exact_tolerance);
  Aggregate raw = make("raw_weight", opts.exact_tolerance);
  Aggregate table = make("weight_table", opts.exact_tolerance);
  const bool bad = !opts.corrupt.empty();
  if (bad) {
    static const char* const kHookable[] = {"grad_log_prob", "egsw_gradient",
                                            "grpo_gradient", "grpo_objective",
                                            "raw_weight", "weight_table"};
    if (std::find(std::begin(kHookable), std::end(kHookable), opts.corrupt) ==
        std::end(kHookable)) {
      throw OracleError("unknown corruption target '" + opts.corrupt + "'");
    }
  }

  for (int n = 0; n < opts.instances; ++n) {
    const std::uint64_t seed = derive_seed(opts.seed, {static_cast<unsigned>(n)});
    const GradcheckInstance inst = make_gradcheck_instance(seed, opts);
    const PolicyParams& cur = inst.current;
    const GroupBatch& first = inst.batches.front();
    const int vocab = cur.vocab().size;

    {
      Rng rng(derive_seed(seed, {0x91}));
      const TokenSeq& toks = first.rollouts.front().tokens;
      const std::size_t t = rng.below(toks.size());
      const std::span<const Token> prefix(toks.data(), t);
      const Token action = static_cast<Token>(rng.below(vocab));
      ParamGradient g = grad_log_prob(cur, first.prompt, prefix, action);
      if (bad && opts.corrupt == "grad_log_prob") corrupt_first(g.values());
      glp.add(check_gradient(
                  "grad_log_prob",
                  [&](const PolicyParams& p) {
                    return literal_log_prob(p, first.prompt, prefix, action);
                  },
                  cur, g, opts.h),
              n);
    }
    {
      ParamGradient g =
          egsw_gradient(cur, inst.ref, inst.batches, inst.weights, inst.beta);
      if (bad && opts.corrupt == "egsw_gradient") corrupt_first(g.values());
      egsw_fd.add(check_gradient(
                      "egsw_gradient",
                      [&](const PolicyParams& p) {
                        return egsw_surrogate(p, inst.ref, inst.batches,
                                              inst.weights, inst.beta);
                      },
                      cur, g, opts.h),
                  n);
      const ParamGradient lit = literal_egsw_gradient(
          cur, inst.ref, inst.batches, inst.weights, inst.beta);
      egsw_lit.add(compare_exact(g.values(), lit.values()), n);
    }
    {
      ParamGradient g = grpo_gradient(cur, inst.old, inst.ref, inst.batches,
                                      inst.eps_clip, inst.beta);
      if (bad && opts.corrupt == "grpo_gradient") corrupt_first(g.values());
      grpo_fd.add(check_gradient(
                      "grpo_gradient",
                      [&](const PolicyParams& p) {
                        return literal_grpo_objective(p, inst.old, inst.ref,
                                                      inst.batches,
                                                      inst.eps_clip, inst.beta);
                      },
                      cur, g, opts.h),
                  n);
      std::vector<double> engine_obj{grpo_objective(
          cur, inst.old, inst.ref, inst.batches, inst.eps_clip, inst.beta)};
      if (bad && opts.corrupt == "grpo_objective") corrupt_first(engine_obj);
      grpo_obj.add(compare_exact(engine_obj,
                                 {literal_grpo_objective(
                                     cur, inst.old, inst.ref, inst.batches,
                                     inst.eps_clip, inst.beta)}),
                   n);
    }
    {
      Rng rng(derive_seed(seed, {0x77}));
      std::vector<double> engine;
      std::vector<double> literal;
      for (int j = 0; j < 4; ++j) {
        const double a = 4.0 * rng.uniform() - 2.0;
        const double h = std::log(static_cast<double>(vocab)) * rng.uniform();
        engine.push_back(raw_weight(a, h, inst.egsw, vocab));
        literal.push_back(literal_raw_weight(
            a, h, inst.egsw.alpha, inst.egsw.temperature,
            inst.egsw.entropy_mode == EntropyMode::kNormalized, vocab));
      }
      if (bad && opts.corrupt == "raw_weight") corrupt_first(engine);
      raw.add(compare_exact(engine, literal), n);
    }
    for (std::size_t g = 0; g < inst.batches.size(); ++g) {
      const auto lit = literal_weight_table(inst.batches[g], inst.egsw, vocab);
      std::vector<double> engine;
      std::vector<double> literal;
      for (int i = 0; i < inst.weights[g].rollouts(); ++i) {
        for (int t = 0; t < inst.weights[g].steps(); ++t) {
          engine.push_back(inst.weights[g].weight(i, t));
          literal.push_back(lit[i][t]);
        }
      }
      if (bad && opts.corrupt == "weight_table") corrupt_first(engine);
      table.add(compare_exact(engine, literal), n);
    }
  }
  return {glp.finish(),      egsw_fd.finish(), egsw_lit.finish(),
          grpo_fd.finish(),  grpo_obj.finish(), raw.finish(),
          table.finish()};
}

}  // namespace egsw::oracle
