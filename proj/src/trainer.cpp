#include "egsw/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "egsw/error.hpp"
#include "egsw/rng.hpp"

namespace egsw {

namespace {

// Visits every sampled token in rollout-major order, handing the callback
// the current-policy distribution and log(pi_ref / pi_theta) at that token,
// then accumulates coef * grad log pi scaled by 1 / (G K N_i).
template <typename CoefFn>
ParamGradient accumulate_tokens(const PolicyParams& current,
                                const PolicyParams& ref,
                                std::span<const GroupBatch> batches,
                                CoefFn&& coef_fn) {
  if (batches.empty()) throw InputError("gradient of an empty batch");
  ParamGradient grad(current.size());
  const double groups = static_cast<double>(batches.size());
  for (std::size_t g = 0; g < batches.size(); ++g) {
    const GroupBatch& batch = batches[g];
    const int k = batch.group_size();
    if (k == 0) throw InputError("group without rollouts");
    for (int i = 0; i < k; ++i) {
      const std::span<const Token> tokens(batch.rollouts[i].tokens);
      const double n = static_cast<double>(tokens.size());
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto prefix = tokens.first(t);
        const StepDistribution dist =
            step_distribution(current, batch.prompt, prefix);
        const StepDistribution ref_dist =
            step_distribution(ref, batch.prompt, prefix);
        const Token a = tokens[t];
        const double log_rho = ref_dist.log_probs[a] - dist.log_probs[a];
        const double coef = coef_fn(g, i, static_cast<int>(t),
                                    dist.log_probs[a], log_rho);
        const double scale = coef / (static_cast<double>(k) * n) / groups;
        accumulate_grad_log_prob(current, batch.prompt, prefix, dist, a, scale,
                                 grad.values());
      }
    }
  }
  return grad;
}

double kl_pull(double beta, double log_rho) {
  const double rho =
      std::exp(std::clamp(log_rho, -kLogRatioClamp, kLogRatioClamp));
  return beta * (rho - 1.0);
}

}  // namespace

std::string to_string(Algorithm a) {
  return a == Algorithm::kGrpo ? "grpo" : "grpo_egsw";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "grpo") return Algorithm::kGrpo;
  if (name == "grpo_egsw") return Algorithm::kGrpoEgsw;
  throw InputError("unknown algorithm '" + name + "'");
}

std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw InputError("unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  if (group_size < 2) throw InputError("group_size must be >= 2");
  if (prompts_per_step < 1) throw InputError("prompts_per_step must be >= 1");
  if (steps_per_iteration < 0) {
    throw InputError("steps_per_iteration must be >= 0");
  }
  if (iterations < 1) throw InputError("iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw InputError("invalid Adam coefficients");
  }
  if (!(beta >= 0.0)) throw InputError("beta must be >= 0");
  if (!(eps_clip > 0.0)) throw InputError("eps_clip must be > 0");
  if (!(sigma_min > 0.0)) throw InputError("sigma_min must be > 0");
  if (max_completion_len < 0) {
    throw InputError("max_completion_len must be >= 0");
  }
  if (context_order < 0) throw InputError("context_order must be >= 0");
  if (!(init_scale >= 0.0)) throw InputError("init_scale must be >= 0");
  egsw.validate();
}

ParamGradient egsw_gradient(const PolicyParams& current,
                            const PolicyParams& ref,
                            std::span<const GroupBatch> batches,
                            std::span<const WeightTable> weights,
                            double beta) {
  if (weights.size() != batches.size()) {
    throw InputError("one weight table per group required");
  }
  for (std::size_t g = 0; g < batches.size(); ++g) {
    const GroupBatch& b = batches[g];
    if (weights[g].rollouts() != b.group_size()) {
      throw InputError("weight table rollout count mismatch");
    }
    int longest = 0;
    for (const Rollout& r : b.rollouts) longest = std::max(longest, r.length());
    if (weights[g].steps() != longest) {
      throw InputError("weight table step count mismatch");
    }
  }
  return accumulate_tokens(
      current, ref, batches,
      [&](std::size_t g, int i, int t, double, double log_rho) {
        const double w = weights[g].weight(i, t);
        return w * (batches[g].advantages[i][t] + kl_pull(beta, log_rho));
      });
}

ParamGradient grpo_gradient(const PolicyParams& current,
                            const PolicyParams& old, const PolicyParams& ref,
                            std::span<const GroupBatch> batches,
                            double eps_clip, double beta) {
  if (!(eps_clip > 0.0)) throw InputError("eps_clip must be > 0");
  std::vector<TokenTable> old_lp;
  old_lp.reserve(batches.size());
  for (const GroupBatch& b : batches) old_lp.push_back(token_log_probs(old, b));
  return accumulate_tokens(
      current, ref, batches,
      [&](std::size_t g, int i, int t, double log_pi, double log_rho) {
        const double a = batches[g].advantages[i][t];
        const double r = std::exp(log_pi - old_lp[g][i][t]);
        const double clipped = std::clamp(r, 1.0 - eps_clip, 1.0 + eps_clip);
        const double surrogate = r * a <= clipped * a ? r * a : 0.0;
        return surrogate + kl_pull(beta, log_rho);
      });
}

PolicyParams apply_update(const PolicyParams& params,
                          const ParamGradient& gradient,
                          const TrainConfig& cfg, OptimizerState& state) {
  if (gradient.size() != params.size()) {
    throw InputError("gradient shape does not match parameters");
  }
  if (!gradient.all_finite()) {
    throw TrainingError("non-finite gradient at optimizer step " +
                        std::to_string(state.steps + 1));
  }
  PolicyParams next = params;
  std::vector<double>& w = next.weights();
  if (cfg.optimizer == OptimizerKind::kSgd) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] += cfg.learning_rate * gradient[j];
    }
    ++state.steps;
  } else {
    if (state.first_moment.size() != w.size()) {
      state.first_moment.assign(w.size(), 0.0);
      state.second_moment.assign(w.size(), 0.0);
      state.steps = 0;
    }
    ++state.steps;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.steps));
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = gradient[j];
      state.first_moment[j] = b1 * state.first_moment[j] + (1.0 - b1) * g;
      state.second_moment[j] = b2 * state.second_moment[j] + (1.0 - b2) * g * g;
      const double m_hat = state.first_moment[j] / c1;
      const double v_hat = state.second_moment[j] / c2;
      w[j] += cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
  for (double x : w) {
    if (!std::isfinite(x)) {
      throw TrainingError("non-finite parameter after optimizer step " +
                          std::to_string(state.steps));
    }
  }
  return next;
}

PolicyParams initial_policy(const Task& task, const TrainConfig& cfg) {
  PolicyParams params = cfg.policy == PolicyKind::kTabularNgram
                            ? PolicyParams::tabular(task.vocab,
                                                    cfg.context_order)
                            : PolicyParams::linear(task.vocab);
  if (cfg.init_scale > 0.0) {
    Rng rng(derive_seed(cfg.master_seed, {3}));
    for (double& w : params.weights()) w = cfg.init_scale * rng.normal();
  }
  return params;
}

TrainResult train(const Task& task, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  task.validate();
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const int max_len = cfg.max_completion_len > 0 ? cfg.max_completion_len
                                                 : task.max_completion_len;
  const bool use_egsw = cfg.algorithm == Algorithm::kGrpoEgsw;

  PolicyParams params = initial_policy(task, cfg);
  OptimizerState opt;
  TrainMetrics metrics;
  int update = 0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const PolicyParams ref = params;
    for (int step = 0; step < cfg.steps_per_iteration; ++step) {
      const PolicyParams old = params;
      const auto u = static_cast<std::uint64_t>(update);

      std::vector<GroupBatch> batches;
      batches.reserve(cfg.prompts_per_step);
      for (int j = 0; j < cfg.prompts_per_step; ++j) {
        const auto pj = static_cast<std::uint64_t>(j);
        TokenSeq prompt =
            generate_prompt(task, derive_seed(cfg.master_seed, {1, u, pj}));
        std::vector<Rollout> rollouts;
        rollouts.reserve(cfg.group_size);
        for (int i = 0; i < cfg.group_size; ++i) {
          const auto seed = derive_seed(
              cfg.master_seed, {2, u, pj, static_cast<std::uint64_t>(i)});
          Rollout r =
              sample_rollout(old, prompt, max_len, seed, !task.fixed_length);
          r.reward = score(task, prompt, r.tokens);
          rollouts.push_back(std::move(r));
        }
        batches.push_back(
            make_group_batch(std::move(prompt), std::move(rollouts),
                             cfg.sigma_min));
      }

      std::vector<WeightTable> weights;
      if (use_egsw) {
        weights.reserve(batches.size());
        for (const GroupBatch& b : batches) {
          weights.push_back(build_weight_table(b, cfg.egsw, task.vocab.size));
        }
      }
      const ParamGradient grad =
          use_egsw ? egsw_gradient(params, ref, batches, weights, cfg.beta)
                   : grpo_gradient(params, old, ref, batches, cfg.eps_clip,
                                   cfg.beta);

      UpdateRecord rec;
      rec.update = update + 1;
      rec.iteration = iter;
      rec.step = step;
      double rollouts_seen = 0.0;
      double tokens_seen = 0.0;
      for (const GroupBatch& b : batches) {
        const TokenTable kl = kl_k3(params, ref, b);
        for (int i = 0; i < b.group_size(); ++i) {
          const Rollout& r = b.rollouts[i];
          rec.mean_reward += r.reward;
          rec.mean_abs_advantage += std::abs(b.advantages[i].front());
          rec.mean_length += r.length();
          rollouts_seen += 1.0;
          for (int t = 0; t < r.length(); ++t) {
            rec.mean_entropy += r.entropies[t];
            rec.mean_kl += kl[i][t];
            tokens_seen += 1.0;
          }
        }
      }
      rec.mean_reward /= rollouts_seen;
      rec.mean_abs_advantage /= rollouts_seen;
      rec.mean_length /= rollouts_seen;
      rec.mean_entropy /= tokens_seen;
      rec.mean_kl /= tokens_seen;
      rec.grad_norm = grad.l2_norm();
      rec.wall_clock_s = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started)
                             .count();

      if (hooks.on_update) {
        hooks.on_update(
            UpdateContext{params, old, ref, batches, weights, grad, rec});
      }
      params = apply_update(params, grad, cfg, opt);
      metrics.records.push_back(rec);
      if (hooks.on_record) hooks.on_record(rec);
      ++update;
    }
  }
  return TrainResult{std::move(params), std::move(metrics)};
}

}  // namespace egsw
