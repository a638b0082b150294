#include "egsw/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "egsw/error.hpp"

namespace egsw {

namespace {

struct Moments {
  double mean;
  double std;
};

Moments population_moments(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

}  // namespace

std::vector<double> normalize_advantages(std::span<const double> rewards,
                                         double sigma_min) {
  if (rewards.size() < 2) {
    throw InputError("advantage normalization needs a group of K >= 2");
  }
  if (!(sigma_min > 0.0)) throw InputError("sigma_min must be > 0");
  const Moments m = population_moments(rewards);
  std::vector<double> adv(rewards.size(), 0.0);
  if (m.std < sigma_min) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = (rewards[i] - m.mean) / m.std;
  }
  return adv;
}

GroupBatch make_group_batch(TokenSeq prompt, std::vector<Rollout> rollouts,
                            double sigma_min) {
  GroupBatch batch;
  batch.prompt = std::move(prompt);
  batch.rollouts = std::move(rollouts);
  for (const Rollout& r : batch.rollouts) {
    if (r.tokens.empty()) throw InputError("rollout without tokens");
    batch.rewards.push_back(r.reward);
  }
  const std::vector<double> adv =
      normalize_advantages(batch.rewards, sigma_min);
  const Moments m = population_moments(batch.rewards);
  batch.mu = m.mean;
  batch.sigma = m.std;
  for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
    batch.advantages.emplace_back(batch.rollouts[i].tokens.size(), adv[i]);
  }
  return batch;
}

TokenTable token_log_probs(const PolicyParams& params,
                           const GroupBatch& batch) {
  TokenTable out;
  out.reserve(batch.rollouts.size());
  for (const Rollout& r : batch.rollouts) {
    const std::span<const Token> tokens(r.tokens);
    std::vector<double> row;
    row.reserve(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const StepDistribution d =
          step_distribution(params, batch.prompt, tokens.first(t));
      row.push_back(d.log_probs[tokens[t]]);
    }
    out.push_back(std::move(row));
  }
  return out;
}

RatioTable likelihood_ratios(const PolicyParams& current,
                             const PolicyParams& old,
                             const GroupBatch& batch) {
  const TokenTable lp_new = token_log_probs(current, batch);
  const TokenTable lp_old = token_log_probs(old, batch);
  RatioTable ratios;
  ratios.values.resize(lp_new.size());
  for (std::size_t i = 0; i < lp_new.size(); ++i) {
    for (std::size_t t = 0; t < lp_new[i].size(); ++t) {
      ratios.values[i].push_back(std::exp(lp_new[i][t] - lp_old[i][t]));
    }
  }
  return ratios;
}

double k3_from_log_ratio(double log_rho) {
  const double clamped = std::clamp(log_rho, -kLogRatioClamp, kLogRatioClamp);
  // expm1 keeps the estimator accurate (and >= 0) near rho = 1.
  return std::max(std::expm1(clamped) - clamped, 0.0);
}

TokenTable kl_k3(const PolicyParams& current, const PolicyParams& ref,
                 const GroupBatch& batch) {
  const TokenTable lp_cur = token_log_probs(current, batch);
  const TokenTable lp_ref = token_log_probs(ref, batch);
  TokenTable kl(lp_cur.size());
  for (std::size_t i = 0; i < lp_cur.size(); ++i) {
    for (std::size_t t = 0; t < lp_cur[i].size(); ++t) {
      kl[i].push_back(k3_from_log_ratio(lp_ref[i][t] - lp_cur[i][t]));
    }
  }
  return kl;
}

double grpo_objective(const PolicyParams& current, const PolicyParams& old,
                      const PolicyParams& ref,
                      std::span<const GroupBatch> batches, double eps_clip,
                      double beta) {
  if (batches.empty()) throw InputError("grpo_objective of an empty batch");
  if (!(eps_clip > 0.0)) throw InputError("eps_clip must be > 0");
  if (beta < 0.0) throw InputError("beta must be >= 0");
  double total = 0.0;
  for (const GroupBatch& batch : batches) {
    if (batch.rollouts.empty()) throw InputError("group without rollouts");
    const RatioTable ratios = likelihood_ratios(current, old, batch);
    const TokenTable kl = kl_k3(current, ref, batch);
    double group_sum = 0.0;
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
      const std::size_t n = batch.rollouts[i].tokens.size();
      double rollout_sum = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double r = ratios.values[i][t];
        const double a = batch.advantages[i][t];
        const double clipped = std::clamp(r, 1.0 - eps_clip, 1.0 + eps_clip);
        rollout_sum += std::min(r * a, clipped * a) - beta * kl[i][t];
      }
      group_sum += rollout_sum / static_cast<double>(n);
    }
    total += group_sum / static_cast<double>(batch.rollouts.size());
  }
  return total / static_cast<double>(batches.size());
}

}  // namespace egsw
