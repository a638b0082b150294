#ifndef EGSW_GRPO_HPP_
#define EGSW_GRPO_HPP_

#include <span>
#include <vector>

#include "egsw/policy.hpp"

namespace egsw {

// Ragged per-(rollout, step) table: values[i][t] for t < rollout i's length.
using TokenTable = std::vector<std::vector<double>>;

// K rollouts of one prompt with outcome rewards broadcast to every token.
struct GroupBatch {
  TokenSeq prompt;
  std::vector<Rollout> rollouts;
  std::vector<double> rewards;
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
  TokenTable advantages;

  int group_size() const { return static_cast<int>(rollouts.size()); }
};

struct RatioTable {
  TokenTable values;
};

// Builds a group from scored rollouts (rewards read from Rollout::reward).
GroupBatch make_group_batch(TokenSeq prompt, std::vector<Rollout> rollouts,
                            double sigma_min);

// (R_i - mu) / sigma with the population std; all zeros when sigma < sigma_min.
std::vector<double> normalize_advantages(std::span<const double> rewards,
                                         double sigma_min);

// log pi(a_t | q, a_<t) for every sampled token, recomputed under `params`.
TokenTable token_log_probs(const PolicyParams& params, const GroupBatch& batch);

RatioTable likelihood_ratios(const PolicyParams& current,
                             const PolicyParams& old, const GroupBatch& batch);

// log(pi_ref / pi_theta) is clamped to this range before exponentiation.
inline constexpr double kLogRatioClamp = 30.0;

// k3 estimator rho - log(rho) - 1 for rho = exp(log_rho), log_rho clamped.
double k3_from_log_ratio(double log_rho);

TokenTable kl_k3(const PolicyParams& current, const PolicyParams& ref,
                 const GroupBatch& batch);

// Mean over groups, then rollouts, of each rollout's per-token mean of
// min(r A, clip(r, 1 - eps, 1 + eps) A) - beta * k3.
double grpo_objective(const PolicyParams& current, const PolicyParams& old,
                      const PolicyParams& ref,
                      std::span<const GroupBatch> batches, double eps_clip,
                      double beta);

}  // namespace egsw

#endif  // EGSW_GRPO_HPP_
