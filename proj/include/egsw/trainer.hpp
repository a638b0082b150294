#ifndef EGSW_TRAINER_HPP_
#define EGSW_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "egsw/grpo.hpp"
#include "egsw/policy.hpp"
#include "egsw/tasks.hpp"
#include "egsw/weighting.hpp"

namespace egsw {

enum class Algorithm { kGrpo, kGrpoEgsw };
enum class OptimizerKind { kSgd, kAdam };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);
std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& name);

struct TrainConfig {
  Algorithm algorithm = Algorithm::kGrpo;
  int group_size = 8;
  int prompts_per_step = 1;
  int steps_per_iteration = 100;
  int iterations = 1;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double beta = 0.04;
  double eps_clip = 0.2;
  EgswConfig egsw;
  double sigma_min = 1e-6;
  int max_completion_len = 0;  // 0 means the task's limit
  std::uint64_t master_seed = 0;

  PolicyKind policy = PolicyKind::kTabularNgram;
  int context_order = 0;
  double init_scale = 0.0;  // std of Gaussian initial weights; 0 is uniform

  void validate() const;
  int total_updates() const { return iterations * steps_per_iteration; }
};

struct UpdateRecord {
  int update = 0;  // 1-based, monotone
  int iteration = 0;
  int step = 0;
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  double mean_entropy = 0.0;
  double mean_kl = 0.0;
  double grad_norm = 0.0;
  double mean_length = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainMetrics {
  std::vector<UpdateRecord> records;
};

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long long steps = 0;
};

// Weighted score-function update:
//   mean_g (1/K) sum_i (1/N_i) sum_t w_it [A_it + beta (rho_it - 1)]
//     * grad log pi(a_it | q, a_i<t),   rho = pi_ref / pi_theta.
// Ascent direction.
ParamGradient egsw_gradient(const PolicyParams& current,
                            const PolicyParams& ref,
                            std::span<const GroupBatch> batches,
                            std::span<const WeightTable> weights, double beta);

// Exact gradient of grpo_objective at `current` (ascent direction). Tokens
// whose min() selects the clipped branch contribute no advantage gradient.
ParamGradient grpo_gradient(const PolicyParams& current,
                            const PolicyParams& old, const PolicyParams& ref,
                            std::span<const GroupBatch> batches,
                            double eps_clip, double beta);

// Gradient ascent step (SGD or Adam). Throws TrainingError on non-finite
// gradients or parameters.
PolicyParams apply_update(const PolicyParams& params,
                          const ParamGradient& gradient,
                          const TrainConfig& cfg, OptimizerState& state);

PolicyParams initial_policy(const Task& task, const TrainConfig& cfg);

// Everything the trainer knows at the moment of an update, before the
// parameters move.
struct UpdateContext {
  const PolicyParams& current;
  const PolicyParams& old;
  const PolicyParams& ref;
  std::span<const GroupBatch> batches;
  std::span<const WeightTable> weights;  // empty for plain GRPO
  const ParamGradient& gradient;
  const UpdateRecord& record;
};

struct TrainHooks {
  std::function<void(const UpdateRecord&)> on_record;
  std::function<void(const UpdateContext&)> on_update;
};

struct TrainResult {
  PolicyParams params;
  TrainMetrics metrics;
};

TrainResult train(const Task& task, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace egsw

#endif  // EGSW_TRAINER_HPP_
