#ifndef EGSW_ORACLE_HPP_
#define EGSW_ORACLE_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "egsw/grpo.hpp"
#include "egsw/policy.hpp"
#include "egsw/tasks.hpp"
#include "egsw/weighting.hpp"

// Verification tooling. Everything in here is written against the raw
// parameter tables without reusing the engine's formula code, so it can
// serve as an independent check of it.
namespace egsw::oracle {

using Objective = std::function<double(const PolicyParams&)>;

// Coordinate-wise relative errors use max(|a|, |b|, kRelErrorFloor) as the
// denominator, so coordinates whose true value is below the finite
// difference noise level are judged on absolute error.
inline constexpr double kRelErrorFloor = 1e-4;
double relative_error(double analytic, double numeric);

struct FiniteDiffReport {
  std::string name;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::size_t worst_index = 0;
  double h = 0.0;
  std::size_t coordinates = 0;
  bool subset = false;          // true if a random coordinate subset was used
  std::uint64_t subset_seed = 0;
};

// Central differences (f(theta + h e_j) - f(theta - h e_j)) / 2h.
ParamGradient finite_diff_gradient(const Objective& objective,
                                   const PolicyParams& params, double h = 1e-5);

// Compares against finite differences on every coordinate, or on a seeded
// subset of `max_coords` coordinates when the table is larger than that.
FiniteDiffReport check_gradient(const std::string& name,
                                const Objective& objective,
                                const PolicyParams& params,
                                const ParamGradient& analytic, double h = 1e-5,
                                std::size_t max_coords = 4096,
                                std::uint64_t subset_seed = 0);

// --- Literal evaluators -------------------------------------------------

double literal_log_prob(const PolicyParams& params,
                        std::span<const Token> prompt,
                        std::span<const Token> prefix, Token action);
std::vector<double> literal_probs(const PolicyParams& params,
                                  std::span<const Token> prompt,
                                  std::span<const Token> prefix);
double literal_entropy(std::span<const double> probs);
std::vector<double> literal_advantages(std::span<const double> rewards,
                                       double sigma_min);

double literal_grpo_objective(const PolicyParams& current,
                              const PolicyParams& old, const PolicyParams& ref,
                              std::span<const GroupBatch> batches,
                              double eps_clip, double beta);

double literal_raw_weight(double advantage, double entropy, double alpha,
                          double temperature, bool normalized, int vocab_size);

// w[i][t], zero where rollout i has ended, straight from raw weights and
// their per-step sums.
std::vector<std::vector<double>> literal_weight_table(const GroupBatch& batch,
                                                      const EgswConfig& cfg,
                                                      int vocab_size);

// Scalar whose gradient (weights frozen) is the EGSW update:
//   mean_g (1/K) sum_i (1/N_i) sum_t w_it [A_it log pi - beta k3_it].
double egsw_surrogate(const PolicyParams& current, const PolicyParams& ref,
                      std::span<const GroupBatch> batches,
                      std::span<const WeightTable> weights, double beta);

// Term-by-term evaluation of the weighted update, score function included.
ParamGradient literal_egsw_gradient(const PolicyParams& current,
                                    const PolicyParams& ref,
                                    std::span<const GroupBatch> batches,
                                    std::span<const WeightTable> weights,
                                    double beta);

// --- Exhaustive enumeration --------------------------------------------

struct PrefixEntropy {
  TokenSeq prefix;
  double reach_probability = 0.0;
  double entropy = 0.0;
};

struct Expectations {
  double expected_reward = 0.0;
  double expected_length = 0.0;
  std::vector<PrefixEntropy> steps;  // every reachable step distribution
};

// Walks the full completion tree (|A|^max_len <= 1e6, max_len <= 8).
Expectations enumerate_expectations(const PolicyParams& params,
                                    const Task& task, const TokenSeq& prompt,
                                    int max_len);

// --- Gradient-check suite ----------------------------------------------

struct GradcheckOptions {
  int instances = 100;
  std::uint64_t seed = 20250301;
  double h = 1e-5;
  double fd_tolerance = 1e-4;
  double exact_tolerance = 1e-10;
  int max_vocab = 5;
  int max_group = 4;
  int max_len = 5;
  // Test hook: perturbs the named analytic quantity so its check must fail.
  std::string corrupt;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double tolerance = 0.0;
  FiniteDiffReport report;
  int worst_instance = 0;
};

// One random small instance: policy, perturbed old/ref snapshots, and
// groups of scored rollouts with continuous rewards.
struct GradcheckInstance {
  PolicyParams current;
  PolicyParams old;
  PolicyParams ref;
  std::vector<GroupBatch> batches;
  std::vector<WeightTable> weights;
  EgswConfig egsw;
  double eps_clip = 0.2;
  double beta = 0.1;
};

GradcheckInstance make_gradcheck_instance(std::uint64_t seed,
                                          const GradcheckOptions& opts);

std::vector<CheckResult> run_gradcheck_suite(const GradcheckOptions& opts);

}  // namespace egsw::oracle

#endif  // EGSW_ORACLE_HPP_
