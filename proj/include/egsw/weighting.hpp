#ifndef EGSW_WEIGHTING_HPP_
#define EGSW_WEIGHTING_HPP_

#include <span>
#include <string>
#include <vector>

#include "egsw/grpo.hpp"

namespace egsw {

enum class EntropyMode { kRaw, kNormalized };
enum class WeightGranularity { kStep, kTrajectory };

std::string to_string(EntropyMode mode);
EntropyMode entropy_mode_from_string(const std::string& name);
std::string to_string(WeightGranularity g);
WeightGranularity granularity_from_string(const std::string& name);

struct EgswConfig {
  double alpha = 0.3;
  double temperature = 1.0;
  EntropyMode entropy_mode = EntropyMode::kNormalized;
  // Multiply normalized weights by the live count so the mean weight is 1.
  bool weight_rescale = false;
  // Diagnostic: every exponent is replaced by 0, giving uniform weights.
  bool force_uniform = false;
  WeightGranularity granularity = WeightGranularity::kStep;

  void validate() const;
};

// (advantage + alpha * H') / P, with H' = entropy (raw) or
// entropy / log(vocab_size) (normalized).
double weight_exponent(double advantage, double entropy, const EgswConfig& cfg,
                       int vocab_size);

// exp(weight_exponent(...)). May overflow for extreme inputs; the table
// builder works on exponents and never calls this.
double raw_weight(double advantage, double entropy, const EgswConfig& cfg,
                  int vocab_size);

// Max-subtracted softmax over the live rollouts' exponents at one step.
std::vector<double> normalize_step(std::span<const double> exponents,
                                   const EgswConfig& cfg);

// Dense K x T table, T = longest rollout. weight(i, t) is exactly 0 where
// rollout i has no token at step t.
class WeightTable {
 public:
  WeightTable() = default;
  WeightTable(int rollouts, int steps);

  int rollouts() const { return rollouts_; }
  int steps() const { return steps_; }
  double weight(int i, int t) const { return weights_[index(i, t)]; }
  double& weight(int i, int t) { return weights_[index(i, t)]; }
  bool alive(int i, int t) const { return alive_[index(i, t)] != 0; }
  void set_alive(int i, int t, bool on) { alive_[index(i, t)] = on ? 1 : 0; }
  int live_count(int t) const { return live_count_[t]; }
  int& live_count(int t) { return live_count_[t]; }

 private:
  std::size_t index(int i, int t) const {
    return static_cast<std::size_t>(i) * steps_ + t;
  }

  int rollouts_ = 0;
  int steps_ = 0;
  std::vector<double> weights_;
  std::vector<unsigned char> alive_;
  std::vector<int> live_count_;
};

// Exponents from the batch advantages and sampling-time entropies,
// softmax-normalized across the live rollouts of each step. Trajectory
// granularity instead uses one exponent per rollout from its summed entropy
// and broadcasts the rollout's weight to all of its steps.
WeightTable build_weight_table(const GroupBatch& batch, const EgswConfig& cfg,
                               int vocab_size);

}  // namespace egsw

#endif  // EGSW_WEIGHTING_HPP_
