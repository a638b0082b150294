#include "egsw/weighting.hpp"

#include <algorithm>
#include <cmath>

#include "egsw/error.hpp"

namespace egsw {

std::string to_string(EntropyMode mode) {
  return mode == EntropyMode::kRaw ? "raw" : "normalized";
}

EntropyMode entropy_mode_from_string(const std::string& name) {
  if (name == "raw") return EntropyMode::kRaw;
  if (name == "normalized") return EntropyMode::kNormalized;
  throw InputError("unknown entropy mode '" + name + "'");
}

std::string to_string(WeightGranularity g) {
  return g == WeightGranularity::kStep ? "step" : "trajectory";
}

WeightGranularity granularity_from_string(const std::string& name) {
  if (name == "step") return WeightGranularity::kStep;
  if (name == "trajectory") return WeightGranularity::kTrajectory;
  throw InputError("unknown weight granularity '" + name + "'");
}

void EgswConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InputError("EGSW temperature must be > 0");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InputError("EGSW alpha must be >= 0");
  }
}

double weight_exponent(double advantage, double entropy, const EgswConfig& cfg,
                       int vocab_size) {
  if (!std::isfinite(advantage) || !std::isfinite(entropy)) {
    throw InputError("raw weight inputs must be finite");
  }
  if (vocab_size < 2) throw InputError("vocab_size must be >= 2");
  const double h = cfg.entropy_mode == EntropyMode::kNormalized
                       ? entropy / std::log(static_cast<double>(vocab_size))
                       : entropy;
  return (advantage + cfg.alpha * h) / cfg.temperature;
}

double raw_weight(double advantage, double entropy, const EgswConfig& cfg,
                  int vocab_size) {
  return std::exp(weight_exponent(advantage, entropy, cfg, vocab_size));
}

std::vector<double> normalize_step(std::span<const double> exponents,
                                   const EgswConfig& cfg) {
  if (exponents.empty()) throw InputError("normalize_step needs a live rollout");
  const double top = *std::max_element(exponents.begin(), exponents.end());
  std::vector<double> w(exponents.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(exponents[i] - top);
    sum += w[i];
  }
  // Rescaling folds the live count into the divisor so equal exponents give
  // weights of exactly 1.
  const double scale =
      cfg.weight_rescale ? static_cast<double>(w.size()) / sum : 1.0 / sum;
  for (double& x : w) x *= scale;
  return w;
}

WeightTable::WeightTable(int rollouts, int steps)
    : rollouts_(rollouts),
      steps_(steps),
      weights_(static_cast<std::size_t>(rollouts) * steps, 0.0),
      alive_(static_cast<std::size_t>(rollouts) * steps, 0),
      live_count_(static_cast<std::size_t>(steps), 0) {}

WeightTable build_weight_table(const GroupBatch& batch, const EgswConfig& cfg,
                               int vocab_size) {
  cfg.validate();
  const int k = batch.group_size();
  if (static_cast<int>(batch.advantages.size()) != k) {
    throw InputError("batch advantages not populated");
  }
  int steps = 0;
  for (const Rollout& r : batch.rollouts) steps = std::max(steps, r.length());
  WeightTable table(k, steps);

  auto exponent = [&](double advantage, double entropy) {
    return cfg.force_uniform
               ? 0.0
               : weight_exponent(advantage, entropy, cfg, vocab_size);
  };

  if (cfg.granularity == WeightGranularity::kTrajectory) {
    std::vector<double> exps;
    for (int i = 0; i < k; ++i) {
      const Rollout& r = batch.rollouts[i];
      double h = trajectory_entropy(r.entropies);
      // Normalized mode maps the trajectory entropy to [0, 1] per token.
      if (cfg.entropy_mode == EntropyMode::kNormalized) h /= r.length();
      exps.push_back(exponent(batch.advantages[i].front(), h));
    }
    const std::vector<double> w = normalize_step(exps, cfg);
    for (int i = 0; i < k; ++i) {
      for (int t = 0; t < batch.rollouts[i].length(); ++t) {
        table.set_alive(i, t, true);
        ++table.live_count(t);
        table.weight(i, t) = w[i];
      }
    }
    return table;
  }

  std::vector<double> exps;
  std::vector<int> live;
  for (int t = 0; t < steps; ++t) {
    exps.clear();
    live.clear();
    for (int i = 0; i < k; ++i) {
      const Rollout& r = batch.rollouts[i];
      if (t >= r.length()) continue;
      live.push_back(i);
      exps.push_back(exponent(batch.advantages[i][t], r.entropies[t]));
    }
    const std::vector<double> w = normalize_step(exps, cfg);
    table.live_count(t) = static_cast<int>(live.size());
    for (std::size_t j = 0; j < live.size(); ++j) {
      table.set_alive(live[j], t, true);
      table.weight(live[j], t) = w[j];
    }
  }
  return table;
}

}  // namespace egsw
