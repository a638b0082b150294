#ifndef EGSW_POLICY_HPP_
#define EGSW_POLICY_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace egsw {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

struct Vocab {
  int size = 0;
  Token eos = 0;

  void validate() const;
  bool contains(Token t) const { return t >= 0 && t < size; }
  bool operator==(const Vocab&) const = default;
};

enum class PolicyKind { kTabularNgram, kLinearSoftmax };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);

// Parameters of an autoregressive softmax policy over a fixed vocabulary.
//
// Tabular n-gram: one logit row per context of the last `context_order`
// tokens of prompt ++ prefix (left-padded with eos), |A|^c rows of |A| logits.
//
// Linear softmax: logits = W^T phi(context) with W a d x |A| matrix and phi a
// vector of binary indicator features (see `linear_features`).
//
// Weights are stored row-major: weight(row, action) = weights[row * |A| + a].
class PolicyParams {
 public:
  static PolicyParams tabular(Vocab vocab, int context_order);
  static PolicyParams linear(Vocab vocab);

  PolicyKind kind() const { return kind_; }
  const Vocab& vocab() const { return vocab_; }
  int context_order() const { return context_order_; }
  int feature_dim() const { return feature_dim_; }
  int rows() const { return rows_; }
  std::size_t size() const { return weights_.size(); }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  double& at(int row, Token action) {
    return weights_[static_cast<std::size_t>(row) * vocab_.size + action];
  }
  double at(int row, Token action) const {
    return weights_[static_cast<std::size_t>(row) * vocab_.size + action];
  }

  // Throws InputError if any weight is non-finite.
  void validate() const;

  bool operator==(const PolicyParams&) const = default;

 private:
  PolicyParams(PolicyKind kind, Vocab vocab, int context_order,
               int feature_dim, int rows);

  PolicyKind kind_;
  Vocab vocab_;
  int context_order_ = 0;
  int feature_dim_ = 0;
  int rows_ = 0;
  std::vector<double> weights_;
};

// Dense gradient with the same layout as PolicyParams::weights().
class ParamGradient {
 public:
  ParamGradient() = default;
  explicit ParamGradient(std::size_t n) : values_(n, 0.0) {}
  explicit ParamGradient(std::vector<double> values)
      : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  ParamGradient& operator+=(const ParamGradient& other);
  ParamGradient& operator*=(double s);
  double l2_norm() const;
  bool all_finite() const;

  bool operator==(const ParamGradient&) const = default;

 private:
  std::vector<double> values_;
};

struct StepDistribution {
  std::vector<double> probs;
  std::vector<double> log_probs;
};

// One sampled completion and the per-step quantities recorded at sampling
// time. `tokens` includes the terminating eos when one was emitted.
struct Rollout {
  TokenSeq prompt;
  TokenSeq tokens;
  std::vector<double> log_probs;
  std::vector<double> entropies;
  double reward = 0.0;
  bool ended_with_eos = false;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Logit row selected by the tabular context. Exposed for tests and tooling.
int tabular_row(const PolicyParams& params, std::span<const Token> prompt,
                std::span<const Token> prefix);

// Indices of the active (value 1) linear features. Layout, with V = |A|:
//   [0]                         bias
//   [1, 1 + V)                  last token of prompt ++ prefix
//   [1 + V, 2 + 2V)             prompt token aligned with the completion
//                               position, or the trailing "past end" slot
//   [2 + 2V, 3 + 3V)            same for the reversed prompt
std::vector<int> linear_features(const Vocab& vocab,
                                 std::span<const Token> prompt,
                                 std::span<const Token> prefix);
int linear_feature_dim(const Vocab& vocab);

StepDistribution step_distribution(const PolicyParams& params,
                                   std::span<const Token> prompt,
                                   std::span<const Token> prefix);

// Shannon entropy in nats with the convention 0 log 0 = 0.
double step_entropy(const StepDistribution& dist);

double trajectory_entropy(std::span<const double> step_entropies);

// Samples until eos or `max_len` tokens. With `stop_at_eos` false, eos is an
// ordinary token and every rollout has exactly `max_len` tokens.
Rollout sample_rollout(const PolicyParams& params, const TokenSeq& prompt,
                       int max_len, std::uint64_t rng_seed,
                       bool stop_at_eos = true);

ParamGradient grad_log_prob(const PolicyParams& params,
                            std::span<const Token> prompt,
                            std::span<const Token> prefix, Token action);

// out += scale * d log pi(action | context) / d theta, given the already
// computed distribution at that context.
void accumulate_grad_log_prob(const PolicyParams& params,
                              std::span<const Token> prompt,
                              std::span<const Token> prefix,
                              const StepDistribution& dist, Token action,
                              double scale, std::span<double> out);

}  // namespace egsw

#endif  // EGSW_POLICY_HPP_
