#include "egsw/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "egsw/error.hpp"
#include "egsw/rng.hpp"

namespace egsw {

namespace {

constexpr std::size_t kMaxParams = std::size_t{1} << 26;

void check_tokens(const Vocab& vocab, std::span<const Token> seq,
                  const char* what) {
  for (Token t : seq) {
    if (!vocab.contains(t)) {
      throw InputError(std::string(what) + " token " + std::to_string(t) +
                       " outside vocabulary of size " +
                       std::to_string(vocab.size));
    }
  }
}

// Token at position `pos` of prompt ++ prefix.
Token context_at(std::span<const Token> prompt, std::span<const Token> prefix,
                 std::size_t pos) {
  return pos < prompt.size() ? prompt[pos] : prefix[pos - prompt.size()];
}

void fill_logits(const PolicyParams& params, std::span<const Token> prompt,
                 std::span<const Token> prefix, std::vector<double>& logits) {
  const int v = params.vocab().size;
  logits.assign(v, 0.0);
  const auto& w = params.weights();
  if (params.kind() == PolicyKind::kTabularNgram) {
    const std::size_t base =
        static_cast<std::size_t>(tabular_row(params, prompt, prefix)) * v;
    std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(base), v,
                logits.begin());
    return;
  }
  for (int f : linear_features(params.vocab(), prompt, prefix)) {
    const std::size_t base = static_cast<std::size_t>(f) * v;
    for (int a = 0; a < v; ++a) logits[a] += w[base + a];
  }
}

}  // namespace

void Vocab::validate() const {
  if (size < 2) throw InputError("vocab size must be >= 2");
  if (eos < 0 || eos >= size) throw InputError("eos token outside vocabulary");
}

std::string to_string(PolicyKind kind) {
  return kind == PolicyKind::kTabularNgram ? "tabular_ngram" : "linear_softmax";
}

PolicyKind policy_kind_from_string(const std::string& name) {
  if (name == "tabular_ngram") return PolicyKind::kTabularNgram;
  if (name == "linear_softmax") return PolicyKind::kLinearSoftmax;
  throw InputError("unknown policy kind '" + name + "'");
}

PolicyParams::PolicyParams(PolicyKind kind, Vocab vocab, int context_order,
                           int feature_dim, int rows)
    : kind_(kind),
      vocab_(vocab),
      context_order_(context_order),
      feature_dim_(feature_dim),
      rows_(rows),
      weights_(static_cast<std::size_t>(rows) * vocab.size, 0.0) {}

PolicyParams PolicyParams::tabular(Vocab vocab, int context_order) {
  vocab.validate();
  if (context_order < 0) throw InputError("context_order must be >= 0");
  std::size_t rows = 1;
  for (int i = 0; i < context_order; ++i) {
    rows *= static_cast<std::size_t>(vocab.size);
    if (rows * vocab.size > kMaxParams) {
      throw InputError("tabular policy too large: |A|^c exceeds limit");
    }
  }
  return PolicyParams(PolicyKind::kTabularNgram, vocab, context_order, 0,
                      static_cast<int>(rows));
}

PolicyParams PolicyParams::linear(Vocab vocab) {
  vocab.validate();
  const int d = linear_feature_dim(vocab);
  return PolicyParams(PolicyKind::kLinearSoftmax, vocab, 0, d, d);
}

void PolicyParams::validate() const {
  for (double w : weights_) {
    if (!std::isfinite(w)) throw InputError("non-finite policy parameter");
  }
}

ParamGradient& ParamGradient::operator+=(const ParamGradient& other) {
  if (other.size() != size()) throw InputError("gradient size mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other[i];
  return *this;
}

ParamGradient& ParamGradient::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

double ParamGradient::l2_norm() const {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

bool ParamGradient::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

int tabular_row(const PolicyParams& params, std::span<const Token> prompt,
                std::span<const Token> prefix) {
  const int v = params.vocab().size;
  const int c = params.context_order();
  const std::size_t total = prompt.size() + prefix.size();
  int row = 0;
  for (int j = 0; j < c; ++j) {
    // Position of the j-th oldest context token; negative means padding.
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(total) - c + j;
    const Token tok =
        pos < 0 ? params.vocab().eos
                : context_at(prompt, prefix, static_cast<std::size_t>(pos));
    row = row * v + tok;
  }
  return row;
}

int linear_feature_dim(const Vocab& vocab) { return 3 + 3 * vocab.size; }

std::vector<int> linear_features(const Vocab& vocab,
                                 std::span<const Token> prompt,
                                 std::span<const Token> prefix) {
  const int v = vocab.size;
  const std::size_t total = prompt.size() + prefix.size();
  const Token last =
      total == 0 ? vocab.eos : context_at(prompt, prefix, total - 1);
  const std::size_t t = prefix.size();
  const std::size_t len = prompt.size();
  const int aligned = t < len ? prompt[t] : v;
  const int reversed = t < len ? prompt[len - 1 - t] : v;
  return {0, 1 + last, 1 + v + aligned, 2 + 2 * v + reversed};
}

StepDistribution step_distribution(const PolicyParams& params,
                                   std::span<const Token> prompt,
                                   std::span<const Token> prefix) {
  check_tokens(params.vocab(), prompt, "prompt");
  check_tokens(params.vocab(), prefix, "prefix");
  StepDistribution dist;
  fill_logits(params, prompt, prefix, dist.log_probs);
  const double max_logit =
      *std::max_element(dist.log_probs.begin(), dist.log_probs.end());
  double sum = 0.0;
  for (double z : dist.log_probs) sum += std::exp(z - max_logit);
  const double log_norm = max_logit + std::log(sum);
  dist.probs.resize(dist.log_probs.size());
  for (std::size_t a = 0; a < dist.log_probs.size(); ++a) {
    dist.log_probs[a] -= log_norm;
    dist.probs[a] = std::exp(dist.log_probs[a]);
  }
  return dist;
}

double step_entropy(const StepDistribution& dist) {
  double h = 0.0;
  for (std::size_t a = 0; a < dist.probs.size(); ++a) {
    const double p = dist.probs[a];
    // 0 log 0 = 0; any p > 0 has a finite log-prob from the log-sum-exp.
    if (p > 0.0) h -= p * dist.log_probs[a];
  }
  return std::max(h, 0.0);
}

double trajectory_entropy(std::span<const double> step_entropies) {
  if (step_entropies.empty()) {
    throw InputError("trajectory_entropy of an empty rollout");
  }
  double total = 0.0;
  for (double h : step_entropies) {
    if (!std::isfinite(h) || h < 0.0) {
      throw InputError("step entropies must be finite and nonnegative");
    }
    total += h;
  }
  return total;
}

Rollout sample_rollout(const PolicyParams& params, const TokenSeq& prompt,
                       int max_len, std::uint64_t rng_seed, bool stop_at_eos) {
  if (max_len < 1) throw InputError("max_len must be >= 1");
  Rng rng(rng_seed);
  Rollout r;
  r.prompt = prompt;
  const Token eos = params.vocab().eos;
  for (int t = 0; t < max_len; ++t) {
    const StepDistribution dist = step_distribution(params, prompt, r.tokens);
    const double u = rng.uniform();
    double cum = 0.0;
    Token pick = -1;
    for (std::size_t a = 0; a < dist.probs.size(); ++a) {
      if (dist.probs[a] <= 0.0) continue;
      cum += dist.probs[a];
      pick = static_cast<Token>(a);
      if (u < cum) break;
    }
    r.tokens.push_back(pick);
    r.log_probs.push_back(dist.log_probs[pick]);
    r.entropies.push_back(step_entropy(dist));
    if (stop_at_eos && pick == eos) {
      r.ended_with_eos = true;
      break;
    }
  }
  return r;
}

void accumulate_grad_log_prob(const PolicyParams& params,
                              std::span<const Token> prompt,
                              std::span<const Token> prefix,
                              const StepDistribution& dist, Token action,
                              double scale, std::span<double> out) {
  const int v = params.vocab().size;
  auto add_row = [&](std::size_t base) {
    for (int b = 0; b < v; ++b) {
      const double indicator = b == action ? 1.0 : 0.0;
      out[base + b] += scale * (indicator - dist.probs[b]);
    }
  };
  if (params.kind() == PolicyKind::kTabularNgram) {
    add_row(static_cast<std::size_t>(tabular_row(params, prompt, prefix)) * v);
    return;
  }
  for (int f : linear_features(params.vocab(), prompt, prefix)) {
    add_row(static_cast<std::size_t>(f) * v);
  }
}

ParamGradient grad_log_prob(const PolicyParams& params,
                            std::span<const Token> prompt,
                            std::span<const Token> prefix, Token action) {
  if (!params.vocab().contains(action)) {
    throw InputError("action outside vocabulary");
  }
  const StepDistribution dist = step_distribution(params, prompt, prefix);
  ParamGradient g(params.size());
  accumulate_grad_log_prob(params, prompt, prefix, dist, action, 1.0,
                           g.values());
  return g;
}

}  // namespace egsw
