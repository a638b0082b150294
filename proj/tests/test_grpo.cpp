#include "doctest.h"

#include <cmath>
#include <vector>

#include "egsw/error.hpp"
#include "egsw/grpo.hpp"
#include "egsw/oracle.hpp"
#include "egsw/rng.hpp"
#include "egsw/trainer.hpp"
#include "test_util.hpp"

using namespace egsw;
using egsw::testing::make_rollout;
using egsw::testing::random_policy;
using egsw::testing::random_tokens;

namespace {

// Standardized (0.2, 0.5, 0.9, 0.9), population std, mpmath at 30 digits.
constexpr double kAdvantages[] = {-1.44192118045595058607177067462653,
                                  -0.424094464839985466491697257243117,
                                  0.933007822647968026281733965934749,
                                  0.933007822647968026281733965934749};
// 2 - log 2 - 1.
constexpr double kK3AtTwo = 0.306852819440054690582767878542;

struct Instance {
  PolicyParams current;
  PolicyParams old;
  PolicyParams ref;
  std::vector<GroupBatch> batches;
};

// Random batch sampled under `old`, with arbitrary rewards.
Instance random_instance(std::uint64_t seed, int vocab, int k, int max_len,
                         int groups = 1) {
  Rng rng(seed);
  const Vocab v{vocab, vocab - 1};
  const PolicyParams base = PolicyParams::tabular(v, 1);
  Instance inst{random_policy(base, rng.next()), random_policy(base, rng.next()),
                random_policy(base, rng.next()), {}};
  for (int g = 0; g < groups; ++g) {
    const TokenSeq prompt = random_tokens(rng, 2, vocab - 1);
    std::vector<Rollout> rs;
    for (int i = 0; i < k; ++i) {
      Rollout r = sample_rollout(inst.old, prompt, max_len, rng.next());
      r.reward = rng.uniform();
      rs.push_back(r);
    }
    inst.batches.push_back(make_group_batch(prompt, rs, 1e-6));
  }
  return inst;
}

}  // namespace

TEST_CASE("two-point advantages") {
  const auto a = normalize_advantages(std::vector<double>{0.0, 1.0}, 1e-6);
  CHECK(a == std::vector<double>{-1.0, 1.0});
}

TEST_CASE("constant rewards give zero advantages") {
  for (double c : {0.0, 0.3, 1.0}) {
    const auto a = normalize_advantages(std::vector<double>(5, c), 1e-6);
    for (double x : a) CHECK(x == 0.0);
  }
}

TEST_CASE("advantages match high precision statistics") {
  const auto a = normalize_advantages(std::vector<double>{0.2, 0.5, 0.9, 0.9}, 1e-6);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - kAdvantages[i]) < 1e-14);
}

TEST_CASE("advantages need a group") {
  CHECK_THROWS_AS(normalize_advantages(std::vector<double>{1.0}, 1e-6), InputError);
  CHECK_THROWS_AS(normalize_advantages(std::vector<double>{}, 1e-6), InputError);
}

TEST_CASE("standardized advantages have mean 0 and std 1") {
  Rng rng(6);
  for (int n = 0; n < 1000; ++n) {
    std::vector<double> r(2 + rng.below(15));
    for (double& x : r) x = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
    r[0] = 0.0;
    r[1] = 1.0;
    const auto a = normalize_advantages(r, 1e-6);
    double mean = 0.0;
    for (double x : a) mean += x;
    mean /= a.size();
    double var = 0.0;
    for (double x : a) var += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var / a.size()) - 1.0) < 1e-6);
  }
}

TEST_CASE("group batches broadcast advantages over tokens") {
  const PolicyParams p = PolicyParams::tabular({4, 3}, 0);
  const TokenSeq prompt{0};
  const GroupBatch b = make_group_batch(
      prompt, {make_rollout(p, prompt, {1, 3}, 0.0), make_rollout(p, prompt, {2, 2, 3}, 1.0)},
      1e-6);
  CHECK(b.group_size() == 2);
  CHECK(b.mu == 0.5);
  CHECK(b.sigma == 0.5);
  CHECK(b.advantages == TokenTable{{-1.0, -1.0}, {1.0, 1.0, 1.0}});
}

TEST_CASE("likelihood ratios") {
  const PolicyParams old = PolicyParams::tabular({3, 2}, 0);
  const TokenSeq prompt{1};
  const GroupBatch b = make_group_batch(
      prompt, {make_rollout(old, prompt, {0, 2}, 0.0), make_rollout(old, prompt, {1}, 1.0)},
      1e-6);
  for (const auto& row : likelihood_ratios(old, old, b).values) {
    for (double r : row) CHECK(r == 1.0);
  }
  PolicyParams doubled = old;
  doubled.at(0, 0) = std::log(4.0);  // p(0) goes from 1/3 to 2/3
  const RatioTable r = likelihood_ratios(doubled, old, b);
  CHECK(std::abs(r.values[0][0] - 2.0) < 1e-14);
  CHECK(std::abs(r.values[0][1] - 0.5) < 1e-14);
}

TEST_CASE("likelihood ratios match recomputation from scratch") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Instance inst = random_instance(derive_seed(40, {s}), 4, 3, 4);
    const GroupBatch& b = inst.batches[0];
    const RatioTable r = likelihood_ratios(inst.current, inst.old, b);
    for (int i = 0; i < b.group_size(); ++i) {
      const Rollout& ro = b.rollouts[i];
      for (int t = 0; t < ro.length(); ++t) {
        const std::span<const Token> prefix(ro.tokens.data(), t);
        const double want =
            std::exp(oracle::literal_log_prob(inst.current, b.prompt, prefix, ro.tokens[t])) /
            std::exp(oracle::literal_log_prob(inst.old, b.prompt, prefix, ro.tokens[t]));
        CHECK(std::abs(r.values[i][t] - want) < 1e-12 * want);
      }
    }
  }
}

TEST_CASE("k3 closed forms") {
  CHECK(k3_from_log_ratio(0.0) == 0.0);
  CHECK(std::abs(k3_from_log_ratio(std::log(2.0)) - kK3AtTwo) < 1e-15);
  CHECK(k3_from_log_ratio(1e-9) >= 0.0);
  CHECK(k3_from_log_ratio(-1e-9) >= 0.0);
  CHECK(std::isfinite(k3_from_log_ratio(500.0)));
  CHECK(k3_from_log_ratio(500.0) == k3_from_log_ratio(kLogRatioClamp));
}

TEST_CASE("k3 vanishes when the policy equals the reference") {
  const Instance inst = random_instance(3, 5, 4, 5);
  for (const auto& row : kl_k3(inst.current, inst.current, inst.batches[0])) {
    for (double x : row) CHECK(x == 0.0);
  }
}

TEST_CASE("k3 matches direct evaluation and is nonnegative") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Instance inst = random_instance(derive_seed(41, {s}), 5, 4, 5);
    const GroupBatch& b = inst.batches[0];
    const TokenTable k = kl_k3(inst.current, inst.ref, b);
    for (int i = 0; i < b.group_size(); ++i) {
      const Rollout& ro = b.rollouts[i];
      for (int t = 0; t < ro.length(); ++t) {
        const std::span<const Token> prefix(ro.tokens.data(), t);
        const double rho =
            std::exp(oracle::literal_log_prob(inst.ref, b.prompt, prefix, ro.tokens[t]) -
                     oracle::literal_log_prob(inst.current, b.prompt, prefix, ro.tokens[t]));
        CHECK(k[i][t] >= 0.0);
        CHECK(k[i][t] == doctest::Approx(rho - std::log(rho) - 1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("on-policy objective is the mean advantage, zero for one group") {
  Instance inst = random_instance(9, 4, 4, 4);
  inst.current = inst.old;
  const double j = grpo_objective(inst.old, inst.old, inst.old, inst.batches, 0.2, 0.04);
  CHECK(std::abs(j) < 1e-15);
}

TEST_CASE("objective without clipping or KL is the mean of r A") {
  Instance inst = random_instance(10, 4, 3, 4);
  inst.current = inst.old;
  for (std::size_t i = 0; i < inst.current.size(); ++i) {
    inst.current.weights()[i] += 0.01 * std::sin(static_cast<double>(i));
  }
  const GroupBatch& b = inst.batches[0];
  const RatioTable r = likelihood_ratios(inst.current, inst.old, b);
  double want = 0.0;
  for (int i = 0; i < b.group_size(); ++i) {
    double inner = 0.0;
    for (std::size_t t = 0; t < r.values[i].size(); ++t) {
      REQUIRE(std::abs(r.values[i][t] - 1.0) < 0.2);
      inner += r.values[i][t] * b.advantages[i][t];
    }
    want += inner / r.values[i].size();
  }
  want /= b.group_size();
  const double j = grpo_objective(inst.current, inst.old, inst.ref, inst.batches, 0.2, 0.0);
  CHECK(std::abs(j - want) < 1e-15);
}

TEST_CASE("objective matches the literal transcription") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Instance inst = random_instance(derive_seed(42, {s}), 3, 3, 4);
    const double j = grpo_objective(inst.current, inst.old, inst.ref, inst.batches, 0.2, 0.1);
    const double lit =
        oracle::literal_grpo_objective(inst.current, inst.old, inst.ref, inst.batches, 0.2, 0.1);
    CHECK(oracle::relative_error(j, lit) < 1e-12);
  }
}

TEST_CASE("objective rejects empty batches") {
  const PolicyParams p = PolicyParams::tabular({3, 2}, 0);
  CHECK_THROWS_AS(grpo_objective(p, p, p, std::vector<GroupBatch>{}, 0.2, 0.0), InputError);
}

TEST_CASE("on-policy gradient is the plain score-function gradient") {
  const Instance inst = random_instance(12, 4, 4, 4, 2);
  const PolicyParams& p = inst.old;
  ParamGradient want(p.size());
  for (const GroupBatch& b : inst.batches) {
    for (int i = 0; i < b.group_size(); ++i) {
      const Rollout& ro = b.rollouts[i];
      for (int t = 0; t < ro.length(); ++t) {
        ParamGradient g = grad_log_prob(p, b.prompt,
                                        std::span<const Token>(ro.tokens.data(), t),
                                        ro.tokens[t]);
        g *= b.advantages[i][t] / ro.length() / b.group_size() / inst.batches.size();
        want += g;
      }
    }
  }
  const ParamGradient got = grpo_gradient(p, p, p, inst.batches, 0.2, 0.04);
  for (std::size_t j = 0; j < p.size(); ++j) CHECK(std::abs(got[j] - want[j]) < 1e-14);
}

TEST_CASE("saturated clip removes the advantage gradient") {
  const PolicyParams old = PolicyParams::tabular({3, 2}, 0);
  PolicyParams cur = old;
  cur.at(0, 0) = 1.0;  // ratio of token 0 = 1.73, of token 1 = 0.64
  const TokenSeq prompt{0};
  const std::vector<GroupBatch> batches{make_group_batch(
      prompt, {make_rollout(old, prompt, {0}, 1.0), make_rollout(old, prompt, {1}, 0.0)},
      1e-6)};
  const ParamGradient clipped = grpo_gradient(cur, old, old, batches, 0.2, 0.0);
  CHECK(clipped.l2_norm() == 0.0);
  const ParamGradient open = grpo_gradient(cur, old, old, batches, 10.0, 0.0);
  CHECK(open.l2_norm() > 0.1);
}

TEST_CASE("gradient matches finite differences of the objective") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Instance inst = random_instance(derive_seed(43, {s}), 4, 3, 4);
    const ParamGradient g =
        grpo_gradient(inst.current, inst.old, inst.ref, inst.batches, 10.0, 0.1);
    const auto obj = [&](const PolicyParams& q) {
      return grpo_objective(q, inst.old, inst.ref, inst.batches, 10.0, 0.1);
    };
    CHECK(oracle::check_gradient("grpo", obj, inst.current, g).max_rel_error < 1e-4);
  }
}
