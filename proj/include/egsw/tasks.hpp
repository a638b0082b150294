#ifndef EGSW_TASKS_HPP_
#define EGSW_TASKS_HPP_

#include <cstdint>
#include <span>
#include <string>

#include "egsw/policy.hpp"

namespace egsw {

enum class TaskKind { kCopy, kReverse, kModSum, kSparseTreasure };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

// Synthetic prompt distribution plus programmatic verifier.
//
// Prompt tokens are drawn uniformly from the non-eos tokens. A non-zero
// `prompt_pool` restricts prompts to that many fixed prompts derived from
// `task_seed`. With `fixed_length`, rollouts run to `max_completion_len`
// without stopping at eos; scoring still truncates at the first eos.
struct Task {
  TaskKind kind = TaskKind::kCopy;
  Vocab vocab;
  int prompt_len = 1;
  int max_completion_len = 1;
  int modulus = 10;   // mod_sum
  TokenSeq secret;    // sparse_treasure
  int prompt_pool = 0;
  std::uint64_t task_seed = 0;
  bool fixed_length = false;

  void validate() const;
};

// Secret suffix of `length` non-eos tokens, deterministic in `seed`.
TokenSeq make_secret(const Vocab& vocab, int length, std::uint64_t seed);

TokenSeq generate_prompt(const Task& task, std::uint64_t rng_seed);

// Terminal reward in [0, 1]. `completion` may carry a trailing eos; only the
// tokens before the first eos are scored.
double score(const Task& task, std::span<const Token> prompt,
             std::span<const Token> completion);

}  // namespace egsw

#endif  // EGSW_TASKS_HPP_
