#include "egsw/tasks.hpp"

#include <algorithm>

#include "egsw/error.hpp"
#include "egsw/rng.hpp"

namespace egsw {

namespace {

// Maps a uniform index in [0, size - 1) onto the non-eos tokens.
Token non_eos_token(const Vocab& vocab, std::uint64_t index) {
  const auto t = static_cast<Token>(index);
  return t >= vocab.eos ? t + 1 : t;
}

std::span<const Token> content_of(const Vocab& vocab,
                                  std::span<const Token> completion) {
  const auto end = std::find(completion.begin(), completion.end(), vocab.eos);
  return completion.first(static_cast<std::size_t>(end - completion.begin()));
}

double overlap_fraction(std::span<const Token> target,
                        std::span<const Token> content) {
  const std::size_t n = std::min(target.size(), content.size());
  int hits = 0;
  for (std::size_t j = 0; j < n; ++j) hits += target[j] == content[j];
  return static_cast<double>(hits) / static_cast<double>(target.size());
}

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy:
      return "copy";
    case TaskKind::kReverse:
      return "reverse";
    case TaskKind::kModSum:
      return "mod_sum";
    case TaskKind::kSparseTreasure:
      return "sparse_treasure";
  }
  return "unknown";
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "reverse") return TaskKind::kReverse;
  if (name == "mod_sum") return TaskKind::kModSum;
  if (name == "sparse_treasure") return TaskKind::kSparseTreasure;
  throw InputError("unknown task '" + name + "'");
}

void Task::validate() const {
  vocab.validate();
  if (prompt_len < 1) throw InputError("prompt_len must be >= 1");
  if (max_completion_len < 1) {
    throw InputError("max_completion_len must be >= 1");
  }
  if (prompt_pool < 0) throw InputError("prompt_pool must be >= 0");
  if (kind == TaskKind::kModSum && modulus < 2) {
    throw InputError("mod_sum modulus must be >= 2");
  }
  if (kind == TaskKind::kSparseTreasure) {
    if (secret.empty()) throw InputError("sparse_treasure needs a secret");
    if (static_cast<int>(secret.size()) > max_completion_len) {
      throw InputError("secret longer than max_completion_len");
    }
    for (Token t : secret) {
      if (!vocab.contains(t) || t == vocab.eos) {
        throw InputError("secret tokens must be non-eos vocabulary tokens");
      }
    }
  }
}

TokenSeq make_secret(const Vocab& vocab, int length, std::uint64_t seed) {
  vocab.validate();
  Rng rng(derive_seed(seed, {0x5ec7e7}));
  TokenSeq s(static_cast<std::size_t>(length));
  for (Token& t : s) t = non_eos_token(vocab, rng.below(vocab.size - 1));
  return s;
}

TokenSeq generate_prompt(const Task& task, std::uint64_t rng_seed) {
  std::uint64_t stream = rng_seed;
  if (task.prompt_pool > 0) {
    const std::uint64_t slot = mix64(rng_seed) % task.prompt_pool;
    stream = derive_seed(task.task_seed, {0x9001, slot});
  }
  Rng rng(stream);
  TokenSeq prompt(static_cast<std::size_t>(task.prompt_len));
  for (Token& t : prompt) {
    t = non_eos_token(task.vocab, rng.below(task.vocab.size - 1));
  }
  return prompt;
}

double score(const Task& task, std::span<const Token> prompt,
             std::span<const Token> completion) {
  const std::span<const Token> content = content_of(task.vocab, completion);
  switch (task.kind) {
    case TaskKind::kCopy:
      return overlap_fraction(prompt, content);
    case TaskKind::kReverse: {
      const TokenSeq reversed(prompt.rbegin(), prompt.rend());
      return overlap_fraction(reversed, content);
    }
    case TaskKind::kModSum: {
      long long prompt_sum = 0;
      long long content_sum = 0;
      for (Token t : prompt) prompt_sum += t;
      for (Token t : content) content_sum += t;
      return (prompt_sum % task.modulus) == (content_sum % task.modulus) ? 1.0
                                                                          : 0.0;
    }
    case TaskKind::kSparseTreasure: {
      const std::size_t s = task.secret.size();
      if (content.size() < s) return 0.0;
      return std::equal(task.secret.begin(), task.secret.end(),
                        content.end() - static_cast<std::ptrdiff_t>(s))
                 ? 1.0
                 : 0.0;
    }
  }
  return 0.0;
}

}  // namespace egsw
