#ifndef EGSW_CONFIG_HPP_
#define EGSW_CONFIG_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egsw/oracle.hpp"
#include "egsw/tasks.hpp"
#include "egsw/trainer.hpp"

namespace egsw {

// Experiment config files are flat INI-style text:
//
//   # comment
//   [task]
//   name = copy
//   vocab_size = 8
//
// Sections: task, train, egsw, run, gradcheck. Unknown sections or keys,
// duplicate keys and malformed values are rejected with a diagnostic of the
// form "<file>:<line>: <message>".

struct RawEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;  // 0 for programmatic overrides
};

struct RawConfig {
  std::string source;
  std::vector<RawEntry> entries;

  const RawEntry* find(const std::string& section,
                       const std::string& key) const;
  // Replaces an existing entry or appends a new one.
  void set(const std::string& section, const std::string& key,
           const std::string& value);
};

RawConfig parse_raw_config(const std::string& text, const std::string& source);
RawConfig read_raw_config(const std::string& path);

struct RunConfig {
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds{0};
  int flush_interval = 1;
  double threshold = 0.9;
  int threshold_window = 20;
  bool record_wall_clock = false;
};

struct ExperimentConfig {
  Task task;
  TrainConfig train;
  RunConfig run;
  oracle::GradcheckOptions gradcheck;
  RawConfig raw;
};

ExperimentConfig build_config(const RawConfig& raw);
ExperimentConfig load_config(const std::string& path);

// True if `section.key` names a recognised config parameter.
bool is_known_parameter(const std::string& section, const std::string& key);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace egsw

#endif  // EGSW_CONFIG_HPP_
