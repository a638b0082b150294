#ifndef EGSW_HARNESS_HPP_
#define EGSW_HARNESS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "egsw/config.hpp"
#include "egsw/trainer.hpp"

namespace egsw {

struct CliOptions {
  std::optional<std::string> out_dir;
  std::optional<std::vector<std::uint64_t>> seeds;
  bool quiet = false;
};

// Per-seed digest of one training run.
struct RunSummary {
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::kGrpo;
  int updates = 0;
  double final_mean_reward = 0.0;   // trailing-window mean at the last update
  double auc_reward = 0.0;          // mean of per-update mean reward
  std::optional<int> updates_to_threshold;
  double length_digest[4] = {0.0, 0.0, 0.0, 0.0};  // mean length by quarter
  bool failed = false;
};

// First 1-based update whose trailing-`window` mean reward is >= threshold.
// Windows shorter than `window` (the first updates) are averaged as they are.
std::optional<int> updates_to_threshold(const std::vector<double>& rewards,
                                        double threshold, int window);
double trailing_mean(const std::vector<double>& rewards, std::size_t end,
                     int window);

RunSummary summarize(const TrainMetrics& metrics, std::uint64_t seed,
                     Algorithm algorithm, double threshold, int window);

nlohmann::json header_record(const ExperimentConfig& cfg, std::uint64_t seed);
nlohmann::json update_record(const UpdateRecord& rec, bool wall_clock);

extern const char* const kSummaryCsvHeader;
void write_summary_csv(const std::string& path,
                       const std::vector<RunSummary>& rows);

struct SeedRun {
  RunSummary summary;
  TrainMetrics metrics;
  std::string error;  // empty on success
};

// Trains one seed, streaming records to `metrics_path`. A TrainingError is
// recorded in the file as an error record and reported through `error`.
SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                 const std::string& metrics_path);

std::string metrics_file_name(std::uint64_t seed);

// Runs every seed of `cfg` into `out_dir` and writes summary.csv there.
std::vector<SeedRun> run_experiment(const ExperimentConfig& cfg,
                                    const std::string& out_dir,
                                    std::ostream* log);

// Subcommands. Each returns a process exit status and reports diagnostics
// on `err`.
int cmd_train(const std::string& config_path, const CliOptions& opts,
              std::ostream& out, std::ostream& err);
int cmd_compare(const std::string& config_grpo, const std::string& config_egsw,
                const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const std::optional<std::string>& config_path,
                  const std::string& corrupt, const CliOptions& opts,
                  std::ostream& out, std::ostream& err);
int cmd_sweep(const std::string& config_path, const std::string& sweep_spec,
              const CliOptions& opts, std::ostream& out, std::ostream& err);

struct SweepAxis {
  std::string section;
  std::string key;
  std::vector<std::string> values;
};

// Sweep spec lines have the form "section.key = v1, v2, ...".
std::vector<SweepAxis> parse_sweep_spec(const std::string& text,
                                        const std::string& source);

std::string format_report(const oracle::CheckResult& r);

}  // namespace egsw

#endif  // EGSW_HARNESS_HPP_
