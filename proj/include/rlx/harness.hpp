#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlx/agent.hpp"
#include "rlx/envs.hpp"
#include "rlx/policies.hpp"

namespace rlx {

enum class EnvironmentKind { kCartPole, kBandit };

std::string_view environment_name(EnvironmentKind env);
EnvironmentKind parse_environment(std::string_view name);

struct NetworkConfig {
  std::vector<Eigen::Index> hidden{64, 64};
  double dropout_rate = 0.1;  // hidden layers only
};

struct ExperimentConfig {
  EnvironmentKind environment = EnvironmentKind::kCartPole;
  std::vector<PolicySpec> strategies;
  std::vector<std::uint64_t> seeds{0};
  int episodes = 500;            // cartpole
  std::int64_t pulls = 100000;   // bandit
  std::uint64_t master_seed = 0;
  AgentConfig agent;
  NetworkConfig network;
  CartPoleParams cartpole;
  BanditSpec bandit;
  double solved_threshold = 195.0;
  int window = 100;
  int jobs = 1;  // worker threads; <= 0 means one per hardware thread
  bool no_timing = false;
  bool save_checkpoints = false;  // final online network of each run
  std::string out_dir = "out";

  void validate() const;
  // Input and output sizes follow the environment.
  LayerDims layer_dims() const;
};

/// Default strategy parameters per environment. The bandit uses a fixed
/// epsilon of 0.1 and a fixed temperature of 0.1.
PolicySpec default_policy(StrategyKind kind, EnvironmentKind env);

/// One row of records.csv: an episode (cartpole) or a pull (bandit).
struct RunRecord {
  std::string strategy;
  std::uint64_t seed = 0;
  std::int64_t episode = 0;
  double episode_return = 0;
  double schedule_value = 0;
  std::int64_t env_steps = 0;  // cumulative
  double wall_ms = 0;

  bool operator==(const RunRecord&) const = default;
};

// Dropout uncertainty of a finished bayes-dropout run at the upright,
// motionless cart-pole state.
struct RunDiagnostics {
  std::string strategy;
  std::uint64_t seed = 0;
  ActionUncertainty uncertainty;
};

struct RunCheckpoint {
  std::string strategy;
  std::uint64_t seed = 0;
  QNetworkd network;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<RunDiagnostics> diagnostics;
  std::vector<RunCheckpoint> checkpoints;  // cartpole only
};

/// Runs every (strategy, seed) pair of the grid, in parallel when
/// config.jobs != 1. Records come back in canonical order (strategy list
/// order, then seed list order, then episode) whatever the scheduling.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Tabular bandit runs: Q initialized to 0, incremental-mean updates.
/// bayes-dropout has no table; it samples from a small network fed a
/// constant input and trained on each pull's reward.
ExperimentResult run_bandit_suite(const ExperimentConfig& config);

// Trailing mean; the first window-1 entries average the available prefix.
std::vector<double> moving_average(std::span<const double> series, int window);

struct RunSummary {
  std::uint64_t seed = 0;
  double final_mean = 0;      // mean of the last `window` returns
  double best_moving_average = 0;
  std::optional<std::int64_t> episodes_to_threshold;
  double mean_return = 0;
};

struct StrategySummary {
  std::string strategy;
  std::vector<RunSummary> runs;
  double mean_final = 0;
  double std_final = 0;  // population std across seeds
  double best_ma_mean = 0;
  double best_ma_median = 0;
  // Median over seeds with unreached runs counted as infinite.
  std::optional<double> episodes_to_threshold;
  int solved_runs = 0;
  double mean_return = 0;
};

struct Summary {
  double threshold = 195.0;
  int window = 100;
  std::vector<StrategySummary> strategies;  // first-appearance order
  std::vector<std::string> ranking;         // by mean_final, descending

  const StrategySummary* find(std::string_view strategy) const;
};

Summary summarize(const std::vector<RunRecord>& records, double threshold = 195.0,
                  int window = 100);

/// Whether boltzmann and bayes-dropout both rank strictly above every one of
/// greedy, random and eps-greedy that is present. Empty if either of the
/// two is missing from the summary.
std::optional<bool> ordering_observed(const Summary& summary);

// records.csv: strategy,seed,episode,return,schedule_value,env_steps,wall_ms
void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_csv(std::istream& in);
void emit_csv(const std::vector<RunRecord>& records, const std::string& path);
std::vector<RunRecord> load_records_csv(const std::string& path);

void write_summary_csv(std::ostream& out, const Summary& summary);
void emit_csv(const Summary& summary, const std::string& path);

void write_report(std::ostream& out, const ExperimentConfig& config,
                  const ExperimentResult& result, const Summary& summary);

/// records.csv, summary.csv and report.md under config.out_dir (created if
/// missing), plus <strategy>_seed<N>.qnet per run when save_checkpoints is
/// set. Returns the summary.
Summary write_outputs(const ExperimentConfig& config,
                      const ExperimentResult& result);

}  // namespace rlx
