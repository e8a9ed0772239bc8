#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "helene/config.hpp"
#include "helene/plot.hpp"

namespace helene {

/// One row of trajectory.csv.
struct TrajectoryRecord {
  std::size_t t = 0;
  double loss = 0.0;  // full-objective loss after step t
  double step_norm = 0.0;
  double alpha = 0.0;
  std::vector<std::size_t> clip_triggers;  // per layer
  std::size_t forwards = 0;                // cumulative optimizer loss evaluations
  double wall_ms = 0.0;                    // cumulative; 0 unless record_wall_time

  std::size_t clip_triggers_total() const;
};

inline constexpr const char* kTrajectoryHeader =
    "t,loss,step_norm,alpha,clip_triggers_total,clip_triggers_per_layer,forwards,wall_ms";

enum class RunStatus { ok, failed };

struct RunResult {
  ExperimentConfig config;
  std::size_t repetition = 0;
  std::vector<TrajectoryRecord> trajectory;
  double initial_loss = 0.0;
  std::optional<double> reference_min_loss;
  std::optional<double> threshold;
  RunStatus status = RunStatus::ok;
  std::string diagnostic;
  std::size_t state_vectors = 0;
  std::size_t state_doubles = 0;
  std::vector<double> final_params;

  double final_loss() const;
  double best_loss() const;
  /// Mean loss over the last 10% of steps (at least one step).
  double tail_mean_loss() const;
  std::optional<std::size_t> steps_to_threshold() const;
  std::size_t total_forwards() const;
  nlohmann::json summary() const;
};

/// Seed stream for repetition `rep` of a config with master seed `seed`.
std::uint64_t run_seed(std::uint64_t master, std::size_t rep);

/// Executes one repetition in memory.
RunResult run_single(const ExperimentConfig& config, std::size_t repetition = 0);

/// Executes all repetitions across `jobs` workers and writes the per-run
/// directories (config.json, trajectory.csv, summary.json, plot.svg) when
/// config.output_dir is set. Repetitions > 1 use output_dir/rep_<k>.
std::vector<RunResult> run(const ExperimentConfig& config, std::size_t jobs = 1);

std::string trajectory_csv(const RunResult& result);
void write_run_dir(const RunResult& result, const std::string& dir);

/// Loss curve for plotting: excess over the reference minimum when known.
PlotSeries loss_series(const RunResult& result, const std::string& label);

struct CompareRow {
  std::string label;
  std::string optimizer;
  double final_loss = 0.0;
  double best_loss = 0.0;
  double tail_mean_loss = 0.0;
  std::optional<std::size_t> steps_to_threshold;
  bool failed = false;
};

/// Runs every config (first repetition) and ranks by metric: final_loss,
/// best_loss, tail_mean_loss or steps_to_threshold. All configs must share
/// problem and step budget.
std::vector<CompareRow> compare(const std::vector<ExperimentConfig>& configs,
                                const std::string& metric, std::size_t jobs = 1,
                                std::vector<RunResult>* runs = nullptr);
std::string format_compare_table(const std::vector<CompareRow>& rows);

struct AblationResult {
  std::vector<std::string> labels;
  std::vector<ExperimentConfig> configs;
  std::vector<std::vector<RunResult>> runs;  // [variant][repetition]
};

/// MeZO, MeZO + momentum (alpha = 1 - beta1), MeZO + momentum + bias
/// (alpha = 1), and full HELENE, all from one HELENE base config.
std::vector<ExperimentConfig> annealing_variants(const ExperimentConfig& base);
AblationResult ablation_annealing(const ExperimentConfig& base, std::size_t jobs = 1);

inline const std::vector<double> kDefaultClipFloors = {0.9, 1.0, 2.0, 3.0};
std::vector<ExperimentConfig> clip_floor_variants(const ExperimentConfig& base,
                                                  const std::vector<double>& floors);
AblationResult ablation_clip_floor(const ExperimentConfig& base,
                                   const std::vector<double>& floors = kDefaultClipFloors,
                                   std::size_t jobs = 1);

/// Writes curves.csv (t, one column per variant, first repetition),
/// summary.json (per variant and repetition), and plot.svg into `dir`.
void write_ablation(const AblationResult& result, const std::string& dir);

/// Human-readable summary of a run directory.
std::string report_run_dir(const std::string& dir);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace helene
