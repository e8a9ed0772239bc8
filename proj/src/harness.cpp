#include "helene/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "helene/rand_perturb.hpp"

namespace helene {

namespace fs = std::filesystem;

std::size_t TrajectoryRecord::clip_triggers_total() const {
  std::size_t total = 0;
  for (auto c : clip_triggers) {
    total += c;
  }
  return total;
}

double RunResult::final_loss() const {
  return trajectory.empty() ? initial_loss : trajectory.back().loss;
}

double RunResult::best_loss() const {
  double best = initial_loss;
  for (const auto& r : trajectory) {
    best = std::min(best, r.loss);
  }
  return best;
}

double RunResult::tail_mean_loss() const {
  if (trajectory.empty()) {
    return initial_loss;
  }
  const std::size_t n = std::max<std::size_t>(1, trajectory.size() / 10);
  double acc = 0.0;
  for (std::size_t i = trajectory.size() - n; i < trajectory.size(); ++i) {
    acc += trajectory[i].loss;
  }
  return acc / static_cast<double>(n);
}

std::optional<std::size_t> RunResult::steps_to_threshold() const {
  if (!threshold) {
    return std::nullopt;
  }
  if (initial_loss <= *threshold) {
    return 0;
  }
  for (const auto& r : trajectory) {
    if (r.loss <= *threshold) {
      return r.t;
    }
  }
  return std::nullopt;
}

std::size_t RunResult::total_forwards() const {
  return trajectory.empty() ? 0 : trajectory.back().forwards;
}

nlohmann::json RunResult::summary() const {
  nlohmann::json j{{"label", config.label},
                   {"optimizer", config.optimizer.name},
                   {"problem", config.problem.name},
                   {"repetition", repetition},
                   {"status", status == RunStatus::ok ? "OK" : "FAILED"},
                   {"steps_requested", config.steps},
                   {"steps_completed", trajectory.size()},
                   {"initial_loss", initial_loss},
                   {"final_loss", final_loss()},
                   {"best_loss", best_loss()},
                   {"tail_mean_loss", tail_mean_loss()},
                   {"total_forwards", total_forwards()},
                   {"state_vectors", state_vectors},
                   {"state_doubles", state_doubles}};
  j["reference_min_loss"] = reference_min_loss ? nlohmann::json(*reference_min_loss) : nullptr;
  j["threshold"] = threshold ? nlohmann::json(*threshold) : nullptr;
  const auto hit = steps_to_threshold();
  j["steps_to_threshold"] = hit ? nlohmann::json(*hit) : nullptr;
  if (!diagnostic.empty()) {
    j["diagnostic"] = diagnostic;
  }
  return j;
}

std::uint64_t run_seed(std::uint64_t master, std::size_t rep) { return derive_seed(master, rep); }

RunResult run_single(const ExperimentConfig& config, std::size_t repetition) {
  validate(config);
  RunResult result;
  result.config = config;
  result.repetition = repetition;

  const auto problem = build_problem(config.problem);
  LayeredParams params = initial_params(config.problem, *problem);
  auto optimizer = build_optimizer(config.optimizer, problem->dimension(), config.steps);
  result.state_vectors = optimizer->state_vectors();
  result.state_doubles = optimizer->state_doubles();
  result.reference_min_loss = problem->reference_min_loss();
  result.initial_loss = problem->full_loss(params.values());
  if (config.threshold) {
    result.threshold = config.threshold;
  } else if (result.reference_min_loss) {
    result.threshold =
        result.initial_loss - 0.5 * (result.initial_loss - *result.reference_min_loss);
  }

  const std::uint64_t seed = run_seed(config.seed, repetition);
  const std::size_t n = problem->dataset_size();
  const auto start = std::chrono::steady_clock::now();
  std::size_t forwards = 0;
  result.trajectory.reserve(config.steps);
  for (std::size_t t = 1; t <= config.steps; ++t) {
    const Batch batch = sample_batch(n, config.batch_size, derive_seed(seed, 2 * t));
    const StepRecord step = optimizer->step(*problem, params, batch, derive_seed(seed, 2 * t + 1));
    forwards += step.forwards;
    if (step.diverged) {
      result.status = RunStatus::failed;
      result.diagnostic = "step " + std::to_string(t) + ": " + step.diagnostic;
      break;
    }
    TrajectoryRecord rec;
    rec.t = t;
    rec.loss = problem->full_loss(params.values());
    rec.step_norm = step.step_norm;
    rec.alpha = step.alpha;
    rec.clip_triggers = step.clip_triggers;
    rec.clip_triggers.resize(params.num_layers(), 0);
    rec.forwards = forwards;
    if (config.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              start)
                        .count();
    }
    result.trajectory.push_back(std::move(rec));
    if (!std::isfinite(result.trajectory.back().loss)) {
      result.status = RunStatus::failed;
      result.diagnostic = "step " + std::to_string(t) + ": non-finite loss";
      break;
    }
  }
  result.final_params.assign(params.values().begin(), params.values().end());
  return result;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& w : workers) {
    w.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

std::string variant_dir(const std::string& root, std::size_t reps, std::size_t rep) {
  if (reps <= 1) {
    return root;
  }
  return (fs::path(root) / ("rep_" + std::to_string(rep))).string();
}

}  // namespace

std::string trajectory_csv(const RunResult& result) {
  std::ostringstream csv;
  csv << kTrajectoryHeader << '\n';
  for (const auto& r : result.trajectory) {
    csv << r.t << ',' << fmt_double(r.loss) << ',' << fmt_double(r.step_norm) << ','
        << fmt_double(r.alpha) << ',' << r.clip_triggers_total() << ',';
    for (std::size_t i = 0; i < r.clip_triggers.size(); ++i) {
      csv << (i ? ";" : "") << r.clip_triggers[i];
    }
    csv << ',' << r.forwards << ',' << fmt_double(r.wall_ms) << '\n';
  }
  return csv.str();
}

PlotSeries loss_series(const RunResult& result, const std::string& label) {
  PlotSeries s;
  s.label = label;
  const double offset = result.reference_min_loss.value_or(0.0);
  s.x.push_back(0.0);
  s.y.push_back(result.initial_loss - offset);
  for (const auto& r : result.trajectory) {
    s.x.push_back(static_cast<double>(r.t));
    s.y.push_back(r.loss - offset);
  }
  return s;
}

void write_run_dir(const RunResult& result, const std::string& dir) {
  fs::create_directories(dir);
  ExperimentConfig as_run = result.config;
  as_run.output_dir = dir;
  write_text(fs::path(dir) / "config.json", to_json(as_run).dump(2) + "\n");
  write_text(fs::path(dir) / "trajectory.csv", trajectory_csv(result));
  write_text(fs::path(dir) / "summary.json", result.summary().dump(2) + "\n");
  const std::string label =
      result.config.label.empty() ? result.config.optimizer.name : result.config.label;
  PlotReport report;
  const std::string svg = render_svg({loss_series(result, label)},
                                     result.reference_min_loss ? "excess loss" : "loss", &report);
  write_text(fs::path(dir) / "plot.svg", svg);
  if (report.skipped > 0) {
    std::cerr << "warning: " << report.skipped << " non-finite loss rows skipped in plot\n";
  }
}

std::vector<RunResult> run(const ExperimentConfig& config, std::size_t jobs) {
  validate(config);
  std::vector<RunResult> results(config.repetitions);
  parallel_for(config.repetitions, jobs, [&](std::size_t rep) {
    results[rep] = run_single(config, rep);
    if (!config.output_dir.empty()) {
      write_run_dir(results[rep], variant_dir(config.output_dir, config.repetitions, rep));
    }
  });
  return results;
}

std::vector<CompareRow> compare(const std::vector<ExperimentConfig>& configs,
                                const std::string& metric, std::size_t jobs,
                                std::vector<RunResult>* runs) {
  if (configs.empty()) {
    throw std::invalid_argument("compare: empty config list");
  }
  static const std::vector<std::string> kMetrics = {"final_loss", "best_loss", "tail_mean_loss",
                                                    "steps_to_threshold"};
  if (std::find(kMetrics.begin(), kMetrics.end(), metric) == kMetrics.end()) {
    throw std::invalid_argument("compare: unknown metric '" + metric + "'");
  }
  for (const auto& c : configs) {
    if (!(c.problem == configs.front().problem) || c.steps != configs.front().steps) {
      throw std::invalid_argument("compare: configs must share problem and step budget ('" +
                                  c.label + "' differs)");
    }
  }
  std::vector<RunResult> results(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) { results[i] = run_single(configs[i], 0); });

  std::vector<CompareRow> rows;
  for (const auto& r : results) {
    CompareRow row;
    row.label = r.config.label.empty() ? r.config.optimizer.name : r.config.label;
    row.optimizer = r.config.optimizer.name;
    row.final_loss = r.final_loss();
    row.best_loss = r.best_loss();
    row.tail_mean_loss = r.tail_mean_loss();
    row.steps_to_threshold = r.steps_to_threshold();
    row.failed = r.status == RunStatus::failed;
    rows.push_back(std::move(row));
  }
  auto key = [&](const CompareRow& row) -> double {
    if (row.failed) {
      return std::numeric_limits<double>::infinity();
    }
    if (metric == "final_loss") return row.final_loss;
    if (metric == "best_loss") return row.best_loss;
    if (metric == "tail_mean_loss") return row.tail_mean_loss;
    return row.steps_to_threshold ? static_cast<double>(*row.steps_to_threshold)
                                  : std::numeric_limits<double>::infinity();
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const CompareRow& a, const CompareRow& b) { return key(a) < key(b); });
  if (runs != nullptr) {
    *runs = std::move(results);
  }
  return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-24s %-12s %14s %14s %14s %10s\n", "rank", "label",
                "optimizer", "final_loss", "best_loss", "tail_mean", "steps_thr");
  out << line;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string steps =
        r.steps_to_threshold ? std::to_string(*r.steps_to_threshold) : std::string("-");
    std::snprintf(line, sizeof line, "%-4zu %-24s %-12s %14.6g %14.6g %14.6g %10s%s\n", i + 1,
                  r.label.c_str(), r.optimizer.c_str(), r.final_loss, r.best_loss,
                  r.tail_mean_loss, steps.c_str(), r.failed ? "  FAILED" : "");
    out << line;
  }
  return out.str();
}

std::vector<ExperimentConfig> annealing_variants(const ExperimentConfig& base) {
  if (base.optimizer.name != "helene") {
    throw ConfigError("optimizer.name", "annealing ablation needs a helene base config");
  }
  std::vector<ExperimentConfig> out;
  auto variant = [&](const std::string& label) {
    ExperimentConfig c = base;
    c.label = label;
    c.output_dir.clear();
    return c;
  };
  auto mezo = variant("mezo");
  mezo.optimizer.name = "zo_sgd";
  out.push_back(mezo);

  auto momentum = variant("mezo_momentum");
  momentum.optimizer.momentum_mode = "ema";
  momentum.optimizer.precondition = false;
  out.push_back(momentum);

  auto biased = variant("mezo_momentum_bias");
  biased.optimizer.momentum_mode = "accumulate";
  biased.optimizer.precondition = false;
  out.push_back(biased);

  auto full = variant("helene");
  full.optimizer.momentum_mode = "annealed";
  full.optimizer.precondition = true;
  out.push_back(full);
  return out;
}

std::vector<ExperimentConfig> clip_floor_variants(const ExperimentConfig& base,
                                                  const std::vector<double>& floors) {
  if (base.optimizer.name != "helene") {
    throw ConfigError("optimizer.name", "clip-floor ablation needs a helene base config");
  }
  if (floors.empty()) {
    throw std::invalid_argument("clip-floor ablation: no floors given");
  }
  std::vector<ExperimentConfig> out;
  for (double floor : floors) {
    if (!(floor > 0.0)) {
      throw ConfigError("floors", "every floor must be > 0");
    }
    ExperimentConfig c = base;
    char label[32];
    std::snprintf(label, sizeof label, "floor_%g", floor);
    c.label = label;
    c.output_dir.clear();
    c.optimizer.clip_floor = floor;
    for (auto& [name, value] : c.optimizer.clip_floor_per_layer) {
      value = floor;
    }
    out.push_back(c);
  }
  return out;
}

namespace {

AblationResult run_variants(std::vector<ExperimentConfig> configs, std::size_t jobs) {
  AblationResult result;
  for (const auto& c : configs) {
    validate(c);
    result.labels.push_back(c.label);
  }
  result.runs.resize(configs.size());
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t v = 0; v < configs.size(); ++v) {
    result.runs[v].resize(configs[v].repetitions);
    for (std::size_t r = 0; r < configs[v].repetitions; ++r) {
      tasks.emplace_back(v, r);
    }
  }
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const auto [v, r] = tasks[i];
    result.runs[v][r] = run_single(configs[v], r);
  });
  result.configs = std::move(configs);
  return result;
}

}  // namespace

AblationResult ablation_annealing(const ExperimentConfig& base, std::size_t jobs) {
  return run_variants(annealing_variants(base), jobs);
}

AblationResult ablation_clip_floor(const ExperimentConfig& base, const std::vector<double>& floors,
                                   std::size_t jobs) {
  return run_variants(clip_floor_variants(base, floors), jobs);
}

void write_ablation(const AblationResult& result, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "t";
  for (const auto& label : result.labels) {
    csv << ',' << label;
  }
  csv << '\n';
  std::size_t rows = 0;
  for (const auto& reps : result.runs) {
    rows = std::max(rows, reps.front().trajectory.size());
  }
  for (std::size_t i = 0; i < rows; ++i) {
    csv << i + 1;
    for (const auto& reps : result.runs) {
      const auto& traj = reps.front().trajectory;
      csv << ',' << (i < traj.size() ? fmt_double(traj[i].loss) : std::string());
    }
    csv << '\n';
  }
  write_text(fs::path(dir) / "curves.csv", csv.str());

  nlohmann::json summary = nlohmann::json::array();
  std::vector<PlotSeries> series;
  for (std::size_t v = 0; v < result.runs.size(); ++v) {
    nlohmann::json variant{{"label", result.labels[v]},
                           {"config", to_json(result.configs[v])},
                           {"runs", nlohmann::json::array()}};
    double mean_final = 0.0;
    for (const auto& r : result.runs[v]) {
      variant["runs"].push_back(r.summary());
      mean_final += r.final_loss();
    }
    variant["mean_final_loss"] = mean_final / static_cast<double>(result.runs[v].size());
    summary.push_back(std::move(variant));
    series.push_back(loss_series(result.runs[v].front(), result.labels[v]));
  }
  write_text(fs::path(dir) / "summary.json", summary.dump(2) + "\n");
  emit_plot(series, (fs::path(dir) / "plot.svg").string(), "ablation");
}

std::string report_run_dir(const std::string& dir) {
  const fs::path summary_path = fs::path(dir) / "summary.json";
  std::ifstream in(summary_path);
  if (!in) {
    throw std::runtime_error("no summary.json in " + dir);
  }
  nlohmann::json summary;
  in >> summary;
  std::ostringstream out;
  out << "run directory: " << dir << '\n';
  for (auto it = summary.begin(); it != summary.end(); ++it) {
    out << "  " << it.key() << ": " << it.value().dump() << '\n';
  }
  std::ifstream csv(fs::path(dir) / "trajectory.csv");
  if (csv) {
    std::size_t lines = 0;
    std::string line;
    while (std::getline(csv, line)) {
      ++lines;
    }
    out << "  trajectory rows: " << (lines > 0 ? lines - 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace helene
