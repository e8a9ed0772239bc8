#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "helene/config.hpp"
#include "helene/harness.hpp"
#include "helene/theory_check.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitDiverged = 2;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
  std::vector<std::string> overrides;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw helene::ConfigError("<file>", "cannot open " + path);
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw helene::ConfigError("<file>", path + ": " + e.what());
  }
}

helene::ExperimentConfig load(const std::string& path, const Common& common) {
  json doc = read_json(path);
  for (const auto& o : common.overrides) {
    helene::apply_override(doc, o);
  }
  auto config = helene::config_from_json(doc);
  if (common.seed) {
    config.seed = *common.seed;
  }
  if (!common.out.empty()) {
    config.output_dir = common.out;
  }
  helene::validate(config);
  return config;
}

bool any_failed(const std::vector<helene::RunResult>& runs) {
  return std::any_of(runs.begin(), runs.end(),
                     [](const auto& r) { return r.status == helene::RunStatus::failed; });
}

int cmd_run(const std::string& path, const Common& common) {
  auto config = load(path, common);
  if (config.output_dir.empty()) {
    config.output_dir = "runs/" + (config.label.empty() ? config.optimizer.name : config.label);
  }
  const auto runs = helene::run(config, common.jobs);
  for (const auto& r : runs) {
    std::cout << r.summary().dump() << '\n';
    if (r.status == helene::RunStatus::failed) {
      std::cerr << "run diverged: " << r.diagnostic << '\n';
    }
  }
  return any_failed(runs) ? kExitDiverged : kExitOk;
}

int cmd_compare(const std::string& dir, const std::string& metric, const Common& common) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<helene::ExperimentConfig> configs;
  for (const auto& f : files) {
    auto c = load(f.string(), Common{common.seed, "", common.jobs, common.overrides});
    if (c.label.empty()) {
      c.label = f.stem().string();
    }
    configs.push_back(std::move(c));
  }
  std::vector<helene::RunResult> runs;
  const auto rows = helene::compare(configs, metric, common.jobs, &runs);
  std::cout << helene::format_compare_table(rows);
  if (!common.out.empty()) {
    for (const auto& r : runs) {
      helene::write_run_dir(r, (fs::path(common.out) / r.config.label).string());
    }
    std::vector<helene::PlotSeries> series;
    for (const auto& r : runs) {
      series.push_back(helene::loss_series(r, r.config.label));
    }
    helene::emit_plot(series, (fs::path(common.out) / "compare.svg").string(), "compare");
    std::ofstream(fs::path(common.out) / "ranking.txt") << helene::format_compare_table(rows);
  }
  return any_failed(runs) ? kExitDiverged : kExitOk;
}

int cmd_ablate(const std::string& kind, const std::string& path, const std::vector<double>& floors,
               const Common& common) {
  auto base = load(path, Common{common.seed, "", common.jobs, common.overrides});
  helene::AblationResult result;
  if (kind == "anneal") {
    result = helene::ablation_annealing(base, common.jobs);
  } else {
    result = helene::ablation_clip_floor(base, floors.empty() ? helene::kDefaultClipFloors : floors,
                                         common.jobs);
  }
  const std::string out = common.out.empty() ? "runs/ablate_" + kind : common.out;
  helene::write_ablation(result, out);
  bool failed = false;
  for (std::size_t v = 0; v < result.labels.size(); ++v) {
    double mean = 0.0;
    for (const auto& r : result.runs[v]) {
      mean += r.final_loss();
      failed = failed || r.status == helene::RunStatus::failed;
    }
    mean /= static_cast<double>(result.runs[v].size());
    std::printf("%-22s mean_final_loss=%.6g\n", result.labels[v].c_str(), mean);
  }
  std::cout << "wrote " << out << '\n';
  return failed ? kExitDiverged : kExitOk;
}

helene::TheoryInstance instance_from_json(const json& j) {
  std::vector<std::pair<std::string, std::size_t>> dims;
  for (const auto& l : j.at("layers")) {
    dims.emplace_back(l.at("name").get<std::string>(), l.at("dim").get<std::size_t>());
  }
  helene::QuadraticSpec quad;
  quad.layout = helene::make_layout(dims);
  quad.curvatures = j.at("curvatures").get<std::vector<double>>();
  quad.optimum = j.at("optimum").get<std::vector<double>>();
  quad.min_loss = j.value("min_loss", 0.0);
  auto init = j.at("init").get<std::vector<double>>();
  auto radius = j.value("radius", std::vector<double>{});
  auto inst = helene::make_theory_instance(std::move(quad), std::move(init),
                                           j.value("eps_loss", 1e-6), std::move(radius));
  inst.validate();
  return inst;
}

int cmd_theory(const std::string& path, const Common& common) {
  const json doc = read_json(path);
  std::vector<helene::TheoryInstance> instances;
  std::vector<std::string> names;
  try {
    if (doc.contains("random")) {
      const auto& r = doc["random"];
      helene::TheoryGenOptions opts;
      opts.max_layers = r.value("max_layers", opts.max_layers);
      opts.max_dim = r.value("max_dim", opts.max_dim);
      opts.eps_loss = r.value("eps_loss", opts.eps_loss);
      const std::uint64_t seed = common.seed.value_or(r.value("seed", std::uint64_t{0}));
      const std::size_t count = r.value("count", std::size_t{20});
      for (std::size_t i = 0; i < count; ++i) {
        instances.push_back(helene::random_theory_instance(seed + i, opts));
        names.push_back("random_" + std::to_string(seed + i));
      }
    }
    if (doc.contains("instances")) {
      for (const auto& j : doc["instances"]) {
        instances.push_back(instance_from_json(j));
        names.push_back(j.value("name", "instance_" + std::to_string(names.size())));
      }
    }
  } catch (const json::exception& e) {
    throw helene::ConfigError("instances", e.what());
  }
  if (instances.empty()) {
    throw helene::ConfigError("instances", "no instances given (use \"random\" or \"instances\")");
  }
  std::vector<json> rows(instances.size());
  std::vector<bool> ok(instances.size());
  helene::parallel_for(instances.size(), common.jobs, [&](std::size_t i) {
    const auto bound = helene::step_bound(instances[i]);
    const auto budget = static_cast<std::size_t>(std::max<long long>(2 * bound.steps, 1000));
    const auto report = helene::verify_bound(instances[i], budget);
    rows[i] = report.to_json(instances[i]);
    rows[i]["name"] = names[i];
    ok[i] = report.satisfied;
  });
  std::ofstream file;
  if (!common.out.empty()) {
    if (fs::path(common.out).has_parent_path()) {
      fs::create_directories(fs::path(common.out).parent_path());
    }
    file.open(common.out);
  }
  for (const auto& row : rows) {
    std::cout << row.dump() << '\n';
    if (file) {
      file << row.dump() << '\n';
    }
  }
  return std::all_of(ok.begin(), ok.end(), [](bool b) { return b; }) ? kExitOk : kExitDiverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zeroth-order optimizer benchmark harness"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "master seed override");
  app.add_option("--out", common.out, "output directory (or file for theory verify)");
  app.add_option("--jobs", common.jobs, "parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--override", common.overrides, "dotted-path config override key=value");

  std::string config_path;
  auto* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", config_path)->required();

  std::string compare_dir;
  std::string metric = "final_loss";
  auto* compare = app.add_subcommand("compare", "run and rank every config in a directory");
  compare->add_option("dir", compare_dir)->required()->check(CLI::ExistingDirectory);
  compare->add_option("--metric", metric, "final_loss|best_loss|tail_mean_loss|steps_to_threshold");

  std::string ablate_kind;
  std::string ablate_base;
  std::vector<double> floors;
  auto* ablate = app.add_subcommand("ablate", "annealing or clip-floor ablation");
  ablate->add_option("kind", ablate_kind)->required()->check(CLI::IsMember({"anneal", "clip"}));
  ablate->add_option("base", ablate_base)->required();
  ablate->add_option("--floors", floors, "clip floors for the sweep");

  std::string theory_path;
  auto* theory = app.add_subcommand("theory", "theory-mode checks");
  theory->require_subcommand(1);
  auto* verify = theory->add_subcommand("verify", "check the step bound on quadratic instances");
  verify->add_option("instances", theory_path)->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("dir", report_dir)->required();

  // global flags are accepted after the subcommand too
  for (auto* sub : {run, compare, ablate, theory, verify, report}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(config_path, common);
    if (*compare) return cmd_compare(compare_dir, metric, common);
    if (*ablate) return cmd_ablate(ablate_kind, ablate_base, floors, common);
    if (*verify) return cmd_theory(theory_path, common);
    if (*report) {
      std::cout << helene::report_run_dir(report_dir);
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}
