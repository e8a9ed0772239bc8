#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "helene/optim.hpp"
#include "helene/problem.hpp"

namespace helene {

inline constexpr int kConfigSchemaVersion = 1;

/// Validation failure with the dotted path of the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ProblemConfig {
  std::string name = "quadratic";  // quadratic | toy2d | softmax
  std::vector<double> init;        // empty: zeros (softmax) or problem default

  // quadratic
  std::vector<std::pair<std::string, std::size_t>> layers;
  std::vector<double> curvatures;
  std::vector<double> optimum;
  double min_loss = 0.0;

  // softmax
  std::string generator = "blobs";  // blobs | teacher | file
  std::string dataset_file;
  std::size_t n_classes = 3;
  std::size_t n_features = 4;
  std::size_t n_per_class = 100;  // blobs
  std::size_t n_examples = 1000;  // teacher
  double imbalance_ratio = 1.0;
  double separation = 2.0;
  double noise = 1.0;
  double feature_scale_spread = 1.0;
  double teacher_scale = 1.0;
  std::uint64_t data_seed = 0;

  bool operator==(const ProblemConfig&) const = default;
};

struct OptimizerConfig {
  // helene | zo_sgd | zo_sgd_mmt | zo_adam | zo_sophia | newton_diag | fo_gd | fo_adam
  std::string name = "helene";
  double lr = 1e-3;
  std::string schedule = "constant";  // constant | linear | cosine
  double beta1 = 0.9;
  std::optional<double> beta2;  // default 0.99 (helene, sophia) or 0.999 (adam)
  double gamma = 1.0;
  double clip_floor = 1.0;
  std::map<std::string, double> clip_floor_per_layer;
  double eps_num = 1e-12;
  double weight_decay = 0.0;
  std::size_t hessian_interval = 10;
  double anneal_T = 0.0;  // <= 0: step budget
  double spsa_scale = kDefaultSpsaScale;
  std::size_t n_dirs = 1;
  std::string momentum_mode = "annealed";  // annealed | ema | accumulate
  bool precondition = true;
  std::string estimator = "agnb";  // agnb | gnb
  bool per_example_sum = false;
  double momentum = 0.9;    // zo_sgd_mmt
  double adam_eps = 1e-8;   // adam
  double fd_step = 1e-3;    // newton_diag

  bool operator==(const OptimizerConfig&) const = default;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string label;
  ProblemConfig problem;
  OptimizerConfig optimizer;
  std::size_t steps = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t repetitions = 1;
  std::string output_dir;
  std::optional<double> threshold;  // absolute loss; default: half of the initial excess
  bool record_wall_time = false;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Parses and validates; throws ConfigError with a field path.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& config);

/// Applies "a.b.c=value" to a JSON document. `value` is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

std::unique_ptr<Problem> build_problem(const ProblemConfig& config);
LayeredParams initial_params(const ProblemConfig& config, const Problem& problem);
std::unique_ptr<Optimizer> build_optimizer(const OptimizerConfig& config, std::size_t dimension,
                                           std::size_t steps);
HeleneHypers helene_hypers(const OptimizerConfig& config, std::size_t steps);

}  // namespace helene
