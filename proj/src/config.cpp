#include "helene/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "helene/problems.hpp"

namespace helene {

namespace {

using nlohmann::json;

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& path, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    return fallback;
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + key, std::string("wrong type (") + e.what() + ")");
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& path) {
  if (!obj.is_object()) {
    throw ConfigError(path.empty() ? "<root>" : path.substr(0, path.size() - 1),
                      "expected a JSON object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError(path + it.key(), "unknown field");
    }
  }
}

json problem_to_json(const ProblemConfig& p) {
  json j{{"name", p.name}};
  if (!p.init.empty()) {
    j["init"] = p.init;
  }
  if (p.name == "quadratic") {
    json layers = json::array();
    for (const auto& [name, dim] : p.layers) {
      layers.push_back({{"name", name}, {"dim", dim}});
    }
    j["layers"] = layers;
    j["curvatures"] = p.curvatures;
    j["optimum"] = p.optimum;
    j["min_loss"] = p.min_loss;
  } else if (p.name == "softmax") {
    j["generator"] = p.generator;
    if (p.generator == "file") {
      j["dataset_file"] = p.dataset_file;
    }
    j["n_classes"] = p.n_classes;
    j["n_features"] = p.n_features;
    j["n_per_class"] = p.n_per_class;
    j["n_examples"] = p.n_examples;
    j["imbalance_ratio"] = p.imbalance_ratio;
    j["separation"] = p.separation;
    j["noise"] = p.noise;
    j["feature_scale_spread"] = p.feature_scale_spread;
    j["teacher_scale"] = p.teacher_scale;
    j["data_seed"] = p.data_seed;
  }
  return j;
}

ProblemConfig problem_from_json(const json& j) {
  const std::string path = "problem.";
  reject_unknown(j,
                 {"name", "init", "layers", "curvatures", "optimum", "min_loss", "generator",
                  "dataset_file", "n_classes", "n_features", "n_per_class", "n_examples",
                  "imbalance_ratio", "separation", "noise", "feature_scale_spread",
                  "teacher_scale", "data_seed"},
                 path);
  ProblemConfig p;
  p.name = get_field<std::string>(j, "name", path, p.name);
  p.init = get_field<std::vector<double>>(j, "init", path, {});
  if (auto it = j.find("layers"); it != j.end()) {
    if (!it->is_array()) {
      throw ConfigError(path + "layers", "expected an array");
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& layer = (*it)[i];
      const std::string lp = path + "layers[" + std::to_string(i) + "].";
      reject_unknown(layer, {"name", "dim"}, lp);
      p.layers.emplace_back(get_field<std::string>(layer, "name", lp, "layer" + std::to_string(i)),
                            get_field<std::size_t>(layer, "dim", lp, 0));
    }
  }
  p.curvatures = get_field<std::vector<double>>(j, "curvatures", path, {});
  p.optimum = get_field<std::vector<double>>(j, "optimum", path, {});
  p.min_loss = get_field<double>(j, "min_loss", path, p.min_loss);
  p.generator = get_field<std::string>(j, "generator", path, p.generator);
  p.dataset_file = get_field<std::string>(j, "dataset_file", path, p.dataset_file);
  p.n_classes = get_field<std::size_t>(j, "n_classes", path, p.n_classes);
  p.n_features = get_field<std::size_t>(j, "n_features", path, p.n_features);
  p.n_per_class = get_field<std::size_t>(j, "n_per_class", path, p.n_per_class);
  p.n_examples = get_field<std::size_t>(j, "n_examples", path, p.n_examples);
  p.imbalance_ratio = get_field<double>(j, "imbalance_ratio", path, p.imbalance_ratio);
  p.separation = get_field<double>(j, "separation", path, p.separation);
  p.noise = get_field<double>(j, "noise", path, p.noise);
  p.feature_scale_spread = get_field<double>(j, "feature_scale_spread", path, p.feature_scale_spread);
  p.teacher_scale = get_field<double>(j, "teacher_scale", path, p.teacher_scale);
  p.data_seed = get_field<std::uint64_t>(j, "data_seed", path, p.data_seed);
  return p;
}

json optimizer_to_json(const OptimizerConfig& o) {
  json j{{"name", o.name},
         {"lr", o.lr},
         {"schedule", o.schedule},
         {"beta1", o.beta1},
         {"gamma", o.gamma},
         {"clip_floor", o.clip_floor},
         {"clip_floor_per_layer", o.clip_floor_per_layer},
         {"eps_num", o.eps_num},
         {"weight_decay", o.weight_decay},
         {"hessian_interval", o.hessian_interval},
         {"anneal_T", o.anneal_T},
         {"spsa_scale", o.spsa_scale},
         {"n_dirs", o.n_dirs},
         {"momentum_mode", o.momentum_mode},
         {"precondition", o.precondition},
         {"estimator", o.estimator},
         {"per_example_sum", o.per_example_sum},
         {"momentum", o.momentum},
         {"adam_eps", o.adam_eps},
         {"fd_step", o.fd_step}};
  if (o.beta2) {
    j["beta2"] = *o.beta2;
  }
  return j;
}

OptimizerConfig optimizer_from_json(const json& j) {
  const std::string path = "optimizer.";
  reject_unknown(j,
                 {"name", "lr", "schedule", "beta1", "beta2", "gamma", "clip_floor",
                  "clip_floor_per_layer", "eps_num", "weight_decay", "hessian_interval",
                  "anneal_T", "spsa_scale", "n_dirs", "momentum_mode", "precondition",
                  "estimator", "per_example_sum", "momentum", "adam_eps", "fd_step"},
                 path);
  OptimizerConfig o;
  o.name = get_field<std::string>(j, "name", path, o.name);
  o.lr = get_field<double>(j, "lr", path, o.lr);
  o.schedule = get_field<std::string>(j, "schedule", path, o.schedule);
  o.beta1 = get_field<double>(j, "beta1", path, o.beta1);
  if (j.contains("beta2") && !j.at("beta2").is_null()) {
    o.beta2 = get_field<double>(j, "beta2", path, 0.0);
  }
  o.gamma = get_field<double>(j, "gamma", path, o.gamma);
  o.clip_floor = get_field<double>(j, "clip_floor", path, o.clip_floor);
  o.clip_floor_per_layer =
      get_field<std::map<std::string, double>>(j, "clip_floor_per_layer", path, {});
  o.eps_num = get_field<double>(j, "eps_num", path, o.eps_num);
  o.weight_decay = get_field<double>(j, "weight_decay", path, o.weight_decay);
  o.hessian_interval = get_field<std::size_t>(j, "hessian_interval", path, o.hessian_interval);
  o.anneal_T = get_field<double>(j, "anneal_T", path, o.anneal_T);
  o.spsa_scale = get_field<double>(j, "spsa_scale", path, o.spsa_scale);
  o.n_dirs = get_field<std::size_t>(j, "n_dirs", path, o.n_dirs);
  o.momentum_mode = get_field<std::string>(j, "momentum_mode", path, o.momentum_mode);
  o.precondition = get_field<bool>(j, "precondition", path, o.precondition);
  o.estimator = get_field<std::string>(j, "estimator", path, o.estimator);
  o.per_example_sum = get_field<bool>(j, "per_example_sum", path, o.per_example_sum);
  o.momentum = get_field<double>(j, "momentum", path, o.momentum);
  o.adam_eps = get_field<double>(j, "adam_eps", path, o.adam_eps);
  o.fd_step = get_field<double>(j, "fd_step", path, o.fd_step);
  return o;
}

const std::set<std::string> kOptimizers = {"helene",    "zo_sgd",      "zo_sgd_mmt", "zo_adam",
                                           "zo_sophia", "newton_diag", "fo_gd",      "fo_adam"};

LrSchedule make_schedule(const OptimizerConfig& o, std::size_t steps) {
  LrSchedule s;
  s.base = o.lr;
  s.total_steps = steps;
  if (o.schedule == "constant") {
    s.kind = LrSchedule::Kind::constant;
  } else if (o.schedule == "linear") {
    s.kind = LrSchedule::Kind::linear;
  } else if (o.schedule == "cosine") {
    s.kind = LrSchedule::Kind::cosine;
  } else {
    throw ConfigError("optimizer.schedule", "unknown schedule '" + o.schedule + "'");
  }
  return s;
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& c) {
  json j{{"schema_version", c.schema_version},
         {"label", c.label},
         {"problem", problem_to_json(c.problem)},
         {"optimizer", optimizer_to_json(c.optimizer)},
         {"steps", c.steps},
         {"batch_size", c.batch_size},
         {"seed", c.seed},
         {"repetitions", c.repetitions},
         {"output_dir", c.output_dir},
         {"record_wall_time", c.record_wall_time}};
  j["threshold"] = c.threshold ? json(*c.threshold) : json(nullptr);
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"schema_version", "label", "problem", "optimizer", "steps", "batch_size", "seed",
                  "repetitions", "output_dir", "threshold", "record_wall_time"},
                 "");
  ExperimentConfig c;
  if (!j.contains("schema_version")) {
    throw ConfigError("schema_version", "missing");
  }
  c.schema_version = get_field<int>(j, "schema_version", "", 0);
  c.label = get_field<std::string>(j, "label", "", "");
  if (!j.contains("problem")) {
    throw ConfigError("problem", "missing");
  }
  if (!j.contains("optimizer")) {
    throw ConfigError("optimizer", "missing");
  }
  c.problem = problem_from_json(j.at("problem"));
  c.optimizer = optimizer_from_json(j.at("optimizer"));
  c.steps = get_field<std::size_t>(j, "steps", "", c.steps);
  c.batch_size = get_field<std::size_t>(j, "batch_size", "", c.batch_size);
  c.seed = get_field<std::uint64_t>(j, "seed", "", c.seed);
  c.repetitions = get_field<std::size_t>(j, "repetitions", "", c.repetitions);
  c.output_dir = get_field<std::string>(j, "output_dir", "", "");
  if (j.contains("threshold") && !j.at("threshold").is_null()) {
    c.threshold = get_field<double>(j, "threshold", "", 0.0);
  }
  c.record_wall_time = get_field<bool>(j, "record_wall_time", "", false);
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.schema_version != kConfigSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(c.schema_version));
  }
  if (c.batch_size == 0) {
    throw ConfigError("batch_size", "must be >= 1");
  }
  if (c.repetitions == 0) {
    throw ConfigError("repetitions", "must be >= 1");
  }
  const auto& p = c.problem;
  if (p.name == "quadratic") {
    if (p.curvatures.empty()) {
      throw ConfigError("problem.curvatures", "must be non-empty");
    }
    if (p.optimum.size() != p.curvatures.size()) {
      throw ConfigError("problem.optimum", "length must match curvatures");
    }
    for (double v : p.curvatures) {
      if (!(v > 0.0)) {
        throw ConfigError("problem.curvatures", "entries must be > 0");
      }
    }
    std::size_t total = 0;
    for (const auto& [name, dim] : p.layers) {
      if (dim == 0) {
        throw ConfigError("problem.layers", "layer '" + name + "' has dim 0");
      }
      total += dim;
    }
    if (!p.layers.empty() && total != p.curvatures.size()) {
      throw ConfigError("problem.layers", "dims must sum to the number of curvatures");
    }
    if (!p.init.empty() && p.init.size() != p.curvatures.size()) {
      throw ConfigError("problem.init", "length must match curvatures");
    }
  } else if (p.name == "toy2d") {
    if (!p.init.empty() && p.init.size() != 2) {
      throw ConfigError("problem.init", "toy2d needs exactly 2 values");
    }
  } else if (p.name == "softmax") {
    if (p.generator != "blobs" && p.generator != "teacher" && p.generator != "file") {
      throw ConfigError("problem.generator", "must be blobs, teacher or file");
    }
    if (p.n_classes < 2) {
      throw ConfigError("problem.n_classes", "must be >= 2");
    }
    if (p.n_features == 0) {
      throw ConfigError("problem.n_features", "must be >= 1");
    }
    if (p.imbalance_ratio < 1.0) {
      throw ConfigError("problem.imbalance_ratio", "must be >= 1");
    }
    if (p.generator == "file" && p.dataset_file.empty()) {
      throw ConfigError("problem.dataset_file", "required when generator is 'file'");
    }
  } else {
    throw ConfigError("problem.name", "unknown problem '" + p.name + "'");
  }

  const auto& o = c.optimizer;
  if (!kOptimizers.count(o.name)) {
    throw ConfigError("optimizer.name", "unknown optimizer '" + o.name + "'");
  }
  if (!(o.lr >= 0.0) || !std::isfinite(o.lr)) {
    throw ConfigError("optimizer.lr", "must be finite and >= 0");
  }
  make_schedule(o, c.steps);
  if (o.momentum_mode != "annealed" && o.momentum_mode != "ema" && o.momentum_mode != "accumulate") {
    throw ConfigError("optimizer.momentum_mode", "must be annealed, ema or accumulate");
  }
  if (o.estimator != "agnb" && o.estimator != "gnb") {
    throw ConfigError("optimizer.estimator", "must be agnb or gnb");
  }
  if (o.name == "helene") {
    try {
      helene_hypers(o, c.steps).validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      // HeleneHypers::validate reports "helene.<field>: ..."
      std::string what = e.what();
      const auto colon = what.find(':');
      std::string field = what.substr(0, colon);
      if (field.rfind("helene.", 0) == 0) {
        field = "optimizer." + field.substr(7);
      }
      throw ConfigError(field, colon == std::string::npos ? what : what.substr(colon + 2));
    }
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("<file>", "cannot open " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--override", "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) {
      throw ConfigError(key, "empty path component");
    }
    path.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object()) {
      throw ConfigError(key, "'" + path[i] + "' is not an object");
    }
    node = &(*node)[path[i]];
    if (node->is_null()) {
      *node = json::object();
    }
  }
  if (!node->is_object()) {
    throw ConfigError(key, "parent is not an object");
  }
  (*node)[path.back()] = value;
}

std::unique_ptr<Problem> build_problem(const ProblemConfig& p) {
  if (p.name == "quadratic") {
    QuadraticSpec spec;
    spec.curvatures = p.curvatures;
    spec.optimum = p.optimum;
    spec.min_loss = p.min_loss;
    spec.layout = p.layers.empty() ? make_layout({{"all", p.curvatures.size()}}) : make_layout(p.layers);
    return std::make_unique<QuadraticProblem>(std::move(spec));
  }
  if (p.name == "toy2d") {
    return std::make_unique<Toy2DProblem>();
  }
  if (p.name == "softmax") {
    Dataset data;
    if (p.generator == "blobs") {
      BlobOptions opts;
      opts.separation = p.separation;
      opts.noise = p.noise;
      opts.feature_scale_spread = p.feature_scale_spread;
      data = make_gaussian_blobs(p.n_classes, p.n_features, p.n_per_class, p.data_seed,
                                 p.imbalance_ratio, opts);
    } else if (p.generator == "teacher") {
      data = make_teacher_dataset(p.n_classes, p.n_features, p.n_examples, p.data_seed,
                                  p.teacher_scale);
    } else {
      std::ifstream in(p.dataset_file);
      if (!in) {
        throw ConfigError("problem.dataset_file", "cannot open " + p.dataset_file);
      }
      data = read_dataset(in, p.n_classes);
    }
    return std::make_unique<SoftmaxProblem>(std::move(data));
  }
  throw ConfigError("problem.name", "unknown problem '" + p.name + "'");
}

LayeredParams initial_params(const ProblemConfig& config, const Problem& problem) {
  const std::size_t d = problem.dimension();
  std::vector<double> data(d, 0.0);
  if (!config.init.empty()) {
    if (config.init.size() != d) {
      throw ConfigError("problem.init", "length " + std::to_string(config.init.size()) +
                                            " does not match dimension " + std::to_string(d));
    }
    data = config.init;
  } else if (config.name == "toy2d") {
    data = {-0.2, 0.5};
  }
  return LayeredParams(problem.layout(), std::move(data));
}

HeleneHypers helene_hypers(const OptimizerConfig& o, std::size_t steps) {
  HeleneHypers h;
  h.lr = make_schedule(o, steps);
  h.beta1 = o.beta1;
  h.beta2 = o.beta2.value_or(0.99);
  h.gamma = o.gamma;
  h.clip_floor.fallback = o.clip_floor;
  h.clip_floor.per_layer = o.clip_floor_per_layer;
  h.eps_num = o.eps_num;
  h.weight_decay = o.weight_decay;
  h.hessian_interval = o.hessian_interval;
  h.anneal_T = o.anneal_T;
  h.max_steps = steps;
  h.spsa_scale = o.spsa_scale;
  h.n_dirs = o.n_dirs;
  if (o.momentum_mode == "annealed") {
    h.momentum = MomentumMode::annealed;
  } else if (o.momentum_mode == "ema") {
    h.momentum = MomentumMode::ema;
  } else {
    h.momentum = MomentumMode::accumulate;
  }
  h.precondition = o.precondition;
  h.estimator = o.estimator == "gnb" ? CurvatureEstimator::gnb : CurvatureEstimator::agnb;
  h.per_example_sum = o.per_example_sum;
  if (h.anneal_T <= 0.0 && steps == 0) {
    h.anneal_T = 1.0;
  }
  return h;
}

std::unique_ptr<Optimizer> build_optimizer(const OptimizerConfig& o, std::size_t d,
                                           std::size_t steps) {
  const LrSchedule lr = make_schedule(o, steps);
  if (o.name == "helene") {
    return std::make_unique<HeleneOptimizer>(d, helene_hypers(o, steps));
  }
  if (o.name == "zo_sgd" || o.name == "zo_sgd_mmt") {
    ZoSgdHypers h;
    h.lr = lr;
    h.momentum = o.momentum;
    h.weight_decay = o.weight_decay;
    h.spsa_scale = o.spsa_scale;
    h.n_dirs = o.n_dirs;
    if (o.name == "zo_sgd") {
      return std::make_unique<ZoSgd>(h);
    }
    return std::make_unique<ZoSgdMomentum>(d, h);
  }
  if (o.name == "zo_adam" || o.name == "fo_adam") {
    AdamHypers h;
    h.lr = lr;
    h.beta1 = o.beta1;
    h.beta2 = o.beta2.value_or(0.999);
    h.eps = o.adam_eps;
    h.weight_decay = o.weight_decay;
    h.spsa_scale = o.spsa_scale;
    h.n_dirs = o.n_dirs;
    return std::make_unique<Adam>(d, h, o.name == "zo_adam");
  }
  if (o.name == "zo_sophia") {
    SophiaHypers h;
    h.lr = lr;
    h.beta1 = o.beta1;
    h.beta2 = o.beta2.value_or(0.99);
    h.gamma = o.gamma;
    h.eps_num = o.eps_num;
    h.weight_decay = o.weight_decay;
    h.hessian_interval = o.hessian_interval;
    h.spsa_scale = o.spsa_scale;
    return std::make_unique<ZoSophia>(d, h);
  }
  if (o.name == "newton_diag") {
    return std::make_unique<NewtonDiag>(lr, o.fd_step);
  }
  if (o.name == "fo_gd") {
    return std::make_unique<GradientDescent>(lr);
  }
  throw ConfigError("optimizer.name", "unknown optimizer '" + o.name + "'");
}

}  // namespace helene
