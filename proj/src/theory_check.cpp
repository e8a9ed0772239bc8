#include "helene/theory_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace helene {

namespace {

double layer_distance(const QuadraticSpec& q, std::span<const double> params, std::size_t layer) {
  const auto& spec = q.layout.at(layer);
  double acc = 0.0;
  for (std::size_t j = spec.offset; j < spec.offset + spec.dim; ++j) {
    const double r = params[j] - q.optimum[j];
    acc += r * r;
  }
  return std::sqrt(acc);
}

}  // namespace

void TheoryInstance::validate() const {
  QuadraticProblem check(quad);  // validates the quadratic
  const std::size_t layers = quad.layout.size();
  if (init.size() != quad.curvatures.size()) {
    throw std::invalid_argument("theory instance: init has wrong length");
  }
  if (radius.size() != layers || mu.size() != layers || lambda.size() != layers) {
    throw std::invalid_argument("theory instance: per-layer vectors have wrong length");
  }
  if (!(eps_loss > 0.0)) {
    throw std::invalid_argument("theory instance: eps_loss must be > 0");
  }
  for (std::size_t i = 0; i < layers; ++i) {
    if (!(lambda[i] > 0.0)) {
      throw std::invalid_argument("theory instance: lambda must be > 0");
    }
    if (layer_distance(quad, init, i) > radius[i] * (1.0 + 1e-12)) {
      throw std::invalid_argument("theory instance: layer " + quad.layout[i].name +
                                  " starts outside its radius");
    }
  }
}

TheoryInstance make_theory_instance(QuadraticSpec quad, std::vector<double> init, double eps_loss,
                                    std::vector<double> radius) {
  TheoryInstance inst;
  inst.quad = std::move(quad);
  inst.init = std::move(init);
  inst.eps_loss = eps_loss;
  const std::size_t layers = inst.quad.layout.size();
  if (radius.empty()) {
    for (std::size_t i = 0; i < layers; ++i) {
      const double r = layer_distance(inst.quad, inst.init, i);
      radius.push_back(r > 0.0 ? r : 1.0);
    }
  }
  inst.radius = std::move(radius);
  inst.mu = quadratic_layer_mu(inst.quad);
  inst.lambda.resize(layers);
  for (std::size_t i = 0; i < std::min(layers, inst.radius.size()); ++i) {
    inst.lambda[i] =
        inst.radius[i] / (2.0 * std::sqrt(static_cast<double>(inst.quad.layout[i].dim)));
  }
  inst.validate();
  return inst;
}

TheoryInstance random_theory_instance(std::uint64_t seed, const TheoryGenOptions& options) {
  if (options.max_layers == 0 || options.max_dim == 0) {
    throw std::invalid_argument("theory generator: max_layers and max_dim must be >= 1");
  }
  std::mt19937_64 engine(seed);
  std::uniform_int_distribution<std::size_t> layer_count(1, options.max_layers);
  std::uniform_int_distribution<std::size_t> layer_dim(1, options.max_dim);
  std::uniform_real_distribution<double> curvature(options.min_curvature, options.max_curvature);
  std::uniform_real_distribution<double> offset(options.min_offset, options.max_offset);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<std::pair<std::string, std::size_t>> dims;
  const std::size_t layers = layer_count(engine);
  for (std::size_t i = 0; i < layers; ++i) {
    dims.emplace_back("layer" + std::to_string(i), layer_dim(engine));
  }
  QuadraticSpec quad;
  quad.layout = make_layout(dims);
  quad.min_loss = unit(engine);
  const std::size_t d = quad.layout.back().offset + quad.layout.back().dim;
  std::vector<double> init(d);
  for (std::size_t j = 0; j < d; ++j) {
    quad.curvatures.push_back(curvature(engine));
    quad.optimum.push_back(unit(engine));
    const double delta = offset(engine);
    init[j] = quad.optimum[j] + (coin(engine) ? delta : -delta);
  }
  return make_theory_instance(std::move(quad), std::move(init), options.eps_loss);
}

void theory_step(const TheoryInstance& instance, std::span<double> params) {
  const auto& q = instance.quad;
  if (params.size() != q.curvatures.size()) {
    throw std::invalid_argument("theory_step: parameter length mismatch");
  }
  for (std::size_t i = 0; i < q.layout.size(); ++i) {
    const double lambda = instance.lambda[i];
    const auto& spec = q.layout[i];
    for (std::size_t j = spec.offset; j < spec.offset + spec.dim; ++j) {
      // Newton direction g_j / c_j for a diagonal quadratic.
      const double newton = (q.curvatures[j] * (params[j] - q.optimum[j])) / q.curvatures[j];
      params[j] -= instance.eta * std::clamp(newton, -lambda, lambda);
    }
  }
}

double theory_excess(const TheoryInstance& instance, std::span<const double> params) {
  double total = 0.0;
  for (std::size_t i = 0; i < instance.quad.layout.size(); ++i) {
    total += quadratic_layer_excess(instance.quad, i, params);
  }
  return total;
}

BoundResult step_bound(const TheoryInstance& instance) {
  if (!(instance.eps_loss > 0.0)) {
    throw std::invalid_argument("step_bound: eps_loss must be > 0");
  }
  BoundResult result;
  result.value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < instance.quad.layout.size(); ++i) {
    const double d_i = static_cast<double>(instance.quad.layout[i].dim);
    const double excess = quadratic_layer_excess(instance.quad, i, instance.init);
    double term = d_i * excess;
    const double arg = instance.mu[i] * instance.radius[i] * instance.radius[i] /
                       (32.0 * d_i * instance.eps_loss);
    if (arg > 1.0) {
      term += std::log(arg);
    } else {
      result.degenerate = true;
    }
    if (term > result.value) {
      result.value = term;
      result.dominant_layer = i;
    }
  }
  result.steps = static_cast<long long>(std::ceil(result.value));
  return result;
}

VerifyReport verify_bound(const TheoryInstance& instance, std::size_t max_steps) {
  instance.validate();
  VerifyReport report;
  report.bound = step_bound(instance);
  if (static_cast<long long>(max_steps) < report.bound.steps) {
    throw std::invalid_argument("verify_bound: max_steps is below the bound");
  }
  std::vector<double> theta = instance.init;
  report.excess.push_back(theory_excess(instance, theta));
  while (report.excess.back() > instance.eps_loss && report.steps_taken < max_steps) {
    theory_step(instance, theta);
    ++report.steps_taken;
    report.excess.push_back(theory_excess(instance, theta));
  }
  report.converged = report.excess.back() <= instance.eps_loss;
  report.satisfied =
      report.converged && static_cast<long long>(report.steps_taken) <= report.bound.steps;
  return report;
}

nlohmann::json VerifyReport::to_json(const TheoryInstance& instance) const {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& spec : instance.quad.layout) {
    dims.push_back(spec.dim);
  }
  return {{"layers", instance.quad.layout.size()},
          {"layer_dims", dims},
          {"eps_loss", instance.eps_loss},
          {"initial_excess", excess.empty() ? 0.0 : excess.front()},
          {"bound", bound.steps},
          {"bound_value", bound.value},
          {"bound_degenerate", bound.degenerate},
          {"steps", steps_taken},
          {"converged", converged},
          {"satisfied", satisfied}};
}

double max_ratio_after(const std::vector<double>& excess, double threshold) {
  double worst = 0.0;
  bool inside = false;
  for (std::size_t t = 0; t + 1 < excess.size(); ++t) {
    if (!inside && excess[t] <= threshold) {
      inside = true;
    }
    if (inside && excess[t] > 0.0) {
      worst = std::max(worst, excess[t + 1] / excess[t]);
    }
  }
  return worst;
}

}  // namespace helene
