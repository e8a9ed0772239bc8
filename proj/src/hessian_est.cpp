#include "helene/hessian_est.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace helene {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(what) + ": non-finite gradient");
    }
  }
}

std::vector<double> mode_gradient(const Problem& problem, std::span<double> params,
                                  const Batch& batch, const GradMode& mode) {
  if (std::holds_alternative<ExactGrad>(mode)) {
    if (!problem.has_exact_gradient()) {
      throw std::logic_error("EXACT gradient mode requested but problem '" + problem.name() +
                             "' has no exact gradient");
    }
    std::vector<double> g(params.size());
    problem.exact_gradient(params, batch, g);
    return g;
  }
  const auto& spsa = std::get<SpsaGrad>(mode);
  return materialize_gradient(spsa_gradient(problem, params, batch, spsa.handle), params.size());
}

Batch single_example(const Batch& batch, std::size_t position) {
  Batch one;
  one.seed = batch.seed;
  one.indices = {batch.indices.at(position)};
  if (batch.labels) {
    one.labels = std::vector<int>{batch.labels->at(position)};
  }
  return one;
}

DiagHessianEstimate gauss_newton_pipeline(const Problem& problem, std::span<double> params,
                                          const Batch& batch, const GradMode& mode,
                                          const GnbOptions& options, HessianSource source) {
  const std::size_t b = batch.size();
  if (!options.per_example_sum || batch.indices.size() <= 1) {
    auto g = mode_gradient(problem, params, batch, mode);
    require_finite(g, "gauss-newton estimator");
    auto est = agnb_from_gradient(g, b);
    est.source = source;
    return est;
  }
  DiagHessianEstimate est{std::vector<double>(params.size(), 0.0), source};
  for (std::size_t i = 0; i < batch.indices.size(); ++i) {
    const auto g = mode_gradient(problem, params, single_example(batch, i), mode);
    require_finite(g, "gauss-newton estimator");
    for (std::size_t j = 0; j < g.size(); ++j) {
      est.values[j] += g[j] * g[j];
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.indices.size());
  for (auto& v : est.values) {
    v *= inv_b;
  }
  return est;
}

}  // namespace

DiagHessianEstimate agnb_from_gradient(std::span<const double> grad, std::size_t batch_size) {
  if (batch_size == 0) {
    throw std::invalid_argument("A-GNB: batch size must be >= 1");
  }
  DiagHessianEstimate est{std::vector<double>(grad.size()), HessianSource::agnb};
  const double scale = static_cast<double>(batch_size);
  for (std::size_t j = 0; j < grad.size(); ++j) {
    est.values[j] = scale * grad[j] * grad[j];
  }
  return est;
}

DiagHessianEstimate agnb_from_spsa(const SpsaEstimate& estimate, std::size_t d,
                                   std::size_t batch_size) {
  const auto g = materialize_gradient(estimate, d);
  return agnb_from_gradient(g, batch_size);
}

DiagHessianEstimate agnb_diag(const Problem& problem, std::span<double> params, const Batch& batch,
                              const GradMode& mode, const GnbOptions& options) {
  if (batch.labels) {
    throw std::invalid_argument("A-GNB uses the true labels; batch carries a label override");
  }
  return gauss_newton_pipeline(problem, params, batch, mode, options, HessianSource::agnb);
}

std::vector<int> sample_labels(const std::vector<std::vector<double>>& probabilities,
                               std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<int> labels;
  labels.reserve(probabilities.size());
  for (const auto& row : probabilities) {
    const double u = uniform(engine);
    double acc = 0.0;
    int label = static_cast<int>(row.size()) - 1;
    for (std::size_t c = 0; c < row.size(); ++c) {
      acc += row[c];
      if (u < acc) {
        label = static_cast<int>(c);
        break;
      }
    }
    labels.push_back(label);
  }
  return labels;
}

DiagHessianEstimate gnb_diag(const Problem& problem, std::span<double> params, const Batch& batch,
                             std::uint64_t label_seed, const GradMode& mode,
                             const GnbOptions& options) {
  if (!problem.has_categorical_outputs()) {
    throw std::logic_error("GNB needs categorical outputs; problem '" + problem.name() +
                           "' has none");
  }
  Batch sampled = batch;
  if (sampled.indices.empty()) {
    sampled = full_batch(problem.dataset_size());
  }
  sampled.labels = sample_labels(problem.class_probabilities(params, sampled), label_seed);
  return gauss_newton_pipeline(problem, params, sampled, mode, options, HessianSource::gnb);
}

DiagHessianEstimate fd_diag_hessian(const Problem& problem, std::span<const double> params,
                                    const Batch& batch, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("fd_diag_hessian: step must be > 0");
  }
  std::vector<double> theta(params.begin(), params.end());
  const double center = problem.loss(theta, batch);
  if (!std::isfinite(center)) {
    throw std::runtime_error("fd_diag_hessian: non-finite loss at the centre point");
  }
  DiagHessianEstimate est{std::vector<double>(theta.size()), HessianSource::fd_oracle, center};
  const double inv_h2 = 1.0 / (step * step);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double saved = theta[j];
    theta[j] = saved + step;
    const double plus = problem.loss(theta, batch);
    theta[j] = saved - step;
    const double minus = problem.loss(theta, batch);
    theta[j] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw std::runtime_error("fd_diag_hessian: non-finite loss at coordinate " +
                               std::to_string(j));
    }
    est.values[j] = (plus - 2.0 * center + minus) * inv_h2;
  }
  return est;
}

}  // namespace helene
