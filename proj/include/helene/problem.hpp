#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "helene/param_store.hpp"

namespace helene {

/// A minibatch: example indices into a problem's dataset. Problems without a
/// dataset (closed-form objectives) ignore the indices. `labels`, when set,
/// replaces the true labels of the selected examples (used by the
/// sampled-label GNB estimator).
struct Batch {
  std::vector<std::size_t> indices;
  std::optional<std::vector<int>> labels;
  std::uint64_t seed = 0;

  /// Number of examples B; closed-form objectives count as a single example.
  std::size_t size() const { return indices.empty() ? 1 : indices.size(); }
};

/// Deterministic batch of B distinct indices drawn from [0, n).
/// B >= n yields the full dataset in order.
Batch sample_batch(std::size_t n, std::size_t batch_size, std::uint64_t seed);

/// Full-dataset batch (all indices in order, or empty for closed-form objectives).
Batch full_batch(std::size_t n);

/// Forward-only objective. `loss` must be deterministic given (params, batch).
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual Layout layout() const { return make_layout({{"all", dimension()}}); }

  virtual double loss(std::span<const double> params, const Batch& batch) const = 0;

  /// Number of examples; 0 for closed-form objectives.
  virtual std::size_t dataset_size() const { return 0; }

  virtual bool has_exact_gradient() const { return false; }
  /// Gradient of `loss(params, batch)`. Throws std::logic_error if unsupported.
  virtual void exact_gradient(std::span<const double> params, const Batch& batch,
                              std::span<double> out) const;

  virtual bool has_categorical_outputs() const { return false; }
  /// Per-example class probabilities for the examples in `batch`.
  virtual std::vector<std::vector<double>> class_probabilities(std::span<const double> params,
                                                               const Batch& batch) const;

  /// Optimal loss value if known analytically or by a reference solve.
  virtual std::optional<double> reference_min_loss() const { return std::nullopt; }

  /// Loss on the whole objective (full dataset for data-backed problems).
  double full_loss(std::span<const double> params) const {
    return loss(params, full_batch(dataset_size()));
  }
};

}  // namespace helene
