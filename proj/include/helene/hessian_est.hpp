#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "helene/problem.hpp"
#include "helene/rand_perturb.hpp"
#include "helene/zo_grad.hpp"

namespace helene {

enum class HessianSource { agnb, gnb, fd_oracle };

struct DiagHessianEstimate {
  std::vector<double> values;
  HessianSource source = HessianSource::agnb;
  double center_loss = 0.0;  // fd oracle only
};

/// Gradient used inside the Gauss-Newton-Bartlett estimators: the problem's
/// exact gradient (validation only) or an SPSA estimate with a given direction.
struct ExactGrad {};
struct SpsaGrad {
  PerturbationHandle handle;
};
using GradMode = std::variant<ExactGrad, SpsaGrad>;

struct GnbOptions {
  // false: B * g_hat (.) g_hat with g_hat the mean-loss gradient (A-GNB as an algorithm).
  // true:  (1/B) sum_b g_b (.) g_b over per-example gradients.
  bool per_example_sum = false;
};

/// B * g (.) g for an already computed mean-loss gradient g.
DiagHessianEstimate agnb_from_gradient(std::span<const double> grad, std::size_t batch_size);

/// Same, for a rank-one SPSA gradient; z is regenerated from the estimate's seed.
DiagHessianEstimate agnb_from_spsa(const SpsaEstimate& estimate, std::size_t d,
                                   std::size_t batch_size);

/// A-GNB: squared-gradient diagonal Hessian estimate using the true labels.
DiagHessianEstimate agnb_diag(const Problem& problem, std::span<double> params, const Batch& batch,
                              const GradMode& mode, const GnbOptions& options = {});

/// Labels drawn from each row's categorical distribution, deterministic in seed.
std::vector<int> sample_labels(const std::vector<std::vector<double>>& probabilities,
                               std::uint64_t seed);

/// Sampled-label GNB: the A-GNB pipeline with labels drawn from the model's
/// own output distribution. Requires a problem with categorical outputs.
DiagHessianEstimate gnb_diag(const Problem& problem, std::span<double> params, const Batch& batch,
                             std::uint64_t label_seed, const GradMode& mode,
                             const GnbOptions& options = {});

/// Central second difference per coordinate; 2d + 1 loss evaluations.
DiagHessianEstimate fd_diag_hessian(const Problem& problem, std::span<const double> params,
                                    const Batch& batch, double step = 1e-3);

}  // namespace helene
