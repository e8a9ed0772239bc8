#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "helene/problem.hpp"
#include "helene/rand_perturb.hpp"

namespace helene {

/// Default SPSA perturbation scale.
inline constexpr double kDefaultSpsaScale = 1e-3;

/// Rank-one SPSA gradient: g = projected * z, with z regenerated from the handle.
struct SpsaEstimate {
  PerturbationHandle handle;
  double projected = 0.0;
  double loss_plus = 0.0;
  double loss_minus = 0.0;

  /// Central estimate of the minibatch loss at the unperturbed point.
  double mean_loss() const { return 0.5 * (loss_plus + loss_minus); }
};

/// Raised when a perturbed loss evaluation is NaN or infinite.
class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(int side, double value);
  int side() const { return side_; }  // +1 or -1

 private:
  int side_;
};

/// Two-point SPSA estimate (L(theta + eps z) - L(theta - eps z)) / (2 eps).
/// `params` is walked +1, -2, +1 and restored in place (up to rounding); the
/// batch is held fixed for both evaluations.
SpsaEstimate spsa_gradient(const Problem& problem, std::span<double> params, const Batch& batch,
                           const PerturbationHandle& handle);

/// Dense projected * z.
std::vector<double> materialize_gradient(const SpsaEstimate& estimate, std::size_t d);

/// Mean of `n_dirs` single-direction estimates with seeds derive_seed(base_seed, i).
std::vector<double> spsa_gradient_averaged(const Problem& problem, std::span<double> params,
                                           const Batch& batch, std::size_t n_dirs,
                                           std::uint64_t base_seed,
                                           double scale = kDefaultSpsaScale);

}  // namespace helene
