#include "helene/zo_grad.hpp"

#include <cmath>

namespace helene {

NonFiniteLossError::NonFiniteLossError(int side, double value)
    : std::runtime_error(std::string("non-finite loss (") + std::to_string(value) +
                         ") at the " + (side > 0 ? "+" : "-") + "eps perturbed point"),
      side_(side) {}

namespace {

// Restores params to theta on scope exit, whichever point of the walk we reached.
class WalkGuard {
 public:
  WalkGuard(std::span<double> params, const PerturbationHandle& handle)
      : params_(params), handle_(handle) {}
  ~WalkGuard() {
    if (offset_ != 0) {
      perturb_in_place(params_, handle_, -offset_);
    }
  }
  void step(int sign) {
    perturb_in_place(params_, handle_, sign);
    offset_ += sign;
  }

 private:
  std::span<double> params_;
  PerturbationHandle handle_;
  int offset_ = 0;
};

}  // namespace

SpsaEstimate spsa_gradient(const Problem& problem, std::span<double> params, const Batch& batch,
                           const PerturbationHandle& handle) {
  if (!(handle.scale > 0.0)) {
    throw std::invalid_argument("spsa_gradient: perturbation scale must be > 0");
  }
  SpsaEstimate est;
  est.handle = handle;
  {
    WalkGuard walk(params, handle);
    walk.step(+1);
    est.loss_plus = problem.loss(params, batch);
    if (!std::isfinite(est.loss_plus)) {
      throw NonFiniteLossError(+1, est.loss_plus);
    }
    walk.step(-2);
    est.loss_minus = problem.loss(params, batch);
    if (!std::isfinite(est.loss_minus)) {
      throw NonFiniteLossError(-1, est.loss_minus);
    }
    walk.step(+1);
  }
  est.projected = (est.loss_plus - est.loss_minus) / (2.0 * handle.scale);
  return est;
}

std::vector<double> materialize_gradient(const SpsaEstimate& estimate, std::size_t d) {
  auto g = materialize(estimate.handle, d);
  for (auto& v : g) {
    v *= estimate.projected;
  }
  return g;
}

std::vector<double> spsa_gradient_averaged(const Problem& problem, std::span<double> params,
                                           const Batch& batch, std::size_t n_dirs,
                                           std::uint64_t base_seed, double scale) {
  if (n_dirs == 0) {
    throw std::invalid_argument("spsa_gradient_averaged: n_dirs must be >= 1");
  }
  std::vector<double> mean(params.size(), 0.0);
  for (std::size_t i = 0; i < n_dirs; ++i) {
    const PerturbationHandle handle{derive_seed(base_seed, i), scale};
    const auto est = spsa_gradient(problem, params, batch, handle);
    add_direction(mean, handle.seed, est.projected);
  }
  if (n_dirs > 1) {
    const double inv = 1.0 / static_cast<double>(n_dirs);
    for (auto& v : mean) {
      v *= inv;
    }
  }
  return mean;
}

}  // namespace helene
