#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "helene/problems.hpp"

namespace helene {

/// A layer-structured diagonal quadratic with the quantities the step bound
/// is stated in: per-layer radius R_i >= ||theta_0,i - theta*_i||, curvature
/// floor mu_i, threshold lambda_i = R_i / (2 sqrt(d_i)), eta = 1/2.
///
/// Theory mode clips the magnitude of each Newton-direction coordinate; this
/// is a different operator from the optimizer's Hessian floor max(h, lambda).
struct TheoryInstance {
  QuadraticSpec quad;
  std::vector<double> init;
  std::vector<double> radius;
  std::vector<double> mu;
  std::vector<double> lambda;
  double eta = 0.5;
  double eps_loss = 1e-6;

  /// Throws std::invalid_argument if an invariant does not hold.
  void validate() const;
};

/// Builds an instance; radii default to the exact initial distance per layer
/// (1.0 for a layer that starts at its optimum).
TheoryInstance make_theory_instance(QuadraticSpec quad, std::vector<double> init, double eps_loss,
                                    std::vector<double> radius = {});

struct TheoryGenOptions {
  std::size_t max_layers = 8;
  std::size_t max_dim = 64;
  double eps_loss = 1e-6;
  double min_curvature = 1.0;
  double max_curvature = 10.0;
  double min_offset = 1.0;  // |theta_0,j - theta*_j| drawn from [min_offset, max_offset]
  double max_offset = 2.0;
};

/// Random instance, deterministic in `seed`.
TheoryInstance random_theory_instance(std::uint64_t seed, const TheoryGenOptions& options = {});

/// theta_j -= eta * clip(g_j / c_j, lambda_i) for every coordinate j in layer i.
void theory_step(const TheoryInstance& instance, std::span<double> params);

/// L(theta) - min L, summed layer by layer.
double theory_excess(const TheoryInstance& instance, std::span<const double> params);

struct BoundResult {
  long long steps = 0;           // ceiling of the max-over-layers expression
  double value = 0.0;            // un-rounded expression
  std::size_t dominant_layer = 0;
  bool degenerate = false;       // some layer's log argument was <= 1
};

/// max_i { d_i (L(theta_0,i) - min L) + ln(mu_i R_i^2 / (32 d_i eps)) }.
/// Layers whose log argument is <= 1 contribute only the additive term and
/// set `degenerate`.
BoundResult step_bound(const TheoryInstance& instance);

struct VerifyReport {
  std::size_t steps_taken = 0;
  BoundResult bound;
  bool converged = false;
  bool satisfied = false;
  std::vector<double> excess;  // excess[t] = L(theta_t) - min L, t = 0..steps_taken

  nlohmann::json to_json(const TheoryInstance& instance) const;
};

/// Runs theory_step until the excess loss is <= eps_loss or max_steps is hit.
/// Throws std::invalid_argument if max_steps < bound.
VerifyReport verify_bound(const TheoryInstance& instance, std::size_t max_steps);

/// Largest per-step ratio excess[t+1] / excess[t] after the first t with
/// excess[t] <= threshold; 0 if the region is never entered.
double max_ratio_after(const std::vector<double>& excess, double threshold);

}  // namespace helene
