#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "helene/problem.hpp"

namespace helene {

// ---------------------------------------------------------------------------
// Layer-structured diagonal quadratic
//   L(theta) = min_loss + 1/2 sum_j c_j (theta_j - theta*_j)^2

struct QuadraticSpec {
  Layout layout;
  std::vector<double> curvatures;  // c_j > 0
  std::vector<double> optimum;     // theta*
  double min_loss = 0.0;
};

double quadratic_loss(const QuadraticSpec& q, std::span<const double> params);
std::vector<double> quadratic_grad(const QuadraticSpec& q, std::span<const double> params);
std::vector<double> quadratic_diag_hessian(const QuadraticSpec& q);

/// Smallest curvature inside each layer (the per-layer strong-convexity constant).
std::vector<double> quadratic_layer_mu(const QuadraticSpec& q);

/// Loss contribution of one layer, excluding min_loss.
double quadratic_layer_excess(const QuadraticSpec& q, std::size_t layer,
                              std::span<const double> params);

class QuadraticProblem final : public Problem {
 public:
  explicit QuadraticProblem(QuadraticSpec spec);

  std::string name() const override { return "quadratic"; }
  std::size_t dimension() const override { return spec_.curvatures.size(); }
  Layout layout() const override { return spec_.layout; }
  double loss(std::span<const double> params, const Batch& batch) const override;
  bool has_exact_gradient() const override { return true; }
  void exact_gradient(std::span<const double> params, const Batch& batch,
                      std::span<double> out) const override;
  std::optional<double> reference_min_loss() const override { return spec_.min_loss; }

  const QuadraticSpec& spec() const { return spec_; }

 private:
  QuadraticSpec spec_;
};

// ---------------------------------------------------------------------------
// Two-parameter landscape with heterogeneous curvature:
//   L(u, v) = u^4 - 2 u^2 + 0.4 u + 100 v^2
// Double well in u (global minimum on the negative side, a local maximum near
// u = 0.101 with negative curvature), stiff quadratic in v.

double toy2d_loss(std::span<const double> params);
std::array<double, 2> toy2d_grad(std::span<const double> params);
std::array<double, 2> toy2d_diag_hessian(std::span<const double> params);

/// The three real roots of dL/du = 4u^3 - 4u + 0.4, ascending.
std::array<double, 3> toy2d_stationary_u();

/// Global minimum value of the landscape.
double toy2d_min_loss();

class Toy2DProblem final : public Problem {
 public:
  std::string name() const override { return "toy2d"; }
  std::size_t dimension() const override { return 2; }
  Layout layout() const override { return make_layout({{"u", 1}, {"v", 1}}); }
  double loss(std::span<const double> params, const Batch& batch) const override;
  bool has_exact_gradient() const override { return true; }
  void exact_gradient(std::span<const double> params, const Batch& batch,
                      std::span<double> out) const override;
  std::optional<double> reference_min_loss() const override { return toy2d_min_loss(); }
};

// ---------------------------------------------------------------------------
// Softmax (multinomial logistic) classifier on an in-memory dataset.

struct Dataset {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<double> features;  // row-major, size() * n_features
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * n_features, n_features);
  }
  std::vector<std::size_t> class_counts() const;

  bool operator==(const Dataset&) const = default;
};

struct BlobOptions {
  double separation = 2.0;   // stddev of the class means
  double noise = 1.0;        // within-class stddev
  // Feature j is multiplied by spread^(j / (F - 1)); 1 keeps all features on
  // the same scale, larger values produce heterogeneous curvature.
  double feature_scale_spread = 1.0;
};

/// Gaussian blobs; class c receives ceil(n_per_class / imbalance_ratio^c)
/// examples. Deterministic in `seed`.
Dataset make_gaussian_blobs(std::size_t n_classes, std::size_t n_features,
                            std::size_t n_per_class, std::uint64_t seed,
                            double imbalance_ratio = 1.0, const BlobOptions& options = {});

/// Realizable data: x ~ N(0, I), labels drawn from softmax(W x + b) of a
/// teacher whose parameters are N(0, teacher_scale^2). Teacher parameters are
/// written to `teacher` if non-null (softmax layout: weight then bias).
Dataset make_teacher_dataset(std::size_t n_classes, std::size_t n_features, std::size_t n,
                             std::uint64_t seed, double teacher_scale,
                             std::vector<double>* teacher = nullptr);

/// Columnar text: one example per line, "label f_1 ... f_F".
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in, std::size_t n_classes);

class SoftmaxProblem final : public Problem {
 public:
  explicit SoftmaxProblem(Dataset data);

  std::string name() const override { return "softmax"; }
  std::size_t dimension() const override;
  Layout layout() const override;
  double loss(std::span<const double> params, const Batch& batch) const override;
  std::size_t dataset_size() const override { return data_.size(); }
  bool has_exact_gradient() const override { return true; }
  void exact_gradient(std::span<const double> params, const Batch& batch,
                      std::span<double> out) const override;
  bool has_categorical_outputs() const override { return true; }
  std::vector<std::vector<double>> class_probabilities(std::span<const double> params,
                                                       const Batch& batch) const override;
  /// Minimum of the full-dataset loss, found once by a damped Newton solve.
  std::optional<double> reference_min_loss() const override;

  /// Exact Hessian diagonal of loss(params, batch).
  std::vector<double> exact_diag_hessian(std::span<const double> params, const Batch& batch) const;

  const Dataset& data() const { return data_; }

 private:
  void logits(std::span<const double> params, std::size_t example, std::span<double> out) const;

  Dataset data_;
  mutable std::once_flag min_once_;
  mutable double min_loss_ = 0.0;
};

/// Numerically stable softmax of `logits` into `probs`; returns log-sum-exp.
double softmax(std::span<const double> logits, std::span<double> probs);

}  // namespace helene
