#include "helene/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace helene {

// ---------------------------------------------------------------------------
// Quadratic

namespace {

void check_quadratic(const QuadraticSpec& q) {
  const std::size_t d = q.curvatures.size();
  if (d == 0 || q.optimum.size() != d) {
    throw std::invalid_argument("quadratic: curvatures and optimum must have equal, nonzero length");
  }
  validate_layout(q.layout, d);
  for (double c : q.curvatures) {
    if (!(c > 0.0)) {
      throw std::invalid_argument("quadratic: curvatures must be > 0");
    }
  }
}

void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw std::invalid_argument("parameter length " + std::to_string(got) + " does not match " +
                                std::to_string(expected));
  }
}

}  // namespace

double quadratic_loss(const QuadraticSpec& q, std::span<const double> params) {
  check_dim(q.curvatures.size(), params.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double r = params[j] - q.optimum[j];
    acc += q.curvatures[j] * r * r;
  }
  return q.min_loss + 0.5 * acc;
}

std::vector<double> quadratic_grad(const QuadraticSpec& q, std::span<const double> params) {
  check_dim(q.curvatures.size(), params.size());
  std::vector<double> g(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    g[j] = q.curvatures[j] * (params[j] - q.optimum[j]);
  }
  return g;
}

std::vector<double> quadratic_diag_hessian(const QuadraticSpec& q) { return q.curvatures; }

std::vector<double> quadratic_layer_mu(const QuadraticSpec& q) {
  std::vector<double> mu;
  for (const auto& spec : q.layout) {
    auto first = q.curvatures.begin() + static_cast<std::ptrdiff_t>(spec.offset);
    mu.push_back(*std::min_element(first, first + static_cast<std::ptrdiff_t>(spec.dim)));
  }
  return mu;
}

double quadratic_layer_excess(const QuadraticSpec& q, std::size_t layer,
                              std::span<const double> params) {
  const auto& spec = q.layout.at(layer);
  double acc = 0.0;
  for (std::size_t j = spec.offset; j < spec.offset + spec.dim; ++j) {
    const double r = params[j] - q.optimum[j];
    acc += q.curvatures[j] * r * r;
  }
  return 0.5 * acc;
}

QuadraticProblem::QuadraticProblem(QuadraticSpec spec) : spec_(std::move(spec)) {
  check_quadratic(spec_);
}

double QuadraticProblem::loss(std::span<const double> params, const Batch&) const {
  return quadratic_loss(spec_, params);
}

void QuadraticProblem::exact_gradient(std::span<const double> params, const Batch&,
                                      std::span<double> out) const {
  check_dim(dimension(), out.size());
  const auto g = quadratic_grad(spec_, params);
  std::copy(g.begin(), g.end(), out.begin());
}

// ---------------------------------------------------------------------------
// Toy landscape

double toy2d_loss(std::span<const double> params) {
  check_dim(2, params.size());
  const double u = params[0];
  const double v = params[1];
  const double u2 = u * u;
  return (u2 * u2 - 2.0 * u2 + 0.4 * u) + 100.0 * v * v;
}

std::array<double, 2> toy2d_grad(std::span<const double> params) {
  check_dim(2, params.size());
  const double u = params[0];
  return {4.0 * u * u * u - 4.0 * u + 0.4, 200.0 * params[1]};
}

std::array<double, 2> toy2d_diag_hessian(std::span<const double> params) {
  check_dim(2, params.size());
  const double u = params[0];
  return {12.0 * u * u - 4.0, 200.0};
}

std::array<double, 3> toy2d_stationary_u() {
  // u^3 - u + 0.1 = 0 is a depressed cubic with three real roots.
  const double p = -1.0;
  const double q = 0.1;
  const double amp = 2.0 * std::sqrt(-p / 3.0);
  const double phi = std::acos((3.0 * q / (2.0 * p)) * std::sqrt(-3.0 / p)) / 3.0;
  std::array<double, 3> roots{};
  for (int k = 0; k < 3; ++k) {
    roots[static_cast<std::size_t>(k)] = amp * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0);
  }
  std::sort(roots.begin(), roots.end());
  // One Newton polish per root.
  for (auto& u : roots) {
    u -= (4.0 * u * u * u - 4.0 * u + 0.4) / (12.0 * u * u - 4.0);
  }
  return roots;
}

double toy2d_min_loss() {
  const auto roots = toy2d_stationary_u();
  double best = toy2d_loss(std::array<double, 2>{roots[0], 0.0});
  best = std::min(best, toy2d_loss(std::array<double, 2>{roots[2], 0.0}));
  return best;
}

double Toy2DProblem::loss(std::span<const double> params, const Batch&) const {
  return toy2d_loss(params);
}

void Toy2DProblem::exact_gradient(std::span<const double> params, const Batch&,
                                  std::span<double> out) const {
  check_dim(2, out.size());
  const auto g = toy2d_grad(params);
  out[0] = g[0];
  out[1] = g[1];
}

// ---------------------------------------------------------------------------
// Datasets

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (int y : labels) {
    counts.at(static_cast<std::size_t>(y))++;
  }
  return counts;
}

Dataset make_gaussian_blobs(std::size_t n_classes, std::size_t n_features,
                            std::size_t n_per_class, std::uint64_t seed, double imbalance_ratio,
                            const BlobOptions& options) {
  if (n_classes < 2) {
    throw std::invalid_argument("gaussian blobs: need at least 2 classes");
  }
  if (n_features == 0 || n_per_class == 0) {
    throw std::invalid_argument("gaussian blobs: n_features and n_per_class must be >= 1");
  }
  if (!(imbalance_ratio >= 1.0)) {
    throw std::invalid_argument("gaussian blobs: imbalance_ratio must be >= 1");
  }
  if (!(options.feature_scale_spread > 0.0) || !(options.noise >= 0.0)) {
    throw std::invalid_argument("gaussian blobs: invalid scale options");
  }
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> scale(n_features, 1.0);
  if (n_features > 1) {
    for (std::size_t j = 0; j < n_features; ++j) {
      scale[j] = std::pow(options.feature_scale_spread,
                          static_cast<double>(j) / static_cast<double>(n_features - 1));
    }
  }
  std::vector<double> means(n_classes * n_features);
  for (auto& m : means) {
    m = options.separation * normal(engine);
  }

  Dataset data;
  data.n_classes = n_classes;
  data.n_features = n_features;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double denom = std::pow(imbalance_ratio, static_cast<double>(c));
    const auto count = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n_per_class) / denom - 1e-9));
    for (std::size_t i = 0; i < std::max<std::size_t>(count, 1); ++i) {
      for (std::size_t j = 0; j < n_features; ++j) {
        const double x = means[c * n_features + j] + options.noise * normal(engine);
        data.features.push_back(scale[j] * x);
      }
      data.labels.push_back(static_cast<int>(c));
    }
  }
  return data;
}

Dataset make_teacher_dataset(std::size_t n_classes, std::size_t n_features, std::size_t n,
                             std::uint64_t seed, double teacher_scale,
                             std::vector<double>* teacher) {
  if (n_classes < 2 || n_features == 0 || n == 0) {
    throw std::invalid_argument("teacher dataset: degenerate sizes");
  }
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> params(n_classes * (n_features + 1));
  for (auto& p : params) {
    p = teacher_scale * normal(engine);
  }
  Dataset data;
  data.n_classes = n_classes;
  data.n_features = n_features;
  std::vector<double> logit(n_classes);
  std::vector<double> prob(n_classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_features; ++j) {
      data.features.push_back(normal(engine));
    }
    const auto x = data.row(i);
    for (std::size_t c = 0; c < n_classes; ++c) {
      double z = params[n_classes * n_features + c];
      for (std::size_t j = 0; j < n_features; ++j) {
        z += params[c * n_features + j] * x[j];
      }
      logit[c] = z;
    }
    softmax(logit, prob);
    const double u = uniform(engine);
    double acc = 0.0;
    int label = static_cast<int>(n_classes - 1);
    for (std::size_t c = 0; c < n_classes; ++c) {
      acc += prob[c];
      if (u < acc) {
        label = static_cast<int>(c);
        break;
      }
    }
    data.labels.push_back(label);
  }
  if (teacher != nullptr) {
    *teacher = std::move(params);
  }
  return data;
}

void write_dataset(std::ostream& out, const Dataset& data) {
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double x : data.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in, std::size_t n_classes) {
  Dataset data;
  data.n_classes = n_classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::istringstream fields(line);
    int label = 0;
    if (!(fields >> label) || label < 0 || static_cast<std::size_t>(label) >= n_classes) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": bad label");
    }
    std::vector<double> row;
    double x = 0.0;
    while (fields >> x) {
      row.push_back(x);
    }
    if (data.n_features == 0) {
      data.n_features = row.size();
    }
    if (row.empty() || row.size() != data.n_features) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) +
                               ": inconsistent feature count");
    }
    data.labels.push_back(label);
    data.features.insert(data.features.end(), row.begin(), row.end());
  }
  return data;
}

// ---------------------------------------------------------------------------
// Softmax classifier

double softmax(std::span<const double> logits, std::span<double> probs) {
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - max);
    sum += probs[c];
  }
  for (auto& p : probs) {
    p /= sum;
  }
  return max + std::log(sum);
}

namespace {

const std::vector<std::size_t>& batch_indices(const Batch& batch,
                                              std::vector<std::size_t>& scratch, std::size_t n) {
  if (!batch.indices.empty()) {
    for (auto i : batch.indices) {
      if (i >= n) {
        throw std::out_of_range("batch index out of range");
      }
    }
    return batch.indices;
  }
  scratch = full_batch(n).indices;
  return scratch;
}

int label_for(const Batch& batch, const Dataset& data, std::size_t position, std::size_t example) {
  if (batch.labels) {
    const int y = batch.labels->at(position);
    if (y < 0 || static_cast<std::size_t>(y) >= data.n_classes) {
      throw std::out_of_range("label override out of range");
    }
    return y;
  }
  return data.labels[example];
}

}  // namespace

SoftmaxProblem::SoftmaxProblem(Dataset data) : data_(std::move(data)) {
  if (data_.n_classes < 2 || data_.n_features == 0 || data_.size() == 0 ||
      data_.features.size() != data_.size() * data_.n_features) {
    throw std::invalid_argument("softmax problem: malformed dataset");
  }
}

std::size_t SoftmaxProblem::dimension() const {
  return data_.n_classes * (data_.n_features + 1);
}

Layout SoftmaxProblem::layout() const {
  return make_layout({{"weight", data_.n_classes * data_.n_features}, {"bias", data_.n_classes}});
}

void SoftmaxProblem::logits(std::span<const double> params, std::size_t example,
                            std::span<double> out) const {
  const std::size_t C = data_.n_classes;
  const std::size_t F = data_.n_features;
  const auto x = data_.row(example);
  for (std::size_t c = 0; c < C; ++c) {
    double z = params[C * F + c];
    const double* w = params.data() + c * F;
    for (std::size_t j = 0; j < F; ++j) {
      z += w[j] * x[j];
    }
    out[c] = z;
  }
}

double SoftmaxProblem::loss(std::span<const double> params, const Batch& batch) const {
  check_dim(dimension(), params.size());
  std::vector<std::size_t> scratch;
  const auto& idx = batch_indices(batch, scratch, data_.size());
  std::vector<double> z(data_.n_classes);
  std::vector<double> p(data_.n_classes);
  double total = 0.0;
  for (std::size_t b = 0; b < idx.size(); ++b) {
    logits(params, idx[b], z);
    const double lse = softmax(z, p);
    total += lse - z[static_cast<std::size_t>(label_for(batch, data_, b, idx[b]))];
  }
  return total / static_cast<double>(idx.size());
}

void SoftmaxProblem::exact_gradient(std::span<const double> params, const Batch& batch,
                                    std::span<double> out) const {
  check_dim(dimension(), params.size());
  check_dim(dimension(), out.size());
  const std::size_t C = data_.n_classes;
  const std::size_t F = data_.n_features;
  std::vector<std::size_t> scratch;
  const auto& idx = batch_indices(batch, scratch, data_.size());
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> z(C);
  std::vector<double> p(C);
  const double inv_b = 1.0 / static_cast<double>(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    logits(params, idx[b], z);
    softmax(z, p);
    p[static_cast<std::size_t>(label_for(batch, data_, b, idx[b]))] -= 1.0;
    const auto x = data_.row(idx[b]);
    for (std::size_t c = 0; c < C; ++c) {
      const double r = p[c] * inv_b;
      for (std::size_t j = 0; j < F; ++j) {
        out[c * F + j] += r * x[j];
      }
      out[C * F + c] += r;
    }
  }
}

std::vector<std::vector<double>> SoftmaxProblem::class_probabilities(
    std::span<const double> params, const Batch& batch) const {
  check_dim(dimension(), params.size());
  std::vector<std::size_t> scratch;
  const auto& idx = batch_indices(batch, scratch, data_.size());
  std::vector<std::vector<double>> rows;
  rows.reserve(idx.size());
  std::vector<double> z(data_.n_classes);
  for (auto i : idx) {
    logits(params, i, z);
    std::vector<double> p(data_.n_classes);
    softmax(z, p);
    rows.push_back(std::move(p));
  }
  return rows;
}

std::vector<double> SoftmaxProblem::exact_diag_hessian(std::span<const double> params,
                                                       const Batch& batch) const {
  check_dim(dimension(), params.size());
  const std::size_t C = data_.n_classes;
  const std::size_t F = data_.n_features;
  std::vector<std::size_t> scratch;
  const auto& idx = batch_indices(batch, scratch, data_.size());
  std::vector<double> diag(dimension(), 0.0);
  std::vector<double> z(C);
  std::vector<double> p(C);
  const double inv_b = 1.0 / static_cast<double>(idx.size());
  for (auto i : idx) {
    logits(params, i, z);
    softmax(z, p);
    const auto x = data_.row(i);
    for (std::size_t c = 0; c < C; ++c) {
      const double s = p[c] * (1.0 - p[c]) * inv_b;
      for (std::size_t j = 0; j < F; ++j) {
        diag[c * F + j] += s * x[j] * x[j];
      }
      diag[C * F + c] += s;
    }
  }
  return diag;
}

std::optional<double> SoftmaxProblem::reference_min_loss() const {
  std::call_once(min_once_, [this] {
    const std::size_t C = data_.n_classes;
    const std::size_t F = data_.n_features;
    const std::size_t d = dimension();
    const Batch all = full_batch(data_.size());
    std::vector<double> theta(d, 0.0);
    std::vector<double> grad(d);
    std::vector<double> trial(d);
    std::vector<double> z(C);
    std::vector<double> p(C);
    std::vector<double> xt(F + 1);
    double current = loss(theta, all);
    for (int iter = 0; iter < 200; ++iter) {
      exact_gradient(theta, all, grad);
      double gnorm = 0.0;
      for (double g : grad) {
        gnorm = std::max(gnorm, std::abs(g));
      }
      if (gnorm < 1e-12) {
        break;
      }
      // Full Hessian: sum_b (diag(p) - p p^T) kron (x~ x~^T) / n, x~ = [x; 1].
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                   static_cast<Eigen::Index>(d));
      auto index = [&](std::size_t c, std::size_t j) {
        return static_cast<Eigen::Index>(j < F ? c * F + j : C * F + c);
      };
      for (auto i : all.indices) {
        logits(theta, i, z);
        softmax(z, p);
        const auto x = data_.row(i);
        std::copy(x.begin(), x.end(), xt.begin());
        xt[F] = 1.0;
        for (std::size_t a = 0; a < C; ++a) {
          for (std::size_t c = 0; c < C; ++c) {
            const double s = ((a == c ? p[a] : 0.0) - p[a] * p[c]) / static_cast<double>(data_.size());
            if (s == 0.0) {
              continue;
            }
            for (std::size_t j = 0; j <= F; ++j) {
              for (std::size_t k = 0; k <= F; ++k) {
                hess(index(a, j), index(c, k)) += s * xt[j] * xt[k];
              }
            }
          }
        }
      }
      // The softmax parameterization is shift-invariant, so the Hessian is
      // singular; a small ridge picks the minimum-norm Newton direction.
      hess.diagonal().array() += 1e-10;
      Eigen::Map<const Eigen::VectorXd> g(grad.data(), static_cast<Eigen::Index>(d));
      const Eigen::VectorXd step = hess.ldlt().solve(g);
      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t j = 0; j < d; ++j) {
          trial[j] = theta[j] - t * step(static_cast<Eigen::Index>(j));
        }
        const double value = loss(trial, all);
        if (value <= current - 1e-4 * t * g.dot(step) || value < current) {
          theta.swap(trial);
          current = value;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) {
        break;
      }
    }
    min_loss_ = current;
  });
  return min_loss_;
}

}  // namespace helene
