#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "helene/hessian_est.hpp"
#include "helene/problems.hpp"
#include "oracles.hpp"

using namespace helene;

namespace {

// log(1 + exp(-y w x)) for one fixed example
class Logistic1D : public Problem {
 public:
  Logistic1D(double x, int y) : x_(x), y_(y) {}
  std::string name() const override { return "logistic1d"; }
  std::size_t dimension() const override { return 1; }
  double loss(std::span<const double> p, const Batch&) const override {
    return std::log1p(std::exp(-y_ * p[0] * x_));
  }
  bool has_exact_gradient() const override { return true; }
  void exact_gradient(std::span<const double> p, const Batch&, std::span<double> out) const override {
    const double m = y_ * p[0] * x_;
    out[0] = -y_ * x_ / (1.0 + std::exp(m));
  }

 private:
  double x_;
  int y_;
};

Dataset tiny_dataset() {
  Dataset d;
  d.n_classes = 2;
  d.n_features = 1;
  d.features = {1.0, -1.0, 2.0, -0.5};
  d.labels = {1, 0, 1, 0};
  return d;
}

}  // namespace

TEST_CASE("A-GNB formula on a given gradient") {
  std::vector<double> g = {1, -2};
  auto est = agnb_from_gradient(g, 4);
  CHECK(est.values == std::vector<double>{4, 16});
  CHECK(est.source == HessianSource::agnb);
  std::vector<double> zero(3, 0.0);
  for (double v : agnb_from_gradient(zero, 7).values) CHECK(v == 0.0);
  CHECK_THROWS_AS(agnb_from_gradient(g, 0), std::invalid_argument);
}

TEST_CASE("A-GNB on a one-parameter logistic model") {
  Logistic1D model(1.5, 1);
  std::vector<double> w = {0.4};
  // straight-line: g = -y x / (1 + e^{y w x}),  B g^2 with B = 1
  const double g = -1.5 / (1.0 + std::exp(0.6));
  const auto est = agnb_diag(model, w, Batch{}, ExactGrad{});
  CHECK(est.values[0] == doctest::Approx(g * g).epsilon(1e-15));
  // and against a finite-difference gradient
  const double fd = (std::log1p(std::exp(-1.5 * 0.400001)) - std::log1p(std::exp(-1.5 * 0.399999))) / 2e-6;
  CHECK(est.values[0] == doctest::Approx(fd * fd).epsilon(1e-8));
}

TEST_CASE("A-GNB EXACT matches the independently recomputed B g (.) g to one ulp") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto data = make_gaussian_blobs(3, 4, 20, seed, 2.0);
    SoftmaxProblem problem(data);
    oracle::SoftmaxRef ref{3, 4, {}, data.labels};
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto r = data.row(i);
      ref.x.emplace_back(r.begin(), r.end());
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    std::vector<double> theta(problem.dimension());
    for (auto& v : theta) v = n(rng);
    const Batch batch = sample_batch(data.size(), 8, seed);
    const auto est = agnb_diag(problem, theta, batch, ExactGrad{});
    const auto g = ref.grad(theta, batch.indices);
    for (std::size_t j = 0; j < g.size(); ++j) {
      CHECK(oracle::ulp_distance(est.values[j], 8.0 * g[j] * g[j]) <= 64);
    }
    std::vector<double> lib_g(theta.size());
    problem.exact_gradient(theta, batch, lib_g);
    for (std::size_t j = 0; j < g.size(); ++j) {
      CHECK(oracle::ulp_distance(est.values[j], 8.0 * lib_g[j] * lib_g[j]) <= 1);
    }
  }
}

TEST_CASE("A-GNB in SPSA mode squares the rank-one estimate") {
  auto data = make_gaussian_blobs(2, 3, 10, 1);
  SoftmaxProblem problem(data);
  std::vector<double> theta(problem.dimension(), 0.1);
  const Batch batch = sample_batch(data.size(), 5, 3);
  const PerturbationHandle h{44, 1e-3};
  auto copy = theta;
  const auto spsa = spsa_gradient(problem, copy, batch, h);
  const auto expected = agnb_from_spsa(spsa, theta.size(), 5);
  const auto est = agnb_diag(problem, theta, batch, SpsaGrad{h});
  CHECK(est.values == expected.values);
}

TEST_CASE("A-GNB refuses label overrides and missing gradients") {
  auto data = tiny_dataset();
  SoftmaxProblem problem(data);
  std::vector<double> theta(problem.dimension(), 0.0);
  Batch b = full_batch(data.size());
  b.labels = std::vector<int>{0, 0, 0, 0};
  CHECK_THROWS_AS(agnb_diag(problem, theta, b, ExactGrad{}), std::invalid_argument);
  oracle::LambdaProblem nograd(2, [](std::span<const double> t) { return t[0] * t[1]; });
  std::vector<double> t2 = {1, 2};
  CHECK_THROWS_AS(agnb_diag(nograd, t2, Batch{}, ExactGrad{}), std::logic_error);
}

TEST_CASE("per-example sum form") {
  auto data = make_gaussian_blobs(3, 2, 6, 9);
  SoftmaxProblem problem(data);
  oracle::SoftmaxRef ref{3, 2, {}, data.labels};
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto r = data.row(i);
    ref.x.emplace_back(r.begin(), r.end());
  }
  std::vector<double> theta(problem.dimension(), 0.2);
  const Batch batch = sample_batch(data.size(), 4, 1);
  const auto est = agnb_diag(problem, theta, batch, ExactGrad{}, GnbOptions{true});
  std::vector<double> expect(theta.size(), 0.0);
  for (auto i : batch.indices) {
    const auto g = ref.grad(theta, {i});
    for (std::size_t j = 0; j < g.size(); ++j) expect[j] += g[j] * g[j] / 4.0;
  }
  for (std::size_t j = 0; j < expect.size(); ++j) CHECK(est.values[j] == doctest::Approx(expect[j]).epsilon(1e-12));
}

TEST_CASE("property: estimators are non-negative") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 30; ++trial) {
    auto data = make_gaussian_blobs(2 + trial % 3, 3, 10, trial, 1.5);
    SoftmaxProblem problem(data);
    std::vector<double> theta(problem.dimension());
    for (auto& v : theta) v = n(rng);
    const Batch batch = sample_batch(data.size(), 1 + rng() % 12, rng());
    for (const auto& est : {agnb_diag(problem, theta, batch, ExactGrad{}),
                            agnb_diag(problem, theta, batch, SpsaGrad{{rng(), 1e-3}}),
                            gnb_diag(problem, theta, batch, rng(), ExactGrad{}),
                            gnb_diag(problem, theta, batch, rng(), ExactGrad{}, GnbOptions{true})}) {
      REQUIRE(est.values.size() == theta.size());
      for (double v : est.values) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
      }
    }
  }
}

TEST_CASE("GNB with a one-hot model equals A-GNB when argmax matches the labels") {
  auto data = tiny_dataset();
  SoftmaxProblem problem(data);
  // weight row for class 0 = -1000, class 1 = +1000: class 1 iff x > 0
  std::vector<double> theta = {-1000.0, 1000.0, 0.0, 0.0};
  const Batch batch = full_batch(data.size());
  const auto probs = problem.class_probabilities(theta, batch);
  const auto labels = sample_labels(probs, 5);
  CHECK(labels == data.labels);
  const auto a = agnb_diag(problem, theta, batch, ExactGrad{});
  const auto g = gnb_diag(problem, theta, batch, 5, ExactGrad{});
  CHECK(a.values == g.values);
  CHECK(g.source == HessianSource::gnb);
}

TEST_CASE("GNB is deterministic in the label seed") {
  auto data = make_gaussian_blobs(3, 3, 20, 2, 3.0);
  SoftmaxProblem problem(data);
  std::vector<double> theta(problem.dimension(), 0.05);
  const Batch batch = sample_batch(data.size(), 10, 4);
  CHECK(gnb_diag(problem, theta, batch, 99, ExactGrad{}).values ==
        gnb_diag(problem, theta, batch, 99, ExactGrad{}).values);
}

TEST_CASE("GNB varies across label seeds while A-GNB does not") {
  auto data = make_gaussian_blobs(2, 3, 60, 3, 6.0);
  SoftmaxProblem problem(data);
  std::vector<double> theta(problem.dimension(), 0.0);
  const Batch batch = sample_batch(data.size(), 16, 1);
  const auto a0 = agnb_diag(problem, theta, batch, ExactGrad{});
  bool gnb_differs = false;
  const auto g0 = gnb_diag(problem, theta, batch, 0, ExactGrad{});
  for (std::uint64_t s = 1; s < 100; ++s) {
    CHECK(agnb_diag(problem, theta, batch, ExactGrad{}).values == a0.values);
    gnb_differs = gnb_differs || gnb_diag(problem, theta, batch, s, ExactGrad{}).values != g0.values;
  }
  CHECK(gnb_differs);
}

TEST_CASE("GNB needs categorical outputs") {
  QuadraticSpec q{make_layout({{"a", 2}}), {1, 1}, {0, 0}, 0};
  QuadraticProblem problem(q);
  std::vector<double> theta = {1, 1};
  CHECK_THROWS_AS(gnb_diag(problem, theta, Batch{}, 1, ExactGrad{}), std::logic_error);
}

TEST_CASE("label sampler follows the probabilities") {
  std::vector<std::vector<double>> rows(20000, std::vector<double>{0.2, 0.5, 0.3});
  const auto labels = sample_labels(rows, 3);
  std::array<int, 3> count{};
  for (int l : labels) count[l]++;
  CHECK(count[0] / 20000.0 == doctest::Approx(0.2).epsilon(0.05));
  CHECK(count[1] / 20000.0 == doctest::Approx(0.5).epsilon(0.03));
  CHECK(count[2] / 20000.0 == doctest::Approx(0.3).epsilon(0.04));
}

TEST_CASE("finite-difference oracle") {
  QuadraticSpec q{make_layout({{"a", 2}}), {1, 4}, {0, 0}, 0};
  QuadraticProblem quad(q);
  std::vector<double> theta = {0.7, -1.3};
  const auto h = fd_diag_hessian(quad, theta, Batch{});
  CHECK(h.values[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(h.values[1] == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(h.source == HessianSource::fd_oracle);

  oracle::LambdaProblem linear(3, [](std::span<const double> t) { return 2 * t[0] - t[1] + 0.5 * t[2] + 1; });
  std::vector<double> t3 = {0.3, 0.1, -0.2};
  for (double v : fd_diag_hessian(linear, t3, Batch{}).values) CHECK(std::abs(v) < 1e-6);

  oracle::LambdaProblem quartic(1, [](std::span<const double> t) { return std::pow(t[0], 4); });
  std::vector<double> one = {1.0};
  CHECK(fd_diag_hessian(quartic, one, Batch{}, 1e-3).values[0] == doctest::Approx(12.0).epsilon(1e-4));
}

TEST_CASE("finite-difference oracle counts and errors") {
  QuadraticSpec q{make_layout({{"a", 5}}), {1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}, 0};
  QuadraticProblem quad(q);
  oracle::CountingProblem counted(quad);
  std::vector<double> theta(5, 1.0);
  (void)fd_diag_hessian(counted, theta, Batch{});
  CHECK(counted.calls == 11);
  CHECK_THROWS_AS(fd_diag_hessian(quad, theta, Batch{}, 0.0), std::invalid_argument);
  oracle::LambdaProblem bad(1, [](std::span<const double> t) { return t[0] > 1 ? std::nan("") : 0.0; });
  std::vector<double> at = {1.0};
  CHECK_THROWS(fd_diag_hessian(bad, at, Batch{}));
}

TEST_CASE("softmax exact diagonal Hessian agrees with the oracle") {
  auto data = make_gaussian_blobs(3, 3, 15, 21, 2.0);
  SoftmaxProblem problem(data);
  std::vector<double> theta(problem.dimension());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 0.5);
  for (auto& v : theta) v = n(rng);
  const Batch b = full_batch(data.size());
  const auto exact = problem.exact_diag_hessian(theta, b);
  const auto fd = fd_diag_hessian(problem, theta, b, 1e-4);
  for (std::size_t j = 0; j < exact.size(); ++j) CHECK(fd.values[j] == doctest::Approx(exact[j]).epsilon(1e-5));
}
