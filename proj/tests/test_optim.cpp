#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "golden_trace.hpp"
#include "helene/optim.hpp"
#include "helene/problems.hpp"
#include "oracles.hpp"

using namespace helene;

namespace {

QuadraticProblem quad(std::vector<double> c, std::vector<double> opt,
                      std::vector<std::pair<std::string, std::size_t>> layers = {}) {
  QuadraticSpec q;
  if (layers.empty()) layers = {{"all", c.size()}};
  q.layout = make_layout(layers);
  q.curvatures = std::move(c);
  q.optimum = std::move(opt);
  return QuadraticProblem(q);
}

HeleneHypers base_hypers(double lr = 0.1) {
  HeleneHypers hp;
  hp.lr.base = lr;
  hp.anneal_T = 100;
  hp.spsa_scale = 1e-3;
  return hp;
}

LayeredParams one(double v) { return LayeredParams(make_layout({{"all", 1}}), {v}); }

// Linear objective with an exact gradient and zero curvature.
class Linear final : public Problem {
 public:
  std::string name() const override { return "linear"; }
  std::size_t dimension() const override { return 1; }
  double loss(std::span<const double> p, const Batch&) const override { return p[0]; }
  bool has_exact_gradient() const override { return true; }
  void exact_gradient(std::span<const double>, const Batch&, std::span<double> out) const override {
    out[0] = 1.0;
  }
};

oracle::LambdaProblem constant_problem(std::size_t d) {
  return oracle::LambdaProblem(d, [](std::span<const double>) { return 3.0; });
}

}  // namespace

TEST_CASE("anneal values") {
  CHECK(anneal(0, 100, 0.9) == 1.0);
  CHECK(std::abs(anneal(5000, 100, 0.9) - 0.9) < 1e-20);
  CHECK(anneal(100, 100, 0.9) == doctest::Approx(0.9367879441).epsilon(1e-10));
}

TEST_CASE("anneal is strictly decreasing and stays above beta1") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> b(0.0, 0.99), T(5, 500);
  for (int trial = 0; trial < 50; ++trial) {
    const double beta1 = b(rng), tt = T(rng);
    double prev = anneal(0, tt, beta1);
    for (int t = 1; t <= static_cast<int>(5 * tt); ++t) {
      const double a = anneal(t, tt, beta1);
      CHECK(a < prev);
      CHECK(a > beta1);
      prev = a;
    }
  }
}

TEST_CASE("helene update with h above the floor divides by h") {
  auto p = constant_problem(1);
  auto hp = base_hypers(0.1);
  hp.beta1 = 0.5;
  hp.eps_num = 1e-300;
  hp.hessian_interval = 10;
  HeleneState st(1, hp);
  st.m = {2.0};  // beta1 * 2 = 1 with a zero gradient
  st.h = {4.0};
  st.t = 2;
  auto theta = one(1.0);
  const auto rec = helene_step(st, p, theta, Batch{}, 9);
  CHECK_FALSE(rec.hessian_refreshed);
  CHECK(st.m[0] == 1.0);
  CHECK(theta.data()[0] - 1.0 == doctest::Approx(-0.025).epsilon(1e-14));
  CHECK(rec.total_clip_triggers() == 0);
}

TEST_CASE("helene update with h below the floor uses the floor") {
  auto p = constant_problem(1);
  auto hp = base_hypers(0.1);
  hp.beta1 = 0.5;
  hp.eps_num = 1e-300;
  HeleneState st(1, hp);
  st.m = {2.0};
  st.h = {0.5};
  st.t = 2;
  auto theta = one(1.0);
  const auto rec = helene_step(st, p, theta, Batch{}, 9);
  CHECK(theta.data()[0] - 1.0 == doctest::Approx(-0.1).epsilon(1e-14));
  CHECK(rec.total_clip_triggers() == 1);
}

TEST_CASE("warm-up step starts from h = 0 and is floored") {
  const std::uint64_t seed = 21;
  const double eps = 1e-3;
  const double z = materialize({seed, eps}, 1)[0];
  const double a = 10.0 / (z * z);  // g = a z^2 = 10, h_hat = 100
  oracle::LambdaProblem p(1, [a](std::span<const double> x) { return a * x[0]; });
  auto hp = base_hypers(0.1);
  hp.spsa_scale = eps;
  HeleneState st(1, hp);
  auto theta = one(0.5);
  const auto rec = helene_step(st, p, theta, Batch{}, seed);
  CHECK(rec.hessian_refreshed);
  CHECK(st.h[0] == doctest::Approx(1.0).epsilon(1e-8));
  const double m = anneal(1, 100, 0.9) * 10.0;
  CHECK(st.m[0] == doctest::Approx(m).epsilon(1e-8));
  CHECK(theta.data()[0] - 0.5 == doctest::Approx(-0.1 * m).epsilon(1e-8));
}

TEST_CASE("three-step trace matches the straight-line oracle") {
  auto p = quad({1.0}, {0.0});
  // second setting: steps 1-2 floored, step 3 preconditioned by h
  for (auto [floor, lr] : {std::pair{1.0, 0.1}, std::pair{1e-3, 1e-4}}) {
    golden::Hypers g;
    g.floor = floor;
    g.lr = lr;
    auto hp = base_hypers(g.lr);
    hp.anneal_T = g.anneal_T;
    hp.hessian_interval = g.k;
    hp.clip_floor.fallback = floor;
    hp.spsa_scale = g.eps;
    hp.max_steps = 3;
    std::vector<std::uint64_t> seeds = {derive_seed(7, 1), derive_seed(7, 2), derive_seed(7, 3)};
    const auto want = golden::trace(1.0, g, seeds);
    HeleneState st(1, hp);
    auto theta = one(1.0);
    for (int t = 0; t < 3; ++t) {
      const auto rec = helene_step(st, p, theta, Batch{}, seeds[t]);
      CHECK(std::abs(theta.data()[0] - want[t].theta) <= 1e-12);
      CHECK(std::abs(st.m[0] - want[t].m) <= 1e-12);
      CHECK(std::abs(st.h[0] - want[t].h) <= 1e-12);
      CHECK(std::abs(rec.alpha - want[t].alpha) <= 1e-12);
      CHECK(rec.hessian_refreshed == want[t].refreshed);
      CHECK(static_cast<int>(rec.total_clip_triggers()) == want[t].clipped);
    }
    if (floor < 1.0) CHECK(want[2].clipped == 0);
    CHECK(want[0].clipped == 1);
    CHECK_THROWS_AS(helene_step(st, p, theta, Batch{}, 1), std::logic_error);
  }
}

TEST_CASE("hessian refresh happens on t = 1, k+1, 2k+1, ...") {
  auto p = quad({1.0, 2.0, 3.0}, {0, 0, 0});
  for (std::size_t k : {1u, 3u, 10u}) {
    auto hp = base_hypers(0.01);
    hp.hessian_interval = k;
    HeleneState st(3, hp);
    LayeredParams theta(p.layout(), {1, 1, 1});
    for (std::size_t t = 1; t <= 35; ++t) {
      const auto before = st.h;
      const auto rec = helene_step(st, p, theta, Batch{}, derive_seed(5, t));
      const bool expect = (t - 1) % k == 0;
      CHECK(rec.hessian_refreshed == expect);
      if (!expect) CHECK(st.h == before);
    }
  }
}

TEST_CASE("helene step invariants over random instances") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d1 = 1 + rng() % 4, d2 = 1 + rng() % 4;
    std::vector<double> c, opt;
    for (std::size_t j = 0; j < d1 + d2; ++j) {
      c.push_back(0.1 + 20 * u(rng));
      opt.push_back(2 * u(rng) - 1);
    }
    auto p = quad(c, opt, {{"a", d1}, {"b", d2}});
    auto hp = base_hypers(1e-3 + 0.05 * u(rng));
    hp.beta1 = 0.99 * u(rng);
    hp.beta2 = 0.99 * u(rng);
    hp.gamma = 0.1 + 2 * u(rng);
    hp.clip_floor.per_layer = {{"a", 1e-3 + 5 * u(rng)}, {"b", 1e-3 + 5 * u(rng)}};
    hp.hessian_interval = 1 + rng() % 5;
    const auto floors = hp.clip_floor.resolve(p.layout());
    HeleneState st(d1 + d2, hp);
    std::vector<double> init;
    for (std::size_t j = 0; j < d1 + d2; ++j) init.push_back(4 * u(rng) - 2);
    LayeredParams theta(p.layout(), init);
    for (std::size_t t = 1; t <= 20; ++t) {
      const auto before = theta.data();
      const auto rec = helene_step(st, p, theta, Batch{}, rng());
      REQUIRE_FALSE(rec.diverged);
      std::vector<std::size_t> below(2, 0);
      for (std::size_t j = 0; j < d1 + d2; ++j) {
        const std::size_t i = theta.layer_of(j);
        CHECK(std::isfinite(st.m[j]));
        CHECK(st.h[j] >= 0.0);
        const double denom = hp.gamma * std::max(st.h[j], floors[i]) + hp.eps_num;
        CHECK(denom > 0.0);
        const double bound = hp.lr.base * std::abs(st.m[j]) / (hp.gamma * floors[i] + hp.eps_num);
        CHECK(std::abs(theta.data()[j] - before[j]) <=
              bound * (1 + 1e-12) + 4 * std::numeric_limits<double>::epsilon() * std::abs(before[j]));
        if (st.h[j] < floors[i]) ++below[i];
      }
      CHECK(rec.clip_triggers == below);
    }
  }
}

TEST_CASE("clip triggers are non-decreasing in the floor at a fixed state") {
  auto p = quad({0.5, 1, 4, 9, 30, 100}, {0, 0, 0, 0, 0, 0});
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::size_t prev = 0;
    for (double floor : {1e-4, 1e-2, 1e-1, 1.0, 10.0, 1e3}) {
      auto hp = base_hypers(0.01);
      hp.clip_floor.fallback = floor;
      HeleneState st(6, hp);
      st.h = {0.5, 1, 4, 9, 30, 100};
      st.t = 2;
      LayeredParams theta(p.layout(), {1, 1, 1, 1, 1, 1});
      const auto n = helene_step(st, p, theta, Batch{}, seed).total_clip_triggers();
      CHECK(n >= prev);
      prev = n;
    }
  }
}

TEST_CASE("precondition off gives a plain momentum step") {
  auto p = quad({50.0}, {0.0});
  auto hp = base_hypers(0.01);
  hp.precondition = false;
  hp.momentum = MomentumMode::ema;
  HeleneState st(1, hp);
  auto theta = one(1.0);
  const auto rec = helene_step(st, p, theta, Batch{}, 4);
  CHECK(rec.total_clip_triggers() == 0);
  CHECK_FALSE(rec.hessian_refreshed);
  CHECK(rec.alpha == doctest::Approx(0.1));
  CHECK(theta.data()[0] - 1.0 == doctest::Approx(-0.01 * st.m[0]).epsilon(1e-12));
}

TEST_CASE("momentum modes report their coefficient") {
  auto p = quad({1.0}, {0.0});
  for (auto [mode, want] : {std::pair{MomentumMode::ema, 0.1}, std::pair{MomentumMode::accumulate, 1.0},
                            std::pair{MomentumMode::annealed, anneal(1, 100, 0.9)}}) {
    auto hp = base_hypers();
    hp.momentum = mode;
    HeleneOptimizer opt(1, hp);
    auto theta = one(1.0);
    CHECK(opt.alpha_at(1) == doctest::Approx(want));
    CHECK(opt.step(p, theta, Batch{}, 3).alpha == doctest::Approx(want));
  }
}

TEST_CASE("weight decay shrinks parameters under a zero gradient") {
  auto p = constant_problem(2);
  auto hp = base_hypers(0.1);
  hp.weight_decay = 0.1;
  HeleneState st(2, hp);
  LayeredParams theta(make_layout({{"all", 2}}), {1.0, -2.0});
  helene_step(st, p, theta, Batch{}, 3);
  CHECK(theta.data()[0] == doctest::Approx(0.99));
  CHECK(theta.data()[1] == doctest::Approx(-1.98));
}

TEST_CASE("non-finite loss is reported as divergence and leaves state alone") {
  oracle::LambdaProblem p(2, [](std::span<const double> x) {
    return x[0] > 1.0 ? std::numeric_limits<double>::quiet_NaN() : x[0] * x[0];
  });
  auto hp = base_hypers();
  HeleneState st(2, hp);
  LayeredParams theta(make_layout({{"all", 2}}), {1.0, 1.0});
  // one of the two sides pushes x[0] above 1
  const auto rec = helene_step(st, p, theta, Batch{}, 8);
  CHECK(rec.diverged);
  CHECK_FALSE(rec.diagnostic.empty());
  CHECK(st.t == 1);
  const std::vector<double> zeros = {0.0, 0.0};
  CHECK(oracle::ulp_distance(theta.data()[0], 1.0) <= 2);
  CHECK(oracle::ulp_distance(theta.data()[1], 1.0) <= 2);
  CHECK(st.m == zeros);
}

TEST_CASE("helene hyperparameter validation names the field") {
  auto expect = [](auto mutate, const char* field) {
    auto hp = base_hypers();
    mutate(hp);
    try {
      hp.validate();
      FAIL("accepted bad " << field);
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  expect([](HeleneHypers& h) { h.beta1 = 1.0; }, "beta1");
  expect([](HeleneHypers& h) { h.beta2 = -0.1; }, "beta2");
  expect([](HeleneHypers& h) { h.gamma = 0; }, "gamma");
  expect([](HeleneHypers& h) { h.clip_floor.fallback = 0; }, "clip_floor");
  expect([](HeleneHypers& h) { h.clip_floor.per_layer["x"] = -1; }, "clip_floor.x");
  expect([](HeleneHypers& h) { h.eps_num = 0; }, "eps_num");
  expect([](HeleneHypers& h) { h.weight_decay = -1; }, "weight_decay");
  expect([](HeleneHypers& h) { h.hessian_interval = 0; }, "hessian_interval");
  expect([](HeleneHypers& h) { h.spsa_scale = 0; }, "spsa_scale");
  expect([](HeleneHypers& h) { h.n_dirs = 0; }, "n_dirs");
  expect([](HeleneHypers& h) { h.lr.base = -1; }, "lr");
  expect([](HeleneHypers& h) { h.anneal_T = 0; h.max_steps = 0; }, "anneal_T");
  CHECK_THROWS_AS(HeleneState(1, [] { auto h = base_hypers(); h.gamma = -1; return h; }()),
                  std::invalid_argument);
}

TEST_CASE("per-layer floors fall back to the default") {
  ClipFloors f;
  f.fallback = 2;
  f.per_layer = {{"b", 7}};
  CHECK(f.resolve(make_layout({{"a", 1}, {"b", 2}, {"c", 1}})) == std::vector<double>{2, 7, 2});
}

TEST_CASE("learning rate schedules") {
  LrSchedule s{LrSchedule::Kind::linear, 1.0, 10};
  CHECK(s.at(1) == 1.0);
  CHECK(s.at(6) == doctest::Approx(0.5));
  CHECK(s.at(10) == doctest::Approx(0.1));
  LrSchedule c{LrSchedule::Kind::cosine, 2.0, 4};
  CHECK(c.at(1) == 2.0);
  CHECK(c.at(3) == doctest::Approx(1.0));
  CHECK(LrSchedule{LrSchedule::Kind::constant, 0.3, 0}.at(99) == 0.3);
}

TEST_CASE("state accounting") {
  auto hp = base_hypers();
  HeleneOptimizer h(7, hp);
  CHECK(h.state_vectors() == 2);
  CHECK(h.state_doubles() == 14);
  ZoSgd z(ZoSgdHypers{});
  CHECK(z.state_vectors() == 0);
  CHECK(z.state_doubles() == 0);
  ZoSgdMomentum zm(7, ZoSgdHypers{});
  CHECK(zm.state_doubles() == 7);
  Adam a(7, AdamHypers{}, true);
  CHECK(a.state_doubles() == 14);
  ZoSophia s(7, SophiaHypers{});
  CHECK(s.state_doubles() == 14);
}

TEST_CASE("forward counts per step") {
  auto inner = quad({1, 2, 3}, {0, 0, 0});
  oracle::CountingProblem p(inner);
  LayeredParams theta(inner.layout(), {1, 1, 1});
  auto hp = base_hypers(0.01);
  HeleneOptimizer h(3, hp);
  auto rec = h.step(p, theta, Batch{}, 1);
  CHECK(rec.forwards == 2);
  CHECK(p.calls == 2);
  p.calls = 0;
  hp.n_dirs = 3;
  HeleneOptimizer h3(3, hp);
  rec = h3.step(p, theta, Batch{}, 1);
  CHECK(rec.forwards == 6);
  CHECK(p.calls == 6);
  p.calls = 0;
  ZoSgd z(ZoSgdHypers{});
  CHECK(z.step(p, theta, Batch{}, 2).forwards == 2);
  CHECK(p.calls == 2);
  p.calls = 0;
  NewtonDiag n(LrSchedule{LrSchedule::Kind::constant, 0.1, 0});
  CHECK(n.step(p, theta, Batch{}, 0).forwards == 7);
  CHECK(p.calls == 7);
  p.calls = 0;
  GradientDescent g(LrSchedule{LrSchedule::Kind::constant, 0.1, 0});
  CHECK(g.step(p, theta, Batch{}, 0).forwards == 1);
}

TEST_CASE("save and load state continue the same trajectory") {
  auto p = quad({1, 5, 20}, {0.3, -0.2, 0.1});
  auto hp = base_hypers(0.02);
  hp.hessian_interval = 3;
  HeleneOptimizer a(3, hp);
  LayeredParams theta(p.layout(), {1, 1, 1});
  for (std::uint64_t t = 1; t <= 5; ++t) a.step(p, theta, Batch{}, t);
  HeleneOptimizer b(3, hp);
  b.load_state(a.save_state());
  auto theta_b = theta;
  for (std::uint64_t t = 6; t <= 12; ++t) {
    a.step(p, theta, Batch{}, t);
    b.step(p, theta_b, Batch{}, t);
  }
  CHECK(theta.data() == theta_b.data());
  CHECK(a.save_state() == b.save_state());
  auto bad = a.save_state();
  bad["m"] = std::vector<double>{1.0};
  CHECK_THROWS_AS(b.load_state(bad), std::invalid_argument);
}

TEST_CASE("zo-sgd moves along -eta * projected * z") {
  auto p = quad({1, 3}, {0, 0});
  const double eta = 0.1, eps = 1e-3;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    LayeredParams theta(p.layout(), {0.7, -0.4});
    std::vector<double> copy = theta.data();
    const auto est = spsa_gradient(p, copy, Batch{}, {seed, eps});
    const auto z = materialize({seed, eps}, 2);
    ZoSgd opt(ZoSgdHypers{LrSchedule{LrSchedule::Kind::constant, eta, 0}, 0.9, 0.0, eps, 1});
    opt.step(p, theta, Batch{}, seed);
    CHECK(theta.data()[0] == doctest::Approx(0.7 - eta * est.projected * z[0]).epsilon(1e-12));
    CHECK(theta.data()[1] == doctest::Approx(-0.4 - eta * est.projected * z[1]).epsilon(1e-12));
  }
}

TEST_CASE("zero gradient leaves every zeroth-order method in place") {
  auto p = constant_problem(3);
  std::vector<std::unique_ptr<Optimizer>> opts;
  opts.push_back(std::make_unique<ZoSgd>(ZoSgdHypers{}));
  opts.push_back(std::make_unique<ZoSgdMomentum>(3, ZoSgdHypers{}));
  opts.push_back(std::make_unique<Adam>(3, AdamHypers{}, true));
  opts.push_back(std::make_unique<HeleneOptimizer>(3, base_hypers()));
  opts.push_back(std::make_unique<ZoSophia>(3, SophiaHypers{}));
  for (auto& o : opts) {
    LayeredParams theta(make_layout({{"all", 3}}), {1, -2, 3});
    for (std::uint64_t t = 1; t <= 5; ++t) o->step(p, theta, Batch{}, t);
    // the perturbation walk restores theta to within a few ulps per step
    const std::vector<double> start = {1, -2, 3};
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK_MESSAGE(oracle::ulp_distance(theta.data()[j], start[j]) <= 10, o->name());
    }
  }
}

TEST_CASE("adam's first step has magnitude eta per coordinate") {
  auto p = quad({1, 10, 100}, {0, 0, 0});
  for (bool zo : {true, false}) {
    Adam a(3, AdamHypers{LrSchedule{LrSchedule::Kind::constant, 0.01, 0}}, zo);
    LayeredParams theta(p.layout(), {1, 1, 1});
    a.step(p, theta, Batch{}, 17);
    for (double v : theta.data()) CHECK(std::abs(v - 1.0) == doctest::Approx(0.01).epsilon(1e-5));
  }
}

TEST_CASE("sophia update clips the ratio to one") {
  LayeredParams a(make_layout({{"all", 1}}), {0.0});
  sophia_update(a, std::vector<double>{5.0}, std::vector<double>{1.0}, 0.1, 1.0, 1e-12);
  CHECK(a.data()[0] == doctest::Approx(-0.1));
  LayeredParams b(make_layout({{"all", 1}}), {0.0});
  sophia_update(b, std::vector<double>{0.3}, std::vector<double>{1.0}, 0.1, 1.0, 1e-12);
  CHECK(b.data()[0] == doctest::Approx(-0.03));
  LayeredParams c(make_layout({{"x", 2}, {"y", 3}}), {0, 0, 0, 0, 0});
  const auto trig = sophia_update(c, std::vector<double>{5, -3, 0.5, 2, -0.2},
                                  std::vector<double>{1, 1, 1, 1, 1}, 0.1, 1.0, 1e-12);
  CHECK(trig == std::vector<std::size_t>{2, 1});
}

TEST_CASE("newton on a quadratic reaches the optimum in one step") {
  auto p = quad({2, 8}, {1, -1});
  NewtonDiag n(LrSchedule{LrSchedule::Kind::constant, 1.0, 0});
  LayeredParams theta(p.layout(), {0, 0});
  n.step(p, theta, Batch{}, 0);
  CHECK(theta.data()[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(theta.data()[1] == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("newton ascends along a concave coordinate") {
  Toy2DProblem p;
  NewtonDiag n(LrSchedule{LrSchedule::Kind::constant, 1.0, 0});
  LayeredParams theta(p.layout(), {0.3, 0.0});
  const double before = p.full_loss(theta.values());
  n.step(p, theta, Batch{}, 0);
  CHECK(p.full_loss(theta.values()) > before);
  CHECK(std::abs(theta.data()[0] - 0.10103125788101083) < 0.05);
}

TEST_CASE("newton flags near-zero curvature") {
  Linear p;
  NewtonDiag n(LrSchedule{LrSchedule::Kind::constant, 1.0, 0});
  auto theta = one(2.0);
  const auto rec = n.step(p, theta, Batch{}, 0);
  CHECK(rec.diverged);
  CHECK(theta.data()[0] == 2.0);
}

TEST_CASE("gradient descent contraction and instability") {
  auto p = quad({1.0}, {0.0});
  GradientDescent g(LrSchedule{LrSchedule::Kind::constant, 0.1, 0});
  auto theta = one(1.0);
  g.step(p, theta, Batch{}, 0);
  CHECK(theta.data()[0] == doctest::Approx(0.9));

  GradientDescent edge(LrSchedule{LrSchedule::Kind::constant, 2.0, 0});
  auto t2 = one(1.0);
  for (int i = 1; i <= 6; ++i) {
    edge.step(p, t2, Batch{}, 0);
    CHECK(t2.data()[0] == (i % 2 ? -1.0 : 1.0));
  }
  GradientDescent past(LrSchedule{LrSchedule::Kind::constant, 2.5, 0});
  auto t3 = one(1.0);
  double prev = 1.0;
  for (int i = 0; i < 6; ++i) {
    past.step(p, t3, Batch{}, 0);
    CHECK(std::abs(t3.data()[0]) > prev);
    prev = std::abs(t3.data()[0]);
  }
}

TEST_CASE("baseline constructors reject bad hyperparameters") {
  ZoSgdHypers zero_scale;
  zero_scale.spsa_scale = 0.0;
  CHECK_THROWS_AS(ZoSgd{zero_scale}, std::invalid_argument);
  ZoSgdHypers no_dirs;
  no_dirs.n_dirs = 0;
  CHECK_THROWS_AS(ZoSgd{no_dirs}, std::invalid_argument);
  ZoSgdHypers heavy;
  heavy.momentum = 1.0;
  CHECK_THROWS_AS(ZoSgdMomentum(2, heavy), std::invalid_argument);
  AdamHypers adam;
  adam.beta1 = 1.0;
  CHECK_THROWS_AS(Adam(2, adam, true), std::invalid_argument);
  SophiaHypers sophia;
  sophia.hessian_interval = 0;
  CHECK_THROWS_AS(ZoSophia(2, sophia), std::invalid_argument);
  CHECK_THROWS_AS(NewtonDiag(LrSchedule{}, 0.0), std::invalid_argument);
}
