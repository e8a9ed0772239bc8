#include "helene/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace helene {

double LrSchedule::at(std::size_t t) const {
  switch (kind) {
    case Kind::constant:
      return base;
    case Kind::linear: {
      if (total_steps == 0) {
        return base;
      }
      const double frac = static_cast<double>(std::min(t, total_steps) - 1) /
                          static_cast<double>(total_steps);
      return base * (1.0 - frac);
    }
    case Kind::cosine: {
      if (total_steps == 0) {
        return base;
      }
      const double frac = static_cast<double>(std::min(t, total_steps) - 1) /
                          static_cast<double>(total_steps);
      return base * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    }
  }
  return base;
}

double ClipFloors::for_layer(const std::string& name) const {
  auto it = per_layer.find(name);
  return it == per_layer.end() ? fallback : it->second;
}

std::vector<double> ClipFloors::resolve(const Layout& layout) const {
  std::vector<double> floors;
  floors.reserve(layout.size());
  for (const auto& spec : layout) {
    floors.push_back(for_layer(spec.name));
  }
  return floors;
}

void HeleneHypers::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("helene." + field + ": " + why);
  };
  if (!(lr.base >= 0.0) || !std::isfinite(lr.base)) fail("lr", "must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must lie in [0, 1)");
  if (!(gamma > 0.0)) fail("gamma", "must be > 0");
  if (!(clip_floor.fallback > 0.0)) fail("clip_floor", "must be > 0");
  for (const auto& [name, value] : clip_floor.per_layer) {
    if (!(value > 0.0)) fail("clip_floor." + name, "must be > 0");
  }
  if (!(eps_num > 0.0)) fail("eps_num", "must be > 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay", "must be >= 0");
  if (hessian_interval == 0) fail("hessian_interval", "must be >= 1");
  if (!(spsa_scale > 0.0)) fail("spsa_scale", "must be > 0");
  if (n_dirs == 0) fail("n_dirs", "must be >= 1");
  if (anneal_T <= 0.0 && max_steps == 0) fail("anneal_T", "must be > 0 when max_steps is unset");
}

double HeleneHypers::effective_anneal_T() const {
  return anneal_T > 0.0 ? anneal_T : static_cast<double>(max_steps);
}

double anneal(double t, double anneal_T, double beta1) {
  return beta1 + (1.0 - beta1) * std::exp(-t / anneal_T);
}

std::size_t StepRecord::total_clip_triggers() const {
  std::size_t total = 0;
  for (auto c : clip_triggers) {
    total += c;
  }
  return total;
}

namespace {

struct DenseSpsa {
  std::vector<double> grad;
  double mean_loss = 0.0;
  std::size_t forwards = 0;
  SpsaEstimate first;  // the single-direction estimate when n_dirs == 1
};

DenseSpsa dense_spsa(const Problem& problem, LayeredParams& params, const Batch& batch,
                     std::uint64_t step_seed, double scale, std::size_t n_dirs) {
  DenseSpsa out;
  out.grad.assign(params.size(), 0.0);
  double loss_acc = 0.0;
  for (std::size_t i = 0; i < n_dirs; ++i) {
    const PerturbationHandle handle{n_dirs == 1 ? step_seed : derive_seed(step_seed, i), scale};
    const auto est = spsa_gradient(problem, params.values(), batch, handle);
    if (i == 0) {
      out.first = est;
    }
    add_direction(out.grad, handle.seed, est.projected);
    loss_acc += est.mean_loss();
    out.forwards += 2;
  }
  if (n_dirs > 1) {
    const double inv = 1.0 / static_cast<double>(n_dirs);
    for (auto& v : out.grad) {
      v *= inv;
    }
  }
  out.mean_loss = loss_acc / static_cast<double>(n_dirs);
  return out;
}

// Applies `next` to params if every entry is finite; otherwise flags divergence
// and leaves params untouched.
void commit(LayeredParams& params, std::vector<double>& next, StepRecord& rec) {
  double norm2 = 0.0;
  auto values = params.values();
  for (std::size_t j = 0; j < next.size(); ++j) {
    if (!std::isfinite(next[j])) {
      rec.diverged = true;
      rec.diagnostic = "non-finite parameter at coordinate " + std::to_string(j);
      return;
    }
    const double delta = next[j] - values[j];
    norm2 += delta * delta;
  }
  std::copy(next.begin(), next.end(), values.begin());
  rec.step_norm = std::sqrt(norm2);
}

std::vector<double> copy_values(const LayeredParams& params) {
  return {params.values().begin(), params.values().end()};
}

void apply_weight_decay(std::vector<double>& theta, double lr, double wd) {
  if (wd == 0.0) {
    return;
  }
  for (auto& x : theta) {
    x -= lr * wd * x;
  }
}

nlohmann::json vec_json(const std::vector<double>& v) { return nlohmann::json(v); }

void load_vec(const nlohmann::json& j, const char* key, std::vector<double>& out) {
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != out.size()) {
    throw std::invalid_argument(std::string("state '") + key + "' has wrong length");
  }
  out = std::move(v);
}

template <typename Fn>
StepRecord guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const NonFiniteLossError& e) {
    StepRecord rec;
    rec.diverged = true;
    rec.forwards = 2;
    rec.diagnostic = e.what();
    return rec;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// HELENE

HeleneState::HeleneState(std::size_t d, HeleneHypers hyp)
    : m(d, 0.0), h(d, 0.0), t(1), hypers(std::move(hyp)) {
  hypers.validate();
}

StepRecord helene_step(HeleneState& state, const Problem& problem, LayeredParams& params,
                       const Batch& batch, std::uint64_t step_seed) {
  const auto& hp = state.hypers;
  const std::size_t d = params.size();
  if (state.m.size() != d || state.h.size() != d) {
    throw std::invalid_argument("helene_step: state dimension does not match parameters");
  }
  if (hp.max_steps != 0 && state.t > hp.max_steps) {
    throw std::logic_error("helene_step: step budget exhausted");
  }
  const std::size_t t = state.t;
  return guarded([&] {
    StepRecord rec;
    // Gradient g_t from SPSA.
    auto spsa = dense_spsa(problem, params, batch, step_seed, hp.spsa_scale, hp.n_dirs);
    rec.batch_loss = spsa.mean_loss;
    rec.forwards = spsa.forwards;

    // Momentum EMA with the annealed coefficient.
    double alpha = 1.0;
    switch (hp.momentum) {
      case MomentumMode::annealed:
        alpha = anneal(static_cast<double>(t), hp.effective_anneal_T(), hp.beta1);
        break;
      case MomentumMode::ema:
        alpha = 1.0 - hp.beta1;
        break;
      case MomentumMode::accumulate:
        alpha = 1.0;
        break;
    }
    rec.alpha = alpha;
    std::vector<double> m_next(d);
    for (std::size_t j = 0; j < d; ++j) {
      m_next[j] = hp.beta1 * state.m[j] + alpha * spsa.grad[j];
    }

    // Hessian EMA, refreshed on t = 1, k + 1, 2k + 1, ...
    std::vector<double> h_next = state.h;
    if (hp.precondition && (t - 1) % hp.hessian_interval == 0) {
      DiagHessianEstimate h_hat;
      const PerturbationHandle handle{step_seed, hp.spsa_scale};
      if (hp.estimator == CurvatureEstimator::gnb) {
        h_hat = gnb_diag(problem, params.values(), batch, derive_seed(step_seed, 0x676e62),
                         SpsaGrad{handle}, GnbOptions{hp.per_example_sum});
        rec.forwards += hp.per_example_sum ? 2 * batch.indices.size() : 2;
      } else if (hp.per_example_sum && batch.indices.size() > 1) {
        h_hat = agnb_diag(problem, params.values(), batch, SpsaGrad{handle},
                          GnbOptions{true});
        rec.forwards += 2 * batch.indices.size();
      } else {
        // Reuses the step's gradient: no extra forward passes.
        h_hat = agnb_from_gradient(spsa.grad, batch.size());
      }
      for (std::size_t j = 0; j < d; ++j) {
        h_next[j] = hp.beta2 * state.h[j] + (1.0 - hp.beta2) * h_hat.values[j];
      }
      rec.hessian_refreshed = true;
    }

    const double lr = hp.lr.at(t);
    std::vector<double> theta = copy_values(params);
    apply_weight_decay(theta, lr, hp.weight_decay);

    // Layer-wise clipped preconditioned update.
    const auto& layout = params.layout();
    rec.clip_triggers.assign(layout.size(), 0);
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const double floor = hp.clip_floor.for_layer(layout[i].name);
      for (std::size_t j = layout[i].offset; j < layout[i].offset + layout[i].dim; ++j) {
        double denom = 1.0;
        if (hp.precondition) {
          if (h_next[j] < floor) {
            ++rec.clip_triggers[i];
          }
          denom = hp.gamma * std::max(h_next[j], floor) + hp.eps_num;
        }
        theta[j] -= lr * m_next[j] / denom;
      }
    }

    commit(params, theta, rec);
    if (!rec.diverged) {
      state.m = std::move(m_next);
      state.h = std::move(h_next);
      ++state.t;
    }
    return rec;
  });
}

HeleneOptimizer::HeleneOptimizer(std::size_t d, HeleneHypers hypers) : state_(d, std::move(hypers)) {}

StepRecord HeleneOptimizer::step(const Problem& problem, LayeredParams& params, const Batch& batch,
                                 std::uint64_t step_seed) {
  return helene_step(state_, problem, params, batch, step_seed);
}

double HeleneOptimizer::alpha_at(std::size_t t) const {
  const auto& hp = state_.hypers;
  switch (hp.momentum) {
    case MomentumMode::annealed:
      return anneal(static_cast<double>(t), hp.effective_anneal_T(), hp.beta1);
    case MomentumMode::ema:
      return 1.0 - hp.beta1;
    case MomentumMode::accumulate:
      return 1.0;
  }
  return 0.0;
}

nlohmann::json HeleneOptimizer::save_state() const {
  return {{"optimizer", name()}, {"t", state_.t}, {"m", vec_json(state_.m)},
          {"h", vec_json(state_.h)}};
}

void HeleneOptimizer::load_state(const nlohmann::json& j) {
  load_vec(j, "m", state_.m);
  load_vec(j, "h", state_.h);
  state_.t = j.at("t").get<std::size_t>();
}

// ---------------------------------------------------------------------------
// ZO-SGD and heavy-ball ZO-SGD

ZoSgd::ZoSgd(ZoSgdHypers hypers) : hypers_(std::move(hypers)) {
  if (!(hypers_.spsa_scale > 0.0) || hypers_.n_dirs == 0) {
    throw std::invalid_argument("zo_sgd: spsa_scale must be > 0 and n_dirs >= 1");
  }
}

StepRecord ZoSgd::step(const Problem& problem, LayeredParams& params, const Batch& batch,
                       std::uint64_t step_seed) {
  return guarded([&] {
    StepRecord rec;
    rec.clip_triggers.assign(params.num_layers(), 0);
    const double lr = hypers_.lr.at(t_);
    if (hypers_.n_dirs == 1 && hypers_.weight_decay == 0.0) {
      // Rank-one update streamed from the seed; g is never densified.
      const PerturbationHandle handle{step_seed, hypers_.spsa_scale};
      const auto est = spsa_gradient(problem, params.values(), batch, handle);
      rec.batch_loss = est.mean_loss();
      rec.forwards = 2;
      const double coeff = -lr * est.projected;
      if (!std::isfinite(coeff)) {
        rec.diverged = true;
        rec.diagnostic = "non-finite SPSA projection";
        return rec;
      }
      add_direction(params.values(), handle.seed, coeff);
      rec.step_norm = std::abs(coeff) * std::sqrt(direction_norm_squared(handle.seed, params.size()));
    } else {
      auto spsa = dense_spsa(problem, params, batch, step_seed, hypers_.spsa_scale, hypers_.n_dirs);
      rec.batch_loss = spsa.mean_loss;
      rec.forwards = spsa.forwards;
      auto theta = copy_values(params);
      apply_weight_decay(theta, lr, hypers_.weight_decay);
      for (std::size_t j = 0; j < theta.size(); ++j) {
        theta[j] -= lr * spsa.grad[j];
      }
      commit(params, theta, rec);
    }
    if (!rec.diverged) {
      ++t_;
    }
    return rec;
  });
}

nlohmann::json ZoSgd::save_state() const { return {{"optimizer", name()}, {"t", t_}}; }
void ZoSgd::load_state(const nlohmann::json& j) { t_ = j.at("t").get<std::size_t>(); }

ZoSgdMomentum::ZoSgdMomentum(std::size_t d, ZoSgdHypers hypers)
    : hypers_(std::move(hypers)), m_(d, 0.0) {
  if (!(hypers_.momentum >= 0.0 && hypers_.momentum < 1.0)) {
    throw std::invalid_argument("zo_sgd_mmt.momentum: must lie in [0, 1)");
  }
}

StepRecord ZoSgdMomentum::step(const Problem& problem, LayeredParams& params, const Batch& batch,
                               std::uint64_t step_seed) {
  return guarded([&] {
    StepRecord rec;
    rec.clip_triggers.assign(params.num_layers(), 0);
    auto spsa = dense_spsa(problem, params, batch, step_seed, hypers_.spsa_scale, hypers_.n_dirs);
    rec.batch_loss = spsa.mean_loss;
    rec.forwards = spsa.forwards;
    const double lr = hypers_.lr.at(t_);
    std::vector<double> m_next(m_.size());
    auto theta = copy_values(params);
    apply_weight_decay(theta, lr, hypers_.weight_decay);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m_next[j] = hypers_.momentum * m_[j] + spsa.grad[j];
      theta[j] -= lr * m_next[j];
    }
    commit(params, theta, rec);
    if (!rec.diverged) {
      m_ = std::move(m_next);
      ++t_;
    }
    return rec;
  });
}

nlohmann::json ZoSgdMomentum::save_state() const {
  return {{"optimizer", name()}, {"t", t_}, {"m", vec_json(m_)}};
}

void ZoSgdMomentum::load_state(const nlohmann::json& j) {
  load_vec(j, "m", m_);
  t_ = j.at("t").get<std::size_t>();
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::size_t d, AdamHypers hypers, bool zeroth_order)
    : hypers_(std::move(hypers)), zeroth_order_(zeroth_order), m_(d, 0.0), v_(d, 0.0) {
  if (!(hypers_.beta1 >= 0.0 && hypers_.beta1 < 1.0) ||
      !(hypers_.beta2 >= 0.0 && hypers_.beta2 < 1.0) || !(hypers_.eps > 0.0)) {
    throw std::invalid_argument("adam: betas must lie in [0, 1) and eps > 0");
  }
}

StepRecord Adam::step(const Problem& problem, LayeredParams& params, const Batch& batch,
                      std::uint64_t step_seed) {
  return guarded([&] {
    StepRecord rec;
    rec.clip_triggers.assign(params.num_layers(), 0);
    std::vector<double> g;
    if (zeroth_order_) {
      auto spsa = dense_spsa(problem, params, batch, step_seed, hypers_.spsa_scale, hypers_.n_dirs);
      g = std::move(spsa.grad);
      rec.batch_loss = spsa.mean_loss;
      rec.forwards = spsa.forwards;
    } else {
      g.assign(params.size(), 0.0);
      problem.exact_gradient(params.values(), batch, g);
      rec.batch_loss = problem.loss(params.values(), batch);
      rec.forwards = 1;
    }
    const double lr = hypers_.lr.at(t_);
    const double tt = static_cast<double>(t_);
    const double bc1 = 1.0 - std::pow(hypers_.beta1, tt);
    const double bc2 = 1.0 - std::pow(hypers_.beta2, tt);
    std::vector<double> m_next(m_.size());
    std::vector<double> v_next(v_.size());
    auto theta = copy_values(params);
    apply_weight_decay(theta, lr, hypers_.weight_decay);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m_next[j] = hypers_.beta1 * m_[j] + (1.0 - hypers_.beta1) * g[j];
      v_next[j] = hypers_.beta2 * v_[j] + (1.0 - hypers_.beta2) * g[j] * g[j];
      const double m_hat = m_next[j] / bc1;
      const double v_hat = v_next[j] / bc2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + hypers_.eps);
    }
    commit(params, theta, rec);
    if (!rec.diverged) {
      m_ = std::move(m_next);
      v_ = std::move(v_next);
      ++t_;
    }
    return rec;
  });
}

nlohmann::json Adam::save_state() const {
  return {{"optimizer", name()}, {"t", t_}, {"m", vec_json(m_)}, {"v", vec_json(v_)}};
}

void Adam::load_state(const nlohmann::json& j) {
  load_vec(j, "m", m_);
  load_vec(j, "v", v_);
  t_ = j.at("t").get<std::size_t>();
}

// ---------------------------------------------------------------------------
// Sophia-style

std::vector<std::size_t> sophia_update(LayeredParams& params, std::span<const double> m,
                                       std::span<const double> h, double lr, double gamma,
                                       double eps_num) {
  const auto& layout = params.layout();
  std::vector<std::size_t> triggers(layout.size(), 0);
  auto theta = params.values();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    for (std::size_t j = layout[i].offset; j < layout[i].offset + layout[i].dim; ++j) {
      const double ratio = m[j] / std::max(gamma * h[j], eps_num);
      if (std::abs(ratio) > 1.0) {
        ++triggers[i];
      }
      theta[j] -= lr * std::clamp(ratio, -1.0, 1.0);
    }
  }
  return triggers;
}

ZoSophia::ZoSophia(std::size_t d, SophiaHypers hypers)
    : hypers_(std::move(hypers)), m_(d, 0.0), h_(d, 0.0) {
  if (hypers_.hessian_interval == 0 || !(hypers_.gamma > 0.0) || !(hypers_.eps_num > 0.0)) {
    throw std::invalid_argument("zo_sophia: hessian_interval >= 1, gamma > 0, eps_num > 0");
  }
}

StepRecord ZoSophia::step(const Problem& problem, LayeredParams& params, const Batch& batch,
                          std::uint64_t step_seed) {
  return guarded([&] {
    StepRecord rec;
    auto spsa = dense_spsa(problem, params, batch, step_seed, hypers_.spsa_scale, 1);
    rec.batch_loss = spsa.mean_loss;
    rec.forwards = spsa.forwards;
    rec.alpha = 1.0 - hypers_.beta1;
    const std::size_t d = params.size();
    std::vector<double> m_next(d);
    for (std::size_t j = 0; j < d; ++j) {
      m_next[j] = hypers_.beta1 * m_[j] + (1.0 - hypers_.beta1) * spsa.grad[j];
    }
    std::vector<double> h_next = h_;
    if ((t_ - 1) % hypers_.hessian_interval == 0) {
      const auto h_hat = agnb_from_gradient(spsa.grad, batch.size());
      for (std::size_t j = 0; j < d; ++j) {
        h_next[j] = hypers_.beta2 * h_[j] + (1.0 - hypers_.beta2) * h_hat.values[j];
      }
      rec.hessian_refreshed = true;
    }
    const double lr = hypers_.lr.at(t_);
    auto decayed = copy_values(params);
    apply_weight_decay(decayed, lr, hypers_.weight_decay);
    LayeredParams next(params.layout(), std::move(decayed));
    rec.clip_triggers = sophia_update(next, m_next, h_next, lr, hypers_.gamma, hypers_.eps_num);
    auto theta = copy_values(next);
    commit(params, theta, rec);
    if (!rec.diverged) {
      m_ = std::move(m_next);
      h_ = std::move(h_next);
      ++t_;
    }
    return rec;
  });
}

nlohmann::json ZoSophia::save_state() const {
  return {{"optimizer", name()}, {"t", t_}, {"m", vec_json(m_)}, {"h", vec_json(h_)}};
}

void ZoSophia::load_state(const nlohmann::json& j) {
  load_vec(j, "m", m_);
  load_vec(j, "h", h_);
  t_ = j.at("t").get<std::size_t>();
}

// ---------------------------------------------------------------------------
// Newton-diag and gradient descent

NewtonDiag::NewtonDiag(LrSchedule lr, double fd_step) : lr_(lr), fd_step_(fd_step) {
  if (!(fd_step_ > 0.0)) {
    throw std::invalid_argument("newton_diag.fd_step: must be > 0");
  }
}

StepRecord NewtonDiag::step(const Problem& problem, LayeredParams& params, const Batch& batch,
                            std::uint64_t) {
  StepRecord rec;
  rec.clip_triggers.assign(params.num_layers(), 0);
  std::vector<double> g(params.size());
  problem.exact_gradient(params.values(), batch, g);
  const auto hess = fd_diag_hessian(problem, params.values(), batch, fd_step_);
  rec.batch_loss = hess.center_loss;
  rec.forwards = 2 * params.size() + 1;
  const double lr = lr_.at(t_);
  auto theta = copy_values(params);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (std::abs(hess.values[j]) < kNewtonMinCurvature) {
      rec.diverged = true;
      rec.diagnostic = "near-zero curvature at coordinate " + std::to_string(j);
      return rec;
    }
    theta[j] -= lr * g[j] / hess.values[j];
  }
  commit(params, theta, rec);
  if (!rec.diverged) {
    ++t_;
  }
  return rec;
}

nlohmann::json NewtonDiag::save_state() const { return {{"optimizer", name()}, {"t", t_}}; }
void NewtonDiag::load_state(const nlohmann::json& j) { t_ = j.at("t").get<std::size_t>(); }

GradientDescent::GradientDescent(LrSchedule lr) : lr_(lr) {}

StepRecord GradientDescent::step(const Problem& problem, LayeredParams& params, const Batch& batch,
                                 std::uint64_t) {
  StepRecord rec;
  rec.clip_triggers.assign(params.num_layers(), 0);
  std::vector<double> g(params.size());
  problem.exact_gradient(params.values(), batch, g);
  rec.batch_loss = problem.loss(params.values(), batch);
  rec.forwards = 1;
  const double lr = lr_.at(t_);
  auto theta = copy_values(params);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    theta[j] -= lr * g[j];
  }
  commit(params, theta, rec);
  if (!rec.diverged) {
    ++t_;
  }
  return rec;
}

nlohmann::json GradientDescent::save_state() const { return {{"optimizer", name()}, {"t", t_}}; }
void GradientDescent::load_state(const nlohmann::json& j) { t_ = j.at("t").get<std::size_t>(); }

}  // namespace helene
