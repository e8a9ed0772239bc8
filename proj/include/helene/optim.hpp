#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "helene/hessian_est.hpp"
#include "helene/param_store.hpp"
#include "helene/problem.hpp"
#include "helene/zo_grad.hpp"

namespace helene {

/// Learning rate eta_t for t = 1..total_steps.
struct LrSchedule {
  enum class Kind { constant, linear, cosine };
  Kind kind = Kind::constant;
  double base = 1e-3;
  std::size_t total_steps = 0;  // required by linear/cosine

  double at(std::size_t t) const;
};

/// Per-layer Hessian floors lambda_i; layers not listed use `fallback`.
struct ClipFloors {
  double fallback = 1.0;
  std::map<std::string, double> per_layer;

  double for_layer(const std::string& name) const;
  std::vector<double> resolve(const Layout& layout) const;
};

/// How the current gradient enters the momentum EMA m = beta1 m + alpha g.
enum class MomentumMode {
  annealed,     // alpha = beta1 + (1 - beta1) exp(-t / anneal_T)
  ema,          // alpha = 1 - beta1 (plain EMA, no annealing)
  accumulate,   // alpha = 1 (biased, no annealing)
};

enum class CurvatureEstimator { agnb, gnb };

struct HeleneHypers {
  LrSchedule lr;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double gamma = 1.0;
  ClipFloors clip_floor;
  double eps_num = 1e-12;
  double weight_decay = 0.0;
  std::size_t hessian_interval = 10;  // k
  double anneal_T = 0.0;              // <= 0 means "use max_steps"
  std::size_t max_steps = 0;          // T; 0 = unbounded
  double spsa_scale = kDefaultSpsaScale;
  std::size_t n_dirs = 1;
  MomentumMode momentum = MomentumMode::annealed;
  bool precondition = true;  // false: denominator 1 (momentum-only ablation variants)
  CurvatureEstimator estimator = CurvatureEstimator::agnb;
  bool per_example_sum = false;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  double effective_anneal_T() const;
};

/// alpha = beta1 + (1 - beta1) exp(-t / anneal_T).
double anneal(double t, double anneal_T, double beta1);

/// One optimizer step's bookkeeping.
struct StepRecord {
  double batch_loss = 0.0;  // central minibatch loss estimate at theta_t
  double step_norm = 0.0;   // ||theta_{t+1} - theta_t||_2
  double alpha = 0.0;       // gradient coefficient in the momentum EMA (0 if n/a)
  std::vector<std::size_t> clip_triggers;  // per layer
  std::size_t forwards = 0;                // loss evaluations spent by the optimizer
  bool hessian_refreshed = false;
  bool diverged = false;
  std::string diagnostic;

  std::size_t total_clip_triggers() const;
};

struct HeleneState {
  std::vector<double> m;
  std::vector<double> h;
  std::size_t t = 1;  // index of the next step
  HeleneHypers hypers;

  HeleneState() = default;
  HeleneState(std::size_t d, HeleneHypers hypers);
};

/// One step of HELENE with layer-wise clipping. Mutates `params` and `state`.
StepRecord helene_step(HeleneState& state, const Problem& problem, LayeredParams& params,
                       const Batch& batch, std::uint64_t step_seed);

/// Common interface for every optimizer driven by the harness.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string name() const = 0;
  virtual StepRecord step(const Problem& problem, LayeredParams& params, const Batch& batch,
                          std::uint64_t step_seed) = 0;
  /// Number of parameter-length vectors the optimizer keeps between steps.
  virtual std::size_t state_vectors() const = 0;
  /// Doubles actually held in persistent state.
  virtual std::size_t state_doubles() const = 0;
  virtual nlohmann::json save_state() const = 0;
  virtual void load_state(const nlohmann::json& state) = 0;
  /// Value of alpha reported for step t without taking the step (0 if n/a).
  virtual double alpha_at(std::size_t) const { return 0.0; }
};

class HeleneOptimizer final : public Optimizer {
 public:
  HeleneOptimizer(std::size_t d, HeleneHypers hypers);
  std::string name() const override { return "helene"; }
  StepRecord step(const Problem& problem, LayeredParams& params, const Batch& batch,
                  std::uint64_t step_seed) override;
  std::size_t state_vectors() const override { return 2; }
  std::size_t state_doubles() const override { return state_.m.size() + state_.h.size(); }
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;
  double alpha_at(std::size_t t) const override;

  const HeleneState& state() const { return state_; }

 private:
  HeleneState state_;
};

struct ZoSgdHypers {
  LrSchedule lr;
  double momentum = 0.9;  // ZO-SGD-MMT only
  double weight_decay = 0.0;
  double spsa_scale = kDefaultSpsaScale;
  std::size_t n_dirs = 1;
};

/// MeZO-style ZO-SGD: theta -= eta * projected * z, streamed without densifying g.
class ZoSgd final : public Optimizer {
 public:
  explicit ZoSgd(ZoSgdHypers hypers);
  std::string name() const override { return "zo_sgd"; }
  StepRecord step(const Problem& problem, LayeredParams& params, const Batch& batch,
                  std::uint64_t step_seed) override;
  std::size_t state_vectors() const override { return 0; }
  std::size_t state_doubles() const override { return 0; }
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

 private:
  ZoSgdHypers hypers_;
  std::size_t t_ = 1;
};

/// Heavy-ball ZO-SGD: m = mu m + g; theta -= eta m.
class ZoSgdMomentum final : public Optimizer {
 public:
  ZoSgdMomentum(std::size_t d, ZoSgdHypers hypers);
  std::string name() const override { return "zo_sgd_mmt"; }
  StepRecord step(const Problem& problem, LayeredParams& params, const Batch& batch,
                  std::uint64_t step_seed) override;
  std::size_t state_vectors() const override { return 1; }
  std::size_t state_doubles() const override { return m_.size(); }
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

 private:
  ZoSgdHypers hypers_;
  std::vector<double> m_;
  std::size_t t_ = 1;
};

struct AdamHypers {
  LrSchedule lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double spsa_scale = kDefaultSpsaScale;  // ZO variant only
  std::size_t n_dirs = 1;                 // ZO variant only
};

/// Adam with bias correction, fed by SPSA (zeroth order) or exact gradients.
class Adam final : public Optimizer {
 public:
  Adam(std::size_t d, AdamHypers hypers, bool zeroth_order);
  std::string name() const override { return zeroth_order_ ? "zo_adam" : "fo_adam"; }
  StepRecord step(const Problem& problem, LayeredParams& params, const Batch& batch,
                  std::uint64_t step_seed) override;
  std::size_t state_vectors() const override { return 2; }
  std::size_t state_doubles() const override { return m_.size() + v_.size(); }
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

 private:
  AdamHypers hypers_;
  bool zeroth_order_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 1;
};

struct SophiaHypers {
  LrSchedule lr;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double gamma = 1.0;
  double eps_num = 1e-12;
  double weight_decay = 0.0;
  std::size_t hessian_interval = 10;
  double spsa_scale = kDefaultSpsaScale;
};

/// Sophia-style ZO optimizer: plain EMAs of g and the A-GNB diagonal, update
/// -eta * clip(m / max(gamma h, eps), [-1, 1]) with global clip value 1.
class ZoSophia final : public Optimizer {
 public:
  ZoSophia(std::size_t d, SophiaHypers hypers);
  std::string name() const override { return "zo_sophia"; }
  StepRecord step(const Problem& problem, LayeredParams& params, const Batch& batch,
                  std::uint64_t step_seed) override;
  std::size_t state_vectors() const override { return 2; }
  std::size_t state_doubles() const override { return m_.size() + h_.size(); }
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;
  double alpha_at(std::size_t) const override { return 1.0 - hypers_.beta1; }

 private:
  SophiaHypers hypers_;
  std::vector<double> m_;
  std::vector<double> h_;
  std::size_t t_ = 1;
};

/// Applies the clipped Sophia update given m and h; returns per-layer trigger
/// counts (coordinates where |m / max(gamma h, eps)| > 1).
std::vector<std::size_t> sophia_update(LayeredParams& params, std::span<const double> m,
                                       std::span<const double> h, double lr, double gamma,
                                       double eps_num);

/// Undamped diagonal Newton: theta -= eta g / diag(H), H from the
/// finite-difference oracle. No clipping, no sign guard.
class NewtonDiag final : public Optimizer {
 public:
  NewtonDiag(LrSchedule lr, double fd_step = 1e-3);
  std::string name() const override { return "newton_diag"; }
  StepRecord step(const Problem& problem, LayeredParams& params, const Batch& batch,
                  std::uint64_t step_seed) override;
  std::size_t state_vectors() const override { return 0; }
  std::size_t state_doubles() const override { return 0; }
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

 private:
  LrSchedule lr_;
  double fd_step_;
  std::size_t t_ = 1;
};

/// Curvature magnitude below which Newton-diag records a divergence event.
inline constexpr double kNewtonMinCurvature = 1e-30;

/// First-order gradient descent on exact gradients.
class GradientDescent final : public Optimizer {
 public:
  explicit GradientDescent(LrSchedule lr);
  std::string name() const override { return "fo_gd"; }
  StepRecord step(const Problem& problem, LayeredParams& params, const Batch& batch,
                  std::uint64_t step_seed) override;
  std::size_t state_vectors() const override { return 0; }
  std::size_t state_doubles() const override { return 0; }
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

 private:
  LrSchedule lr_;
  std::size_t t_ = 1;
};

}  // namespace helene
