#pragma once

#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tapsim/learner.hpp"
#include "tapsim/powerflow.hpp"

namespace tapsim {

/// Shared controller parameters; the learning fields only matter for the
/// RL controller, the range bounds only for the conventional one.
struct ControllerConfig {
  int relearn_period = 24;     // K: steps between policy refits
  int sweeps = 1;              // J
  int batch_size = 6000;       // D
  double deadband = 1e-4;      // minimum action-value gain before moving
  double gamma = 0.9;
  double epsilon = 1e-5;       // lstdq convergence threshold
  double ridge_c = 0.1;
  double sigma = 1.0;
  int kappa = 21;
  double rbf_v_start = 0.895;
  double rbf_v_step = 0.005;
  // Optional per-changer grid overrides (0 entries fall back to the scalars).
  std::vector<double> rbf_v_start_per_ltc;
  std::vector<double> rbf_v_step_per_ltc;
  Vec v_star;                  // defaults to all-ones when empty
  double v_low = 0.9;
  double v_high = 1.1;
  int warmup_steps = 0;        // no relearning before this step
  WindowConfig window;
  long enumeration_budget = 1000000;
  bool exhaustive_sweep_truth = true;
  bool sync_learn = true;
};

/// Everything a controller may look at when deciding step k. `upcoming`
/// carries the injections that will price the decision; only the
/// full-knowledge exhaustive controller reads it.
struct StepContext {
  int k = 0;
  Timestamp ts = 0;
  SystemState state;
  const InjectionVector* upcoming = nullptr;
};

struct LtcDecision {
  double delta = 0.0;
  bool greedy_chosen = false;
  double greedy_value = 0.0;
  double incumbent_value = 0.0;
};

struct ControlDecision {
  std::vector<LtcDecision> ltcs;
  Vec delta_vector() const;
};

class Controller {
public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual ControlDecision step(const StepContext& ctx) = 0;
  /// Called once after the last step with the terminal state, so the
  /// controller can settle its final reward bookkeeping.
  virtual void finish(const StepContext& terminal) {}
  virtual const LearnStats* learn_stats() const { return nullptr; }
};

/// Deadband policy over per-changer linear action-value functions,
/// periodically refit from history via sequential LSPI.
class RlController : public Controller {
public:
  RlController(const Feeder& feeder, ControllerConfig cfg, std::uint64_t seed);
  ~RlController() override;

  std::string name() const override { return "rl"; }
  ControlDecision step(const StepContext& ctx) override;
  void finish(const StepContext& terminal) override;
  const LearnStats* learn_stats() const override { return &stats_; }

  const History& history() const { return history_; }
  const std::vector<Vec>& weights() const { return weights_; }
  const std::vector<FeatureMap>& feature_maps() const { return fms_; }
  void set_weights(std::vector<Vec> w);

private:
  void absorb_reward(const StepContext& ctx);
  void maybe_learn(const StepContext& ctx);
  void adopt_pending_weights(bool wait);

  const Feeder& feeder_;
  ControllerConfig cfg_;
  std::vector<FeatureMap> fms_;
  std::vector<Vec> weights_;
  std::vector<double> incumbent_;  // last commanded delta per changer
  History history_;
  std::optional<HistoryRecord> pending_;
  Rng rng_;
  LearnStats stats_;
  struct AsyncFit {
    std::future<std::pair<std::vector<Vec>, LearnStats>> future;
  };
  std::optional<AsyncFit> inflight_;
};

/// Moves each changer one position at a time, only when a downstream bus
/// leaves the desired magnitude range; direction picked by probing both
/// neighbor positions through the tap-change voltage identity.
ControlDecision conventional_step(const Feeder& feeder, const SystemState& s,
                                  double v_low, double v_high);

class ConventionalController : public Controller {
public:
  ConventionalController(const Feeder& feeder, double v_low, double v_high)
      : feeder_(feeder), v_low_(v_low), v_high_(v_high) {}
  std::string name() const override { return "conventional"; }
  ControlDecision step(const StepContext& ctx) override {
    return conventional_step(feeder_, ctx.state, v_low_, v_high_);
  }

private:
  const Feeder& feeder_;
  double v_low_;
  double v_high_;
};

struct ExhaustiveResult {
  std::vector<int> positions;
  double best_reward = 0.0;
  long evaluations = 0;
};

/// Full-knowledge benchmark: enumerates every feasible tap combination,
/// prices each with the ground-truth solver and returns the best; ties go to
/// the lexicographically smallest position vector.
/// Throws err::BudgetExceeded when the combination count exceeds `budget`.
ExhaustiveResult exhaustive_step(const Feeder& feeder,
                                 const InjectionVector& inj, const Vec& v_star,
                                 bool sweep_truth = true,
                                 long budget = 1000000);

class ExhaustiveController : public Controller {
public:
  ExhaustiveController(const Feeder& feeder, Vec v_star, bool sweep_truth,
                       long budget)
      : feeder_(feeder), v_star_(std::move(v_star)), sweep_truth_(sweep_truth),
        budget_(budget) {}
  std::string name() const override { return "exhaustive"; }
  ControlDecision step(const StepContext& ctx) override;

private:
  const Feeder& feeder_;
  Vec v_star_;
  bool sweep_truth_;
  long budget_;
};

/// A controller that never moves any tap; useful as a baseline and in tests.
class HoldController : public Controller {
public:
  explicit HoldController(const Feeder& feeder) : n_(feeder.ltc_count()) {}
  std::string name() const override { return "hold"; }
  ControlDecision step(const StepContext&) override {
    ControlDecision d;
    d.ltcs.resize(n_);
    return d;
  }

private:
  int n_;
};

}  // namespace tapsim
