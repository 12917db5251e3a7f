#include "tapsim/control.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace tapsim {

Vec ControlDecision::delta_vector() const {
  Vec out(static_cast<Eigen::Index>(ltcs.size()));
  for (std::size_t i = 0; i < ltcs.size(); ++i) out[i] = ltcs[i].delta;
  return out;
}

RlController::RlController(const Feeder& feeder, ControllerConfig cfg,
                           std::uint64_t seed)
    : feeder_(feeder), cfg_(std::move(cfg)), rng_(seed) {
  if (cfg_.v_star.size() == 0) {
    cfg_.v_star = Vec::Ones(feeder.internal_buses());
  }
  if (cfg_.v_star.size() != feeder.internal_buses()) {
    throw err::LengthMismatch("v_star must have one entry per internal bus");
  }
  for (int l = 0; l < feeder.ltc_count(); ++l) {
    double v_start = cfg_.rbf_v_start;
    double v_step = cfg_.rbf_v_step;
    if (l < static_cast<int>(cfg_.rbf_v_start_per_ltc.size()) &&
        cfg_.rbf_v_start_per_ltc[l] > 0.0) {
      v_start = cfg_.rbf_v_start_per_ltc[l];
    }
    if (l < static_cast<int>(cfg_.rbf_v_step_per_ltc.size()) &&
        cfg_.rbf_v_step_per_ltc[l] > 0.0) {
      v_step = cfg_.rbf_v_step_per_ltc[l];
    }
    fms_.push_back(
        FeatureMap::rbf_grid(feeder, l, v_start, v_step, cfg_.kappa, cfg_.sigma));
    weights_.push_back(Vec::Zero(fms_.back().length()));
    incumbent_.push_back(0.0);
  }
}

RlController::~RlController() {
  if (inflight_) inflight_->future.wait();
}

void RlController::set_weights(std::vector<Vec> w) {
  if (w.size() != weights_.size()) {
    throw err::LengthMismatch("weight snapshot count mismatch");
  }
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (w[l].size() != fms_[l].length()) {
      throw err::LengthMismatch("weight snapshot length mismatch");
    }
  }
  weights_ = std::move(w);
}

void RlController::absorb_reward(const StepContext& ctx) {
  if (!pending_) return;
  HistoryRecord rec = *pending_;
  rec.r = reward(ctx.state.v, cfg_.v_star);
  history_.append(std::move(rec));
  pending_.reset();
}

void RlController::adopt_pending_weights(bool wait) {
  if (!inflight_) return;
  if (!wait && inflight_->future.wait_for(std::chrono::seconds(0)) !=
                   std::future_status::ready) {
    return;
  }
  auto [w, stats] = inflight_->future.get();
  weights_ = std::move(w);
  stats_.lstdq_calls += stats.lstdq_calls;
  stats_.iterations.insert(stats_.iterations.end(), stats.iterations.begin(),
                           stats.iterations.end());
  stats_.all_converged = stats_.all_converged && stats.all_converged;
  stats_.seconds += stats.seconds;
  inflight_.reset();
}

void RlController::maybe_learn(const StepContext& ctx) {
  if (feeder_.ltc_count() == 0) return;
  if (ctx.k % cfg_.relearn_period != 0 || ctx.k < cfg_.warmup_steps) return;
  if (history_.transition_count() == 0) return;

  LearnConfig lc;
  lc.sweeps = cfg_.sweeps;
  lc.batch_size = cfg_.batch_size;
  lc.lstdq.gamma = cfg_.gamma;
  lc.lstdq.epsilon = cfg_.epsilon;
  lc.lstdq.ridge = cfg_.ridge_c;
  lc.window = cfg_.window;

  if (cfg_.sync_learn) {
    LearnStats stats = sequential_learn(feeder_, fms_, history_, ctx.ts,
                                        cfg_.v_star, weights_, lc, rng_);
    stats_.lstdq_calls += stats.lstdq_calls;
    stats_.iterations.insert(stats_.iterations.end(), stats.iterations.begin(),
                             stats.iterations.end());
    stats_.all_converged = stats_.all_converged && stats.all_converged;
    stats_.seconds += stats.seconds;
    return;
  }

  // Offline fit on a snapshot; the acting path keeps the previous weights
  // until the new ones are ready.
  adopt_pending_weights(false);
  if (inflight_) return;  // previous fit still running, act on old weights
  History snapshot = history_;
  std::vector<Vec> w = weights_;
  const Timestamp now = ctx.ts;
  Rng task_rng(rng_());
  inflight_ = AsyncFit{std::async(
      std::launch::async,
      [this, snapshot = std::move(snapshot), w = std::move(w), now, lc,
       task_rng]() mutable {
        LearnStats stats = sequential_learn(feeder_, fms_, snapshot, now,
                                            cfg_.v_star, w, lc, task_rng);
        return std::make_pair(std::move(w), stats);
      })};
}

ControlDecision RlController::step(const StepContext& ctx) {
  absorb_reward(ctx);
  maybe_learn(ctx);

  ControlDecision decision;
  Vec delta = Vec::Zero(feeder_.ltc_count());
  for (int l = 0; l < feeder_.ltc_count(); ++l) {
    const FeatureMap& fm = fms_[l];
    const GreedyResult greedy = greedy_action(feeder_, fm, weights_[l], ctx.state);

    // Value of sticking with the last commanded change, judged at the
    // current state.
    const Vec psi = fm.activation(feeder_, ctx.state);
    const int inc_idx = fm.action_index(incumbent_[l]);
    const double q_inc = psi.dot(weights_[l].segment(
        static_cast<Eigen::Index>(inc_idx) * fm.segment_length(),
        fm.segment_length()));

    LtcDecision d;
    d.greedy_value = greedy.value;
    d.incumbent_value = q_inc;
    if (greedy.value - q_inc > cfg_.deadband) {
      d.delta = greedy.delta;
      d.greedy_chosen = true;
      incumbent_[l] = greedy.delta;
    } else {
      // Inside the deadband the tap position stays where it is; the
      // incumbent action remains the comparison baseline until a greedy
      // choice displaces it, so a standing decision is not re-applied.
      d.delta = 0.0;
      d.greedy_chosen = false;
    }
    delta[l] = d.delta;
    decision.ltcs.push_back(d);
  }

  pending_ = HistoryRecord{ctx.ts, ctx.state, TapAction{delta}, 0.0};
  return decision;
}

void RlController::finish(const StepContext& terminal) {
  absorb_reward(terminal);
  adopt_pending_weights(true);
}

ControlDecision conventional_step(const Feeder& feeder, const SystemState& s,
                                  double v_low, double v_high) {
  if (!(v_low < v_high)) {
    throw err::SchemaMismatch("desired range requires v_low < v_high");
  }
  ControlDecision decision;
  decision.ltcs.resize(feeder.ltc_count());

  const Vec mags = s.v.array().sqrt();
  auto violation = [&](double mag) {
    return std::max({v_low - mag, mag - v_high, 0.0});
  };
  const double worst_any =
      [&] {
        double w = 0.0;
        for (int i = 0; i < mags.size(); ++i) w = std::max(w, violation(mags[i]));
        return w;
      }();
  if (worst_any == 0.0) return decision;  // everything inside the range

  for (const auto& tc : feeder.ltcs()) {
    const std::vector<int> downstream = feeder.downstream_buses(tc.line);
    auto worst_of = [&](const Vec& v) {
      double w = 0.0;
      for (int bus : downstream) {
        w = std::max(w, violation(std::sqrt(v[bus - 1])));
      }
      return w;
    };

    const double worst_now = worst_of(s.v);
    LtcDecision& d = decision.ltcs[tc.ordinal];
    d.incumbent_value = -worst_now;
    if (worst_now == 0.0) continue;  // this changer sees no violation

    const int pos = tap_ratio_to_position(s.taps[tc.ordinal]);
    double best_after = worst_now;
    int best_step = 0;
    for (int step : {-1, +1}) {
      const int target = pos + step;
      if (target < tc.pos_min || target > tc.pos_max) continue;
      Vec taps_probe = s.taps;
      taps_probe[tc.ordinal] = tap_position_to_ratio(target);
      const VoltageState probe = estimate_voltage_under_taps(
          feeder, VoltageState{s.v, feeder.v0()}, s.taps, taps_probe);
      const double worst_probe = worst_of(probe.v);
      if (worst_probe < best_after) {
        best_after = worst_probe;
        best_step = step;
      }
    }
    d.delta = kTapStep * best_step;
    d.greedy_chosen = best_step != 0;
    d.greedy_value = -best_after;
  }
  return decision;
}

ExhaustiveResult exhaustive_step(const Feeder& feeder,
                                 const InjectionVector& inj, const Vec& v_star,
                                 bool sweep_truth, long budget) {
  const auto& ltcs = feeder.ltcs();
  long combos = 1;
  for (const auto& tc : ltcs) {
    combos *= tc.window_size();
    if (combos > budget) {
      throw err::BudgetExceeded("tap combination count exceeds budget of " +
                                std::to_string(budget));
    }
  }

  ExhaustiveResult best;
  std::vector<int> pos(ltcs.size());
  for (const auto& tc : ltcs) pos[tc.ordinal] = tc.pos_min;
  Vec taps(ltcs.size());
  bool have_any = false;

  for (long it = 0; it < combos; ++it) {
    for (const auto& tc : ltcs) {
      taps[tc.ordinal] = tap_position_to_ratio(pos[tc.ordinal]);
    }
    ++best.evaluations;
    bool solved = true;
    double r = 0.0;
    try {
      const VoltageState v = sweep_truth
                                 ? sweep_ac_solve(feeder, taps, inj)
                                 : lindistflow_solve(feeder, taps, inj);
      r = reward(v.v, v_star);
    } catch (const err::NotConverged&) {
      solved = false;  // infeasible operating point, cannot be the optimum
    }
    // Ascending enumeration plus strict improvement keeps the
    // lexicographically smallest position vector on ties.
    if (solved && (!have_any || r > best.best_reward)) {
      best.best_reward = r;
      best.positions = pos;
      have_any = true;
    }

    // Advance the odometer, last changer fastest.
    for (int l = static_cast<int>(ltcs.size()) - 1; l >= 0; --l) {
      if (pos[l] < ltcs[l].pos_max) {
        ++pos[l];
        break;
      }
      pos[l] = ltcs[l].pos_min;
    }
  }

  if (!have_any) {
    throw err::SolverFailure("no tap combination produced a solvable flow");
  }
  return best;
}

ControlDecision ExhaustiveController::step(const StepContext& ctx) {
  if (ctx.upcoming == nullptr) {
    throw err::SchemaMismatch("exhaustive controller needs injection data");
  }
  const ExhaustiveResult res = exhaustive_step(feeder_, *ctx.upcoming, v_star_,
                                               sweep_truth_, budget_);
  ControlDecision decision;
  for (const auto& tc : feeder_.ltcs()) {
    LtcDecision d;
    const int cur = tap_ratio_to_position(ctx.state.taps[tc.ordinal]);
    d.delta = kTapStep * (res.positions[tc.ordinal] - cur);
    d.greedy_chosen = d.delta != 0.0;
    d.greedy_value = res.best_reward;
    decision.ltcs.push_back(d);
  }
  return decision;
}

}  // namespace tapsim
