#include "tapsim/episode.hpp"

#include <cmath>

namespace tapsim {

std::pair<EpisodeLog, SummaryMetrics> run_episode(const Feeder& feeder,
                                                  const LoadProfile& profile,
                                                  Controller& controller,
                                                  const EpisodeOptions& opt) {
  if (profile.step_count() == 0) {
    throw err::EmptyLog("load profile covers no steps");
  }
  const int n = feeder.internal_buses();
  const Vec v_star = opt.v_star.size() == 0 ? Vec::Ones(n) : opt.v_star;
  if (v_star.size() != n) {
    throw err::LengthMismatch("v_star must have one entry per internal bus");
  }

  auto solve = [&](const Vec& taps, const InjectionVector& inj) {
    return opt.env_sweep ? sweep_ac_solve(feeder, taps, inj)
                         : lindistflow_solve(feeder, taps, inj);
  };

  EpisodeLog log;
  SummaryMetrics metrics;
  metrics.tap_moves_per_ltc.assign(feeder.ltc_count(), 0);

  Vec taps = opt.initial_taps.size() == 0 ? feeder.neutral_taps() : opt.initial_taps;
  feeder.check_taps(taps);
  const Timestamp dt = profile.dt_seconds();
  const int horizon = profile.step_count();

  VoltageState v;
  try {
    v = solve(taps, profile.steps[0]);
  } catch (const err::NotConverged& e) {
    log.aborted = true;
    log.abort_reason = std::string("solver failure at step 0: ") + e.what();
  }

  for (int k = 0; k < horizon && !log.aborted; ++k) {
    StepEntry entry;
    entry.k = k;
    entry.ts = static_cast<Timestamp>(k) * dt;
    entry.taps = taps;
    entry.v = v.v;

    const Vec mags = v.magnitudes();
    if (mags.minCoeff() < opt.v_low || mags.maxCoeff() > opt.v_high) {
      ++metrics.violation_steps;
    }

    StepContext ctx;
    ctx.k = k;
    ctx.ts = entry.ts;
    ctx.state = SystemState{taps, v.v};
    // Injections that will price this decision; loads hold past the horizon.
    const InjectionVector& upcoming =
        profile.steps[std::min(k + 1, horizon - 1)];
    ctx.upcoming = &upcoming;

    const ControlDecision decision = controller.step(ctx);
    if (static_cast<int>(decision.ltcs.size()) != feeder.ltc_count()) {
      throw err::LengthMismatch("controller decided for the wrong changer count");
    }
    entry.action = decision.delta_vector();
    entry.decisions = decision.ltcs;

    bool moved = false;
    for (int l = 0; l < feeder.ltc_count(); ++l) {
      if (entry.action[l] != 0.0) {
        ++metrics.tap_moves_per_ltc[l];
        moved = true;
      }
    }
    if (moved) ++metrics.tap_move_steps;

    taps = taps + entry.action;
    feeder.check_taps(taps);
    log.entries.push_back(std::move(entry));

    // Settle this step's reward from the follow-up voltages; the solution
    // doubles as the next step's observation.
    try {
      v = solve(taps, upcoming);
    } catch (const err::NotConverged& e) {
      log.aborted = true;
      log.abort_reason = std::string("solver failure after step ") +
                         std::to_string(k) + ": " + e.what();
      log.entries.pop_back();  // keep only entries with settled rewards
      break;
    }
    log.entries.back().r = reward(v.v, v_star);

    if (k == horizon - 1) {
      StepContext terminal;
      terminal.k = k + 1;
      terminal.ts = static_cast<Timestamp>(k + 1) * dt;
      terminal.state = SystemState{taps, v.v};
      controller.finish(terminal);
    }
  }

  if (!log.entries.empty()) {
    metrics.rho_per_day = daily_mean_reward(log, opt.steps_per_day);
    metrics.rho = metrics.rho_per_day.back();
  }
  if (const LearnStats* stats = controller.learn_stats()) {
    metrics.learn = *stats;
  }
  return {std::move(log), std::move(metrics)};
}

std::vector<double> daily_mean_reward(const EpisodeLog& log,
                                      int steps_per_day) {
  if (log.entries.empty()) throw err::EmptyLog("episode log is empty");
  if (steps_per_day < 1) throw err::SchemaMismatch("steps_per_day must be >= 1");
  std::vector<double> out;
  double sum = 0.0;
  int count = 0;
  for (const StepEntry& e : log.entries) {
    sum += e.r;
    if (++count == steps_per_day) {
      out.push_back(sum / count);
      sum = 0.0;
      count = 0;
    }
  }
  if (count > 0) out.push_back(sum / count);
  return out;
}

}  // namespace tapsim
