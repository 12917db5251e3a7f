#pragma once

#include <string>
#include <vector>

#include "tapsim/control.hpp"
#include "tapsim/loads.hpp"

namespace tapsim {

struct EpisodeOptions {
  Vec v_star;               // empty = all ones
  double v_low = 0.9;
  double v_high = 1.1;
  bool env_sweep = true;    // ground-truth environment solver
  int steps_per_day = 288;  // 5-minute steps
  Vec initial_taps;         // empty = neutral positions
};

/// One fully executed step: the observed state, the decision taken there and
/// the reward that followed it.
struct StepEntry {
  int k = 0;
  Timestamp ts = 0;
  Vec taps;      // ratios when the state was observed
  Vec v;         // squared magnitudes
  Vec action;    // ratio changes commanded at this step
  double r = 0.0;
  std::vector<LtcDecision> decisions;
};

struct EpisodeLog {
  std::vector<StepEntry> entries;
  bool aborted = false;
  std::string abort_reason;
};

struct SummaryMetrics {
  std::vector<double> rho_per_day;
  double rho = 0.0;                    // final day's mean reward
  std::vector<long> tap_moves_per_ltc; // steps on which each changer moved
  long tap_move_steps = 0;             // steps on which any changer moved
  long violation_steps = 0;            // observed states outside the range
  LearnStats learn;
};

/// Drives the environment: at each step the ground-truth solver prices the
/// current taps against that step's injections, the controller decides, and
/// the taps move. Rewards follow one step later; loads are held constant
/// past the horizon to settle the last reward. A solver failure aborts with
/// partial results.
std::pair<EpisodeLog, SummaryMetrics> run_episode(const Feeder& feeder,
                                                  const LoadProfile& profile,
                                                  Controller& controller,
                                                  const EpisodeOptions& opt);

/// Mean reward per simulated day (chunks of steps_per_day entries).
/// Throws err::EmptyLog.
std::vector<double> daily_mean_reward(const EpisodeLog& log,
                                      int steps_per_day = 288);

}  // namespace tapsim
