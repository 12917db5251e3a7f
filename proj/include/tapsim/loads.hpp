#pragma once

#include <vector>

#include "tapsim/learner.hpp"
#include "tapsim/powerflow.hpp"

namespace tapsim {

/// Per-step, per-bus injections over an episode horizon.
struct LoadProfile {
  double dt_minutes = 5.0;
  std::vector<InjectionVector> steps;

  int step_count() const { return static_cast<int>(steps.size()); }
  Timestamp dt_seconds() const {
    return static_cast<Timestamp>(std::llround(dt_minutes * 60.0));
  }
};

/// Default double-peak residential daily shape, 24 hourly points, peak 1.0.
std::vector<double> default_residential_shape();

struct LoadSynthesisConfig {
  std::vector<double> hourly_shape =
      default_residential_shape();   // relative daily shape, >= 2 points
  double max_total_active = 1.0;     // scaling target for the system peak, p.u.
  double noise_std = 0.02;           // multiplicative Gaussian, mean 1
  std::vector<int> load_buses;       // bus ids 1..N; empty = all internal buses
  Vec bus_weights;                   // share per load bus; empty = Dirichlet draw
  double power_factor = 0.95;
  double dt_minutes = 5.0;
  int steps = 288;
};

/// Builds a synthetic load profile: the hourly shape is scaled so its peak
/// equals the target system total, linearly interpolated to the step width
/// (wrapping at midnight), perturbed per step by multiplicative Gaussian
/// noise, and split across the load buses by the weight vector. Reactive
/// power follows from the constant power factor. Deterministic per seed.
/// Throws err::DegenerateShape, err::BadWeights.
LoadProfile synthesize_loads(int internal_buses, const LoadSynthesisConfig& cfg,
                             std::uint64_t seed);

}  // namespace tapsim
