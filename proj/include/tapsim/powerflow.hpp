#pragma once

#include "tapsim/feeder.hpp"
#include "tapsim/types.hpp"

namespace tapsim {

/// Per-bus power injections (buses 1..N), p.u.; loads are negative.
struct InjectionVector {
  Vec p;
  Vec q;
};

/// Squared voltage magnitudes at buses 1..N plus the substation value.
struct VoltageState {
  Vec v;
  double v0 = 1.0;

  Vec magnitudes() const { return v.array().sqrt().matrix(); }
};

/// Solves the tap-aware LinDistFlow system
///   M(t)^T v + m(t) v0 = 2 diag(r) M^{-1} p + 2 diag(x) M^{-1} q
/// for v. Lossless and linear in the injections.
VoltageState lindistflow_solve(const Feeder& feeder, const Vec& taps,
                               const InjectionVector& inj);

/// Backward/forward sweep on the nonlinear branch-flow equations with
/// quadratic loss terms; the ground-truth solver. Converges when the largest
/// per-bus voltage-magnitude change in one sweep drops below `tol`.
/// Throws err::NotConverged after `max_iter` sweeps.
VoltageState sweep_ac_solve(const Feeder& feeder, const Vec& taps,
                            const InjectionVector& inj, double tol = 1e-8,
                            int max_iter = 100);

/// Re-estimates squared voltage magnitudes after a tap change without any
/// knowledge of the injections: with the right-hand side of the LinDistFlow
/// system held fixed,
///   v'' = (M(t'')^T)^{-1} (M(t')^T v' + m(t') v0 - m(t'') v0).
/// Exact under the linear model; a close estimate against the AC solution.
VoltageState estimate_voltage_under_taps(const Feeder& feeder,
                                         const VoltageState& base,
                                         const Vec& taps_from,
                                         const Vec& taps_to);

}  // namespace tapsim
