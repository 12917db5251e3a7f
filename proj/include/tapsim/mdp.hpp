#pragma once

#include <span>
#include <vector>

#include "tapsim/errors.hpp"
#include "tapsim/types.hpp"

namespace tapsim {

/// MDP state: tap ratios of all changers plus squared voltage magnitudes.
struct SystemState {
  Vec taps;
  Vec v;
};

/// MDP action: per-changer ratio change, each a multiple of the tap step.
struct TapAction {
  Vec delta;
};

/// Voltage-deviation reward, -(1/N) * ||v_next - v_star||_2. Never positive;
/// zero exactly when the target profile is met.
double reward(const Vec& v_next, const Vec& v_star);

/// Finite-horizon discounted return sum_k gamma^k r_k.
double discounted_return(std::span<const double> rewards, double gamma);

/// One observed (s, a, r, s') tuple.
struct Transition {
  SystemState s;
  TapAction a;
  double r = 0.0;
  SystemState next;

  /// Builds a transition and validates the chain (next.taps = s.taps + a)
  /// and the stored reward against recomputation, both to 1e-12.
  static Transition checked(SystemState s, TapAction a, double r,
                            SystemState next, const Vec& v_star);
};

/// One history entry: the state observed at `ts`, the action taken there and
/// the reward that followed it.
struct HistoryRecord {
  Timestamp ts = 0;
  SystemState s;
  TapAction a;
  double r = 0.0;
};

/// Time-ordered record log. Single writer; readers copy snapshots.
class History {
public:
  /// Appends a record; timestamps must strictly increase and the new state
  /// must chain onto the previous record's taps plus its action.
  /// Throws err::NonMonotoneTimestamp, err::ChainBroken.
  void append(HistoryRecord rec);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const HistoryRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<HistoryRecord>& records() const { return records_; }

  /// Number of complete transitions (records that have a successor).
  std::size_t transition_count() const {
    return records_.size() < 2 ? 0 : records_.size() - 1;
  }

  /// The transition anchored at record `i`: (s_i, a_i, r_i, s_{i+1}).
  Transition transition_at(std::size_t i) const;

  /// Drops records older than `horizon` behind the newest timestamp.
  void trim_before(Timestamp cutoff);

private:
  std::vector<HistoryRecord> records_;
};

/// Free-function form: returns a copy of `h` with `rec` appended.
History append_history(const History& h, HistoryRecord rec);

}  // namespace tapsim
