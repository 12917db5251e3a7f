#include "tapsim/mdp.hpp"

#include <algorithm>
#include <cmath>

namespace tapsim {

double reward(const Vec& v_next, const Vec& v_star) {
  if (v_next.size() != v_star.size() || v_next.size() == 0) {
    throw err::LengthMismatch("reward needs two equal-length, nonempty vectors");
  }
  return -(v_next - v_star).norm() / static_cast<double>(v_next.size());
}

double discounted_return(std::span<const double> rewards, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw err::SchemaMismatch("discount factor must lie in [0, 1)");
  }
  double total = 0.0;
  double scale = 1.0;
  for (double r : rewards) {
    total += scale * r;
    scale *= gamma;
  }
  return total;
}

Transition Transition::checked(SystemState s, TapAction a, double r,
                               SystemState next, const Vec& v_star) {
  if (s.taps.size() != a.delta.size() || s.taps.size() != next.taps.size()) {
    throw err::LengthMismatch("state/action tap vectors disagree in length");
  }
  if (s.taps.size() > 0 &&
      ((s.taps + a.delta) - next.taps).cwiseAbs().maxCoeff() > 1e-12) {
    throw err::ChainBroken("next.taps != s.taps + a.delta");
  }
  const double expect = reward(next.v, v_star);
  if (std::abs(expect - r) > 1e-12) {
    throw err::ChainBroken("stored reward disagrees with recomputation");
  }
  return Transition{std::move(s), std::move(a), r, std::move(next)};
}

void History::append(HistoryRecord rec) {
  if (!records_.empty()) {
    const HistoryRecord& last = records_.back();
    if (rec.ts <= last.ts) {
      throw err::NonMonotoneTimestamp("timestamp " + std::to_string(rec.ts) +
                                      " does not exceed " +
                                      std::to_string(last.ts));
    }
    if (last.s.taps.size() != rec.s.taps.size() ||
        (rec.s.taps.size() > 0 &&
         ((last.s.taps + last.a.delta) - rec.s.taps).cwiseAbs().maxCoeff() >
             1e-12)) {
      throw err::ChainBroken("state at " + std::to_string(rec.ts) +
                             " does not follow the previous action");
    }
  }
  records_.push_back(std::move(rec));
}

Transition History::transition_at(std::size_t i) const {
  if (i + 1 >= records_.size()) {
    throw err::EmptyHistory("no successor record for transition index " +
                            std::to_string(i));
  }
  const HistoryRecord& a = records_[i];
  const HistoryRecord& b = records_[i + 1];
  return Transition{a.s, a.a, a.r, b.s};
}

void History::trim_before(Timestamp cutoff) {
  auto it = std::find_if(records_.begin(), records_.end(),
                         [&](const HistoryRecord& r) { return r.ts >= cutoff; });
  records_.erase(records_.begin(), it);
}

History append_history(const History& h, HistoryRecord rec) {
  History out = h;
  out.append(std::move(rec));
  return out;
}

}  // namespace tapsim
