#pragma once

#include <utility>
#include <vector>

#include "tapsim/feeder.hpp"
#include "tapsim/mdp.hpp"
#include "tapsim/powerflow.hpp"

namespace tapsim {

/// Per-changer RBF feature construction. The feature vector for (s, a) has
/// one segment of length kappa+1 per action in the changer's delta set; only
/// the segment selected by `a` is nonzero and holds
///   [1, exp(-||v_norm - c_1|| / sigma^2), ..., exp(-||v_norm - c_kappa|| / sigma^2)]
/// where v_norm is the squared voltage profile re-estimated with this
/// changer moved to position 0. The norm in the exponent is the plain
/// (unsquared) L2 distance.
class FeatureMap {
public:
  FeatureMap(const Feeder& feeder, int ltc_ordinal, std::vector<Vec> centers,
             double sigma);

  /// Centers on a voltage-magnitude grid: c_i = (v_start + v_step*i)^2 * 1_N
  /// for i = 1..kappa.
  static FeatureMap rbf_grid(const Feeder& feeder, int ltc_ordinal,
                             double v_start, double v_step, int kappa,
                             double sigma);

  int ltc() const { return tc_.ordinal; }
  const TapChanger& changer() const { return tc_; }
  int kappa() const { return static_cast<int>(centers_.size()); }
  double sigma() const { return sigma_; }

  int segment_length() const { return kappa() + 1; }
  int action_count() const { return static_cast<int>(actions_.size()); }
  int length() const { return segment_length() * action_count(); }  // f

  /// Ratio changes covered by the feature layout: every position delta
  /// reachable inside the window, ascending. Independent of the state.
  const std::vector<double>& actions() const { return actions_; }

  /// Segment index of a ratio change; throws err::ActionNotInSet for deltas
  /// off the grid or outside the layout.
  int action_index(double delta) const;

  /// Segment indices of the actions applicable from ratio `t`; the range is
  /// contiguous, [first, last] inclusive.
  std::pair<int, int> feasible_index_range(double t) const;

  /// The shared nonzero segment content for a state; length kappa+1, all
  /// entries in [0, 1], first entry exactly 1.
  Vec activation(const Feeder& feeder, const SystemState& s) const;

  /// Full feature vector, length f; exactly one segment nonzero.
  Vec feature_vector(const Feeder& feeder, const SystemState& s,
                     double action_delta) const;

private:
  TapChanger tc_;
  std::vector<double> actions_;   // ascending ratio deltas
  int min_dpos_ = 0;              // position delta of actions_[0]
  std::vector<Vec> centers_;
  double sigma_ = 1.0;
};

}  // namespace tapsim
