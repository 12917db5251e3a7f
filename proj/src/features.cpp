#include "tapsim/features.hpp"

#include <Eigen/LU>
#include <cmath>

namespace tapsim {

FeatureMap::FeatureMap(const Feeder& feeder, int ltc_ordinal,
                       std::vector<Vec> centers, double sigma)
    : centers_(std::move(centers)), sigma_(sigma) {
  if (ltc_ordinal < 0 || ltc_ordinal >= feeder.ltc_count()) {
    throw err::SchemaMismatch("feature map needs a valid tap changer ordinal");
  }
  if (centers_.empty()) {
    throw err::SchemaMismatch("feature map needs at least one RBF center");
  }
  for (const Vec& c : centers_) {
    if (c.size() != feeder.internal_buses() || !c.allFinite()) {
      throw err::SchemaMismatch("RBF centers must be finite N-vectors");
    }
  }
  if (!(sigma_ > 0.0)) {
    throw err::SchemaMismatch("RBF width must be positive");
  }
  tc_ = feeder.ltcs()[ltc_ordinal];
  const int span = tc_.pos_max - tc_.pos_min;
  min_dpos_ = -span;
  actions_.reserve(2 * span + 1);
  for (int d = -span; d <= span; ++d) actions_.push_back(kTapStep * d);
}

FeatureMap FeatureMap::rbf_grid(const Feeder& feeder, int ltc_ordinal,
                                double v_start, double v_step, int kappa,
                                double sigma) {
  std::vector<Vec> centers;
  centers.reserve(kappa);
  for (int i = 1; i <= kappa; ++i) {
    const double mag = v_start + v_step * i;
    centers.push_back(Vec::Constant(feeder.internal_buses(), mag * mag));
  }
  return FeatureMap(feeder, ltc_ordinal, std::move(centers), sigma);
}

int FeatureMap::action_index(double delta) const {
  const double raw = delta / kTapStep;
  const int dpos = static_cast<int>(std::lround(raw));
  if (std::abs(raw - dpos) > 1e-6) {
    throw err::ActionNotInSet("ratio change " + std::to_string(delta) +
                              " is off the tap grid");
  }
  const int idx = dpos - min_dpos_;
  if (idx < 0 || idx >= action_count()) {
    throw err::ActionNotInSet("ratio change " + std::to_string(delta) +
                              " outside the feature layout");
  }
  return idx;
}

std::pair<int, int> FeatureMap::feasible_index_range(double t) const {
  const int pos = tap_ratio_to_position(t);
  if (pos < tc_.pos_min || pos > tc_.pos_max) {
    throw err::TapOutOfRange("ratio outside the tap changer window");
  }
  return {tc_.pos_min - pos - min_dpos_, tc_.pos_max - pos - min_dpos_};
}

Vec FeatureMap::activation(const Feeder& feeder, const SystemState& s) const {
  // Normalize the voltage profile to this changer at position 0. The
  // reference position may fall outside the changer's window, so assemble
  // the system directly instead of going through the window checks.
  Vec taps_ref = s.taps;
  taps_ref[tc_.ordinal] = 1.0;

  Vec v_norm;
  if ((s.taps - taps_ref).cwiseAbs().maxCoeff() == 0.0) {
    v_norm = s.v;
  } else {
    Vec from_cur = Vec::Ones(feeder.line_count());
    Vec from_ref = Vec::Ones(feeder.line_count());
    for (const auto& tc : feeder.ltcs()) {
      const double tc_cur = s.taps[tc.ordinal];
      const double tc_ref = taps_ref[tc.ordinal];
      from_cur[tc.line - 1] = 1.0 / (tc_cur * tc_cur);
      from_ref[tc.line - 1] = 1.0 / (tc_ref * tc_ref);
    }
    const IncidencePair cur = incidence_from_entries(feeder, from_cur);
    const IncidencePair ref = incidence_from_entries(feeder, from_ref);
    const Vec rhs =
        cur.M.transpose() * s.v + (cur.m - ref.m) * feeder.v0();
    v_norm = Eigen::PartialPivLU<Mat>(ref.M.transpose()).solve(rhs);
  }

  Vec psi(segment_length());
  psi[0] = 1.0;
  const double s2 = sigma_ * sigma_;
  for (int i = 0; i < kappa(); ++i) {
    psi[i + 1] = std::exp(-(v_norm - centers_[i]).norm() / s2);
  }
  return psi;
}

Vec FeatureMap::feature_vector(const Feeder& feeder, const SystemState& s,
                               double action_delta) const {
  const int idx = action_index(action_delta);
  Vec phi = Vec::Zero(length());
  phi.segment(static_cast<Eigen::Index>(idx) * segment_length(),
              segment_length()) = activation(feeder, s);
  return phi;
}

}  // namespace tapsim
