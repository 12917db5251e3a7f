#include "tapsim/learner.hpp"

#include <Eigen/LU>
#include <chrono>
#include <cmath>
#include <unordered_map>

#include "tapsim/powerflow.hpp"

namespace tapsim {

namespace {
constexpr Timestamp kSecondsPerDay = 86400;
}

std::vector<std::size_t> select_history_window(const History& h, Timestamp now,
                                               const WindowConfig& cfg) {
  std::vector<std::size_t> out;
  if (h.transition_count() == 0) return out;

  // Trailing interval [tod(now) - width, tod(now)) repeated over the current
  // day and the preceding window_days days. Including the freshest records
  // keeps the batch anchored at tap positions close to where the policy will
  // act next.
  const Timestamp interval =
      static_cast<Timestamp>(std::llround(cfg.interval_hours * 3600.0));
  const Timestamp oldest =
      now - static_cast<Timestamp>(cfg.window_days) * kSecondsPerDay - interval;
  const Timestamp now_tod = ((now % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;

  for (std::size_t i = 0; i < h.transition_count(); ++i) {
    const Timestamp ts = h[i].ts;
    if (ts < oldest || ts >= now) continue;
    const Timestamp tod = ((ts % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
    const Timestamp back =
        ((now_tod - tod) % kSecondsPerDay + kSecondsPerDay) % kSecondsPerDay;
    if (back > 0 && back <= interval) out.push_back(i);
  }

  if (out.empty()) {
    // Not enough aligned days yet; learn from everything available.
    out.resize(h.transition_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  }
  return out;
}

GreedyResult greedy_action(const Feeder& feeder, const FeatureMap& fm,
                           const Vec& w, const SystemState& s) {
  if (w.size() != fm.length()) {
    throw err::LengthMismatch("weight vector length does not match features");
  }
  const Vec psi = fm.activation(feeder, s);
  const int seg = fm.segment_length();
  const auto [lo, hi] = fm.feasible_index_range(s.taps[fm.ltc()]);

  // A segment whose weights are identically zero never appeared in any fit;
  // its value is unknown, not zero. Rank only fitted segments, unless none
  // of the applicable ones were ever fitted (cold start).
  auto fitted = [&](int idx) {
    return w.segment(static_cast<Eigen::Index>(idx) * seg, seg)
               .cwiseAbs()
               .maxCoeff() > 0.0;
  };
  bool any_fitted = false;
  for (int idx = lo; idx <= hi && !any_fitted; ++idx) any_fitted = fitted(idx);

  GreedyResult best;
  bool first = true;
  std::pair<double, double> best_key{0.0, 0.0};
  for (int idx = lo; idx <= hi; ++idx) {
    if (any_fitted && !fitted(idx)) continue;
    const double q = psi.dot(w.segment(static_cast<Eigen::Index>(idx) * seg, seg));
    const double delta = fm.actions()[idx];
    const std::pair<double, double> key{std::abs(delta), delta};
    if (first || q > best.value || (q == best.value && key < best_key)) {
      best = GreedyResult{delta, q};
      best_key = key;
      first = false;
    }
  }
  return best;
}

TransitionBatch generate_virtual_transitions(
    const Feeder& feeder, const std::vector<FeatureMap>& fms,
    const std::vector<Vec>& weights, const History& h,
    std::span<const std::size_t> candidates, int size, const Vec& v_star,
    int focal, Rng& rng) {
  const int n_ltc = feeder.ltc_count();
  if (static_cast<int>(fms.size()) != n_ltc ||
      static_cast<int>(weights.size()) != n_ltc) {
    throw err::LengthMismatch("one feature map and weight vector per changer");
  }
  if (focal < 0 || focal >= n_ltc) {
    throw err::SchemaMismatch("focal changer ordinal out of range");
  }
  if (candidates.empty()) {
    throw err::EmptyHistory("no history transitions to replay");
  }

  TransitionBatch batch;
  batch.focal = focal;
  batch.items.reserve(size);

  const TapChanger& focal_tc = feeder.ltcs()[focal];
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  // Greedy choices of the non-focal changers depend only on the base record;
  // cache them per record index.
  std::unordered_map<std::size_t, std::vector<double>> greedy_cache;

  for (int d = 0; d < size; ++d) {
    const std::size_t rec = candidates[pick(rng)];
    const Transition base = h.transition_at(rec);

    Vec delta = Vec::Zero(n_ltc);
    const int focal_pos = tap_ratio_to_position(base.s.taps[focal]);
    std::uniform_int_distribution<int> explore(focal_tc.pos_min - focal_pos,
                                               focal_tc.pos_max - focal_pos);
    delta[focal] = kTapStep * explore(rng);

    if (n_ltc > 1) {
      auto it = greedy_cache.find(rec);
      if (it == greedy_cache.end()) {
        std::vector<double> choices(n_ltc, 0.0);
        for (int m = 0; m < n_ltc; ++m) {
          if (m == focal) continue;
          choices[m] = greedy_action(feeder, fms[m], weights[m], base.s).delta;
        }
        it = greedy_cache.emplace(rec, std::move(choices)).first;
      }
      for (int m = 0; m < n_ltc; ++m) {
        if (m != focal) delta[m] = it->second[m];
      }
    }

    const Vec taps_new = base.s.taps + delta;
    const VoltageState v_new = estimate_voltage_under_taps(
        feeder, VoltageState{base.next.v, feeder.v0()}, base.next.taps,
        taps_new);
    const double r_new = reward(v_new.v, v_star);
    batch.items.push_back(Transition::checked(
        base.s, TapAction{delta}, r_new, SystemState{taps_new, v_new.v},
        v_star));
  }
  return batch;
}

LstdqResult lstdq_core(std::span<const FeaturizedTransition> batch, int f,
                       const LstdqOptions& opt, const Vec& w_init) {
  if (batch.empty()) throw err::EmptyBatch("lstdq needs a nonempty batch");
  if (opt.gamma < 0.0 || opt.gamma >= 1.0) {
    throw err::SchemaMismatch("discount factor must lie in [0, 1)");
  }
  if (!(opt.epsilon > 0.0) || !(opt.ridge > 0.0)) {
    throw err::SchemaMismatch("epsilon and ridge constant must be positive");
  }
  for (const auto& ft : batch) {
    if (ft.offset_s < 0 || ft.offset_s + ft.phi_s.size() > f ||
        ft.next_offsets.empty() ||
        ft.next_offsets.size() != ft.next_keys.size()) {
      throw err::LengthMismatch("featurized transition out of bounds");
    }
    for (int off : ft.next_offsets) {
      if (off < 0 || off + ft.phi_next.size() > f) {
        throw err::LengthMismatch("bootstrap segment out of bounds");
      }
    }
  }

  Vec w_prev = w_init.size() == 0 ? Vec::Zero(f) : w_init;
  if (w_prev.size() != f) {
    throw err::LengthMismatch("initial weights must have length f");
  }

  Mat B(f, f);
  Vec b(f);
  LstdqResult out;
  out.w = w_prev;

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    B.setZero();
    B.diagonal().setConstant(opt.ridge);
    b.setZero();

    for (const auto& ft : batch) {
      const Eigen::Index seg_s = ft.phi_s.size();
      const Eigen::Index seg_n = ft.phi_next.size();

      // Bootstrap action under the previous iterate, deterministic ties;
      // segments the previous iterate never fitted are skipped unless
      // nothing applicable was fitted at all.
      bool any_fitted = false;
      for (int off : ft.next_offsets) {
        if (w_prev.segment(off, seg_n).cwiseAbs().maxCoeff() > 0.0) {
          any_fitted = true;
          break;
        }
      }
      int best_off = -1;
      double best_q = 0.0;
      std::pair<double, double> best_key{0.0, 0.0};
      bool first = true;
      for (std::size_t c = 0; c < ft.next_offsets.size(); ++c) {
        const int off = ft.next_offsets[c];
        if (any_fitted &&
            w_prev.segment(off, seg_n).cwiseAbs().maxCoeff() == 0.0) {
          continue;
        }
        const double q = w_prev.segment(off, seg_n).dot(ft.phi_next);
        if (first || q > best_q || (q == best_q && ft.next_keys[c] < best_key)) {
          best_q = q;
          best_off = off;
          best_key = ft.next_keys[c];
          first = false;
        }
      }

      B.block(ft.offset_s, ft.offset_s, seg_s, seg_s) +=
          ft.phi_s * ft.phi_s.transpose();
      B.block(ft.offset_s, best_off, seg_s, seg_n) -=
          opt.gamma * (ft.phi_s * ft.phi_next.transpose());
      b.segment(ft.offset_s, seg_s) += ft.phi_s * ft.r;
    }

    Eigen::PartialPivLU<Mat> lu(B);
    const Vec diag = lu.matrixLU().diagonal().cwiseAbs();
    if (diag.minCoeff() < 1e-14 * std::max(1.0, diag.maxCoeff())) {
      throw err::NumericallySingular("TD system is numerically singular");
    }
    const Vec w = lu.solve(b);
    out.w = w;
    out.iterations = iter;
    if ((w - w_prev).norm() <= opt.epsilon) {
      out.converged = true;
      return out;
    }
    w_prev = w;
  }
  out.converged = false;  // max iterations exhausted; best-so-far returned
  return out;
}

LstdqResult lstdq(const Feeder& feeder, const TransitionBatch& batch,
                  const FeatureMap& fm, const LstdqOptions& opt,
                  const Vec& w_init) {
  if (batch.items.empty()) throw err::EmptyBatch("lstdq needs a nonempty batch");
  const int l = fm.ltc();
  const int seg = fm.segment_length();

  std::vector<FeaturizedTransition> feats;
  feats.reserve(batch.items.size());
  for (const Transition& tr : batch.items) {
    FeaturizedTransition ft;
    ft.phi_s = fm.activation(feeder, tr.s);
    ft.offset_s = fm.action_index(tr.a.delta[l]) * seg;
    ft.r = tr.r;
    ft.phi_next = fm.activation(feeder, tr.next);
    const auto [lo, hi] = fm.feasible_index_range(tr.next.taps[l]);
    for (int idx = lo; idx <= hi; ++idx) {
      ft.next_offsets.push_back(idx * seg);
      const double delta = fm.actions()[idx];
      ft.next_keys.emplace_back(std::abs(delta), delta);
    }
    feats.push_back(std::move(ft));
  }
  return lstdq_core(feats, fm.length(), opt, w_init);
}

LearnStats sequential_learn(const Feeder& feeder,
                            const std::vector<FeatureMap>& fms,
                            const History& h, Timestamp now, const Vec& v_star,
                            std::vector<Vec>& weights, const LearnConfig& cfg,
                            Rng& rng) {
  if (cfg.sweeps < 1) throw err::SchemaMismatch("sweep count must be >= 1");
  if (fms.size() != weights.size() ||
      static_cast<int>(fms.size()) != feeder.ltc_count()) {
    throw err::LengthMismatch("one feature map and weight vector per changer");
  }

  LearnStats stats;
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::size_t> candidates =
      select_history_window(h, now, cfg.window);

  for (int j = 0; j < cfg.sweeps; ++j) {
    for (int l = 0; l < feeder.ltc_count(); ++l) {
      TransitionBatch batch = generate_virtual_transitions(
          feeder, fms, weights, h, candidates, cfg.batch_size, v_star, l, rng);
      LstdqResult res = lstdq(feeder, batch, fms[l], cfg.lstdq, weights[l]);
      weights[l] = res.w;
      ++stats.lstdq_calls;
      stats.iterations.push_back(res.iterations);
      stats.all_converged = stats.all_converged && res.converged;
    }
  }
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return stats;
}

}  // namespace tapsim
