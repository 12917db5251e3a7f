#pragma once

#include <random>
#include <span>
#include <vector>

#include "tapsim/features.hpp"
#include "tapsim/feeder.hpp"
#include "tapsim/mdp.hpp"

namespace tapsim {

using Rng = std::mt19937_64;

/// A batch of transitions generated for one focal tap changer.
struct TransitionBatch {
  std::vector<Transition> items;
  int focal = 0;
};

/// Which slice of the history feeds the virtual transition generator:
/// records from the previous `window_days` days whose time of day falls in
/// [time-of-day(now), +interval_hours).
struct WindowConfig {
  int window_days = 5;
  double interval_hours = 2.0;
};

/// Indices of history records usable as base transitions for learning at
/// `now`. Falls back to the whole history when the configured window is
/// empty (e.g. during the first day of operation).
std::vector<std::size_t> select_history_window(const History& h, Timestamp now,
                                               const WindowConfig& cfg);

/// Greedy action of one changer under a linear action-value function.
struct GreedyResult {
  double delta = 0.0;
  double value = 0.0;
};

/// Maximizes phi(s, a)^T w over the actions applicable from s; ties resolved
/// toward the smallest |delta|, then the algebraically smaller delta.
GreedyResult greedy_action(const Feeder& feeder, const FeatureMap& fm,
                           const Vec& w, const SystemState& s);

/// Replays observed transitions under different actions. Each sample picks a
/// base transition uniformly from `candidates`, swaps its action for one
/// chosen by the exploration policy (uniform over the focal changer's
/// applicable deltas, greedy for the rest), re-estimates the follow-up
/// voltages through the tap-change identity, and recomputes the reward.
/// Throws err::EmptyHistory when no candidates exist.
TransitionBatch generate_virtual_transitions(
    const Feeder& feeder, const std::vector<FeatureMap>& fms,
    const std::vector<Vec>& weights, const History& h,
    std::span<const std::size_t> candidates, int size, const Vec& v_star,
    int focal, Rng& rng);

/// One transition featurized for the least-squares fit; segments are sparse,
/// only offsets and segment contents are stored.
struct FeaturizedTransition {
  Vec phi_s;                 // active segment content at s
  int offset_s = 0;          // column offset of that segment
  double r = 0.0;
  Vec phi_next;              // shared segment content at s'
  std::vector<int> next_offsets;                   // candidate segments at s'
  std::vector<std::pair<double, double>> next_keys;  // tie keys (|d|, d)
};

struct LstdqOptions {
  double gamma = 0.9;
  double epsilon = 1e-5;   // convergence threshold on ||w_{i+1} - w_i||
  double ridge = 0.1;      // pre-condition constant seeding B = c I
  int max_iterations = 50;
};

struct LstdqResult {
  Vec w;
  int iterations = 0;
  bool converged = false;
};

/// Iterated least-squares TD fit over featurized transitions: each pass
/// assembles B = c I + sum phi (phi - gamma phi')^T and b = sum phi r with
/// the bootstrap action chosen greedily under the previous iterate, then
/// solves B w = b. Stops when the iterate moves by at most epsilon.
/// Throws err::EmptyBatch, err::NumericallySingular.
LstdqResult lstdq_core(std::span<const FeaturizedTransition> batch, int f,
                       const LstdqOptions& opt, const Vec& w_init);

/// Featurizes a transition batch for one changer and runs lstdq_core.
LstdqResult lstdq(const Feeder& feeder, const TransitionBatch& batch,
                  const FeatureMap& fm, const LstdqOptions& opt,
                  const Vec& w_init);

struct LearnConfig {
  int sweeps = 1;        // J: round-robin passes over the changers
  int batch_size = 6000; // D: virtual transitions per fit
  LstdqOptions lstdq;
  WindowConfig window;
};

struct LearnStats {
  int lstdq_calls = 0;
  std::vector<int> iterations;
  bool all_converged = true;
  double seconds = 0.0;
};

/// Round-robin learning: for each sweep and each changer, draw a fresh batch
/// focused on that changer and refit its weights, warm-starting from the
/// current values. Updates `weights` in place.
LearnStats sequential_learn(const Feeder& feeder,
                            const std::vector<FeatureMap>& fms,
                            const History& h, Timestamp now, const Vec& v_star,
                            std::vector<Vec>& weights, const LearnConfig& cfg,
                            Rng& rng);

}  // namespace tapsim
