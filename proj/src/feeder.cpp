#include "tapsim/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

namespace tapsim {

double tap_position_to_ratio(int pos) {
  if (pos < kPosMin || pos > kPosMax) {
    throw err::PositionOutOfRange("tap position " + std::to_string(pos) +
                                  " outside [-16, 16]");
  }
  return 1.0 + kTapStep * pos;
}

int tap_ratio_to_position(double ratio) {
  const double raw = (ratio - 1.0) / kTapStep;
  const int pos = static_cast<int>(std::lround(raw));
  if (std::abs(raw - pos) > 1e-6) {
    throw err::TapOutOfRange("ratio " + std::to_string(ratio) +
                             " is not on the tap grid");
  }
  if (pos < kPosMin || pos > kPosMax) {
    throw err::PositionOutOfRange("ratio " + std::to_string(ratio) +
                                  " maps outside [-16, 16]");
  }
  return pos;
}

bool TapChanger::ratio_in_range(double t) const {
  const double raw = (t - 1.0) / kTapStep;
  const int pos = static_cast<int>(std::lround(raw));
  if (std::abs(raw - pos) > 1e-6) return false;
  return pos >= pos_min && pos <= pos_max;
}

int TapChanger::neutral_position() const {
  return std::clamp(0, pos_min, pos_max);
}

Feeder Feeder::validate(const FeederSpec& raw) {
  if (raw.buses < 2) {
    throw err::SchemaMismatch("feeder needs at least 2 buses, got " +
                              std::to_string(raw.buses));
  }
  if (!(raw.v0 > 0.0)) {
    throw err::SchemaMismatch("substation squared voltage must be positive");
  }
  const int n = raw.buses - 1;  // internal buses
  const int l = static_cast<int>(raw.lines.size());
  if (l != n) {
    throw err::NotRadial("radial feeder requires L = N; got L = " +
                         std::to_string(l) + ", N = " + std::to_string(n));
  }

  // Line ids must form 1..L.
  std::vector<RawLine> numbered(l);
  std::vector<bool> id_seen(l, false);
  for (const auto& ln : raw.lines) {
    if (ln.id < 1 || ln.id > l) {
      throw err::SchemaMismatch("line id " + std::to_string(ln.id) +
                                " outside 1.." + std::to_string(l));
    }
    if (id_seen[ln.id - 1]) {
      throw err::DuplicateLine("duplicate line id " + std::to_string(ln.id));
    }
    id_seen[ln.id - 1] = true;
    numbered[ln.id - 1] = ln;
  }

  // Standalone tap changer placements must land on listed lines.
  for (const auto& [line_id, window] : raw.ltc_placements) {
    if (line_id < 1 || line_id > l || !id_seen[line_id - 1]) {
      throw err::LtcOnUnknownLine("tap changer placed on unknown line " +
                                  std::to_string(line_id));
    }
    if (numbered[line_id - 1].ltc_window) {
      throw err::DuplicateLine("line " + std::to_string(line_id) +
                               " already carries a tap changer");
    }
    numbered[line_id - 1].ltc_window = window;
  }
  std::vector<const RawLine*> by_id(l);
  for (int i = 0; i < l; ++i) by_id[i] = &numbered[i];

  std::set<std::pair<int, int>> seen_pairs;
  std::vector<std::vector<std::pair<int, int>>> adj(raw.buses);  // (bus, line id)
  for (const auto* ln : by_id) {
    if (ln->from < 0 || ln->from >= raw.buses || ln->to < 0 ||
        ln->to >= raw.buses) {
      throw err::SchemaMismatch("line " + std::to_string(ln->id) +
                                " references unknown bus");
    }
    if (ln->from == ln->to) {
      throw err::NotRadial("line " + std::to_string(ln->id) + " is a self-loop");
    }
    if (ln->r < 0.0 || ln->x < 0.0) {
      throw err::SchemaMismatch("line " + std::to_string(ln->id) +
                                " has negative impedance");
    }
    auto key = std::minmax(ln->from, ln->to);
    if (!seen_pairs.insert(key).second) {
      throw err::DuplicateLine("parallel line between buses " +
                               std::to_string(key.first) + " and " +
                               std::to_string(key.second));
    }
    if (ln->ltc_window) {
      auto [lo, hi] = *ln->ltc_window;
      if (lo < kPosMin || hi > kPosMax || lo > hi) {
        throw err::SchemaMismatch("line " + std::to_string(ln->id) +
                                  " has an invalid tap window");
      }
    }
    adj[ln->from].push_back({ln->to, ln->id});
    adj[ln->to].push_back({ln->from, ln->id});
  }

  // BFS from the substation; a spanning tree reaches every bus exactly once.
  Feeder f;
  f.n_ = n;
  f.v0_ = raw.v0;
  f.lines_.resize(l);
  f.feeding_line_.assign(raw.buses, 0);
  f.children_.assign(raw.buses, {});
  std::vector<bool> visited(raw.buses, false);
  std::vector<bool> line_used(l + 1, false);
  visited[0] = true;
  std::queue<int> frontier;
  frontier.push(0);
  int reached = 1;
  while (!frontier.empty()) {
    const int bus = frontier.front();
    frontier.pop();
    for (auto [next, id] : adj[bus]) {
      if (line_used[id]) continue;
      if (visited[next]) {
        throw err::NotRadial("cycle detected through line " +
                             std::to_string(id));
      }
      line_used[id] = true;
      visited[next] = true;
      ++reached;
      const RawLine& rl = *by_id[id - 1];
      // Orient parent -> child regardless of the order in the description.
      Line& stored = f.lines_[id - 1];
      stored.from = bus;
      stored.to = next;
      stored.r = rl.r;
      stored.x = rl.x;
      stored.has_ltc = rl.ltc_window.has_value();
      f.feeding_line_[next] = id;
      f.children_[bus].push_back(id);
      f.sweep_order_.push_back(id);
      frontier.push(next);
    }
  }
  if (reached != raw.buses) {
    throw err::Disconnected(std::to_string(raw.buses - reached) +
                            " bus(es) unreachable from the substation");
  }

  int ordinal = 0;
  for (const auto* ln : by_id) {
    if (!ln->ltc_window) continue;
    TapChanger tc;
    tc.line = ln->id;
    tc.pos_min = ln->ltc_window->first;
    tc.pos_max = ln->ltc_window->second;
    tc.ordinal = ordinal++;
    f.ltcs_.push_back(tc);
  }
  return f;
}

Feeder validate_topology(const FeederSpec& raw) { return Feeder::validate(raw); }

std::vector<int> Feeder::downstream_buses(int idx1) const {
  std::vector<int> out;
  std::queue<int> frontier;
  frontier.push(line(idx1).to);
  while (!frontier.empty()) {
    const int bus = frontier.front();
    frontier.pop();
    out.push_back(bus);
    for (int child : children_[bus]) frontier.push(line(child).to);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Vec Feeder::neutral_taps() const {
  Vec taps(ltc_count());
  for (const auto& tc : ltcs_) {
    taps[tc.ordinal] = tap_position_to_ratio(tc.neutral_position());
  }
  return taps;
}

void Feeder::check_taps(const Vec& taps) const {
  if (taps.size() != ltc_count()) {
    throw err::TapOutOfRange("expected " + std::to_string(ltc_count()) +
                             " tap ratios, got " + std::to_string(taps.size()));
  }
  for (const auto& tc : ltcs_) {
    if (!tc.ratio_in_range(taps[tc.ordinal])) {
      throw err::TapOutOfRange("ratio " + std::to_string(taps[tc.ordinal]) +
                               " outside window of tap changer on line " +
                               std::to_string(tc.line));
    }
  }
}

IncidencePair incidence_from_entries(const Feeder& feeder,
                                     const Vec& from_entries) {
  const int n = feeder.internal_buses();
  IncidencePair out;
  out.M = Mat::Zero(n, n);
  out.m = Vec::Zero(n);
  for (int col = 0; col < n; ++col) {
    const auto& ln = feeder.lines()[col];
    if (ln.from == 0) {
      out.m[col] = from_entries[col];
    } else {
      out.M(ln.from - 1, col) = from_entries[col];
    }
    out.M(ln.to - 1, col) = -1.0;
  }
  return out;
}

IncidencePair incidence_matrices(const Feeder& feeder, const Vec& taps) {
  feeder.check_taps(taps);
  Vec from_entries = Vec::Ones(feeder.line_count());
  for (const auto& tc : feeder.ltcs()) {
    const double t = taps[tc.ordinal];
    from_entries[tc.line - 1] = 1.0 / (t * t);
  }
  return incidence_from_entries(feeder, from_entries);
}

IncidencePair plain_incidence_matrices(const Feeder& feeder) {
  return incidence_from_entries(feeder, Vec::Ones(feeder.line_count()));
}

std::vector<double> feasible_actions(const Vec& taps, const TapChanger& ltc) {
  if (ltc.ordinal < 0 || ltc.ordinal >= taps.size()) {
    throw err::TapOutOfRange("tap changer ordinal outside tap vector");
  }
  const double t = taps[ltc.ordinal];
  if (!ltc.ratio_in_range(t)) {
    throw err::TapOutOfRange("current ratio outside tap changer window");
  }
  const int pos = tap_ratio_to_position(t);
  std::vector<double> out;
  out.reserve(ltc.window_size());
  for (int target = ltc.pos_min; target <= ltc.pos_max; ++target) {
    out.push_back(kTapStep * (target - pos));
  }
  return out;
}

}  // namespace tapsim
