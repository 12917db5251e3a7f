#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tapsim/errors.hpp"
#include "tapsim/types.hpp"

namespace tapsim {

/// Converts an integer tap position to a winding ratio, 1 + 0.00625 * pos.
/// Throws err::PositionOutOfRange outside [-16, 16].
double tap_position_to_ratio(int pos);

/// Inverse of tap_position_to_ratio; the ratio must sit on the position grid.
int tap_ratio_to_position(double ratio);

/// A tap changer mounted on one line of the feeder.
struct TapChanger {
  int line = 0;      // 1-based line index
  int pos_min = kPosMin;
  int pos_max = kPosMax;
  int ordinal = 0;   // index within the feeder's tap changer list

  int window_size() const { return pos_max - pos_min + 1; }
  double ratio_min() const { return tap_position_to_ratio(pos_min); }
  double ratio_max() const { return tap_position_to_ratio(pos_max); }
  bool ratio_in_range(double t) const;
  /// Clamps position 0 into the allowed window (cold-start position).
  int neutral_position() const;
};

/// One line of the raw, not yet validated feeder description.
struct RawLine {
  int id = 0;
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  std::optional<std::pair<int, int>> ltc_window;  // (pos_min, pos_max)
};

/// Unvalidated feeder description as read from a file or built in code.
struct FeederSpec {
  double v0 = 1.0;       // squared substation voltage magnitude, p.u.^2
  int buses = 0;         // total bus count including the substation (bus 0)
  std::vector<RawLine> lines;
  /// Tap changer placements by line id, for descriptions that keep them
  /// separate from the line list: (line id, (pos_min, pos_max)).
  std::vector<std::pair<int, std::pair<int, int>>> ltc_placements;
};

/// Reduced incidence matrices of the feeder under given tap ratios.
/// m is the removed substation row, transposed.
struct IncidencePair {
  Mat M;  // N x N
  Vec m;  // N
};

/// A validated radial feeder. Lines are stored directed away from bus 0
/// (parent -> child) in id order; bus 0 is the substation.
class Feeder {
public:
  struct Line {
    int from = 0;  // parent bus
    int to = 0;    // child bus
    double r = 0.0;
    double x = 0.0;
    bool has_ltc = false;
  };

  /// Validates a raw description: ids must form 1..L, the graph must be a
  /// spanning tree rooted at bus 0, impedances nonnegative.
  /// Throws err::NotRadial, err::Disconnected, err::DuplicateLine,
  /// err::LtcOnUnknownLine, err::SchemaMismatch.
  static Feeder validate(const FeederSpec& raw);

  int internal_buses() const { return n_; }              // N
  int bus_count() const { return n_ + 1; }               // N + 1
  int line_count() const { return n_; }                  // L = N
  double v0() const { return v0_; }

  const std::vector<Line>& lines() const { return lines_; }
  const Line& line(int idx1) const { return lines_.at(idx1 - 1); }  // 1-based

  const std::vector<TapChanger>& ltcs() const { return ltcs_; }
  int ltc_count() const { return static_cast<int>(ltcs_.size()); }

  /// Line indices in breadth-first order from the substation; every line's
  /// parent bus is visited before its child.
  const std::vector<int>& sweep_order() const { return sweep_order_; }
  /// Line index (1-based) feeding each bus, 0 for the substation.
  const std::vector<int>& feeding_line() const { return feeding_line_; }

  /// Internal buses (1..N) in the subtree hung below line `idx1`, including
  /// the line's child bus.
  std::vector<int> downstream_buses(int idx1) const;

  /// Line indices (1-based) leaving `bus` toward its children.
  const std::vector<int>& child_lines(int bus) const { return children_.at(bus); }

  /// Tap ratios with every changer at its neutral position.
  Vec neutral_taps() const;

  /// Throws err::TapOutOfRange if `taps` has the wrong length or any ratio
  /// falls outside its changer's window.
  void check_taps(const Vec& taps) const;

private:
  int n_ = 0;
  double v0_ = 1.0;
  std::vector<Line> lines_;
  std::vector<TapChanger> ltcs_;
  std::vector<int> sweep_order_;
  std::vector<int> feeding_line_;
  std::vector<std::vector<int>> children_;  // child line indices per bus
  friend std::vector<int> downstream_of(const Feeder&, int);
};

/// Validates a raw feeder description (free-function form of Feeder::validate).
Feeder validate_topology(const FeederSpec& raw);

/// Assembles M(t) and m(t). For a line (i, j) carrying a tap changer at ratio
/// t the bus-i entry of column l is 1/t^2 instead of 1; the bus-j entry is -1.
IncidencePair incidence_matrices(const Feeder& feeder, const Vec& taps);

/// The tapless reduced incidence matrices (every ratio treated as 1),
/// independent of any tap changer window.
IncidencePair plain_incidence_matrices(const Feeder& feeder);

/// Low-level assembly with an explicit parent-side entry per line. Callers
/// that need a reference ratio outside a changer's window use this directly.
IncidencePair incidence_from_entries(const Feeder& feeder,
                                     const Vec& from_entries);

/// All ratio changes applicable to `ltc` from the current taps: every delta
/// that lands inside [pos_min, pos_max], sorted ascending. Always contains 0.
std::vector<double> feasible_actions(const Vec& taps, const TapChanger& ltc);

}  // namespace tapsim
