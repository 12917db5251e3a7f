#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here recomputes results from first principles so the library paths under
// test are never exercised twice.

#include <numeric>
#include <random>
#include <vector>

#include "tapsim/feeder.hpp"
#include "tapsim/io.hpp"
#include "tapsim/powerflow.hpp"

namespace tapsim::testing {

inline FeederSpec two_bus_spec(double r = 0.01, double x = 0.01,
                               bool with_ltc = false) {
  FeederSpec spec;
  spec.v0 = 1.0;
  spec.buses = 2;
  RawLine ln;
  ln.id = 1;
  ln.from = 0;
  ln.to = 1;
  ln.r = r;
  ln.x = x;
  if (with_ltc) ln.ltc_window = {{-16, 16}};
  spec.lines.push_back(ln);
  return spec;
}

inline std::string data_file(const std::string& name) {
  return std::string(TAPSIM_DATA_DIR) + "/" + name;
}

/// Random radial feeder: bus i hangs off a uniformly drawn earlier bus, so
/// lines come out parent -> child by construction.
inline FeederSpec random_radial_spec(std::mt19937_64& rng, int internal_buses,
                                     int ltc_count) {
  FeederSpec spec;
  spec.v0 = 1.0;
  spec.buses = internal_buses + 1;
  std::uniform_real_distribution<double> imp(0.002, 0.02);
  for (int bus = 1; bus <= internal_buses; ++bus) {
    RawLine ln;
    ln.id = bus;
    ln.from = bus == 1 ? 0
                       : static_cast<int>(rng() % static_cast<unsigned>(bus));
    ln.to = bus;
    ln.r = imp(rng);
    ln.x = imp(rng);
    spec.lines.push_back(ln);
  }
  // Scatter tap changers over distinct lines.
  std::vector<int> ids(internal_buses);
  std::iota(ids.begin(), ids.end(), 1);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (int i = 0; i < ltc_count && i < internal_buses; ++i) {
    spec.lines[ids[i] - 1].ltc_window = {{-16, 16}};
  }
  return spec;
}

inline Vec random_taps(const Feeder& feeder, std::mt19937_64& rng) {
  Vec taps(feeder.ltc_count());
  for (const auto& tc : feeder.ltcs()) {
    std::uniform_int_distribution<int> pos(tc.pos_min, tc.pos_max);
    taps[tc.ordinal] = tap_position_to_ratio(pos(rng));
  }
  return taps;
}

inline InjectionVector random_injections(int n, std::mt19937_64& rng,
                                         double scale = 0.1) {
  std::uniform_real_distribution<double> load(0.0, scale);
  InjectionVector inj;
  inj.p = Vec::Zero(n);
  inj.q = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    inj.p[i] = -load(rng);
    inj.q[i] = -load(rng) * 0.3;
  }
  return inj;
}

/// Independent LinDistFlow oracle: assembles the full (N+1) x L incidence
/// matrix straight from the raw description, slices off the substation row
/// and solves the voltage equation with a generic dense solver.
inline Vec naive_lindistflow(const FeederSpec& spec, const Vec& taps_by_line,
                             const InjectionVector& inj) {
  const int n = spec.buses - 1;
  Mat full = Mat::Zero(spec.buses, n);
  Mat full_plain = Mat::Zero(spec.buses, n);
  Vec r(n), x(n);
  for (const RawLine& ln : spec.lines) {
    const int c = ln.id - 1;
    const double t = taps_by_line[c];
    full(ln.from, c) = ln.ltc_window ? 1.0 / (t * t) : 1.0;
    full(ln.to, c) = -1.0;
    full_plain(ln.from, c) = 1.0;
    full_plain(ln.to, c) = -1.0;
    r[c] = ln.r;
    x[c] = ln.x;
  }
  const Mat M_t = full.bottomRows(n);
  const Vec m_t = full.topRows(1).transpose();
  const Mat M_plain = full_plain.bottomRows(n);

  const Vec fp = M_plain.fullPivLu().solve(inj.p);
  const Vec fq = M_plain.fullPivLu().solve(inj.q);
  const Vec rhs = 2.0 * (r.cwiseProduct(fp) + x.cwiseProduct(fq)) - m_t * spec.v0;
  return Mat(M_t.transpose()).fullPivLu().solve(rhs);
}

/// Expands per-changer taps into per-line ratios for the oracle above.
inline Vec taps_by_line(const Feeder& feeder, const Vec& taps) {
  Vec out = Vec::Ones(feeder.line_count());
  for (const auto& tc : feeder.ltcs()) out[tc.line - 1] = taps[tc.ordinal];
  return out;
}

/// Union-find spanning-tree check, independent of the BFS in the validator.
inline bool is_tree_by_union_find(const FeederSpec& spec) {
  if (static_cast<int>(spec.lines.size()) != spec.buses - 1) return false;
  std::vector<int> parent(spec.buses);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const RawLine& ln : spec.lines) {
    const int a = find(ln.from);
    const int b = find(ln.to);
    if (a == b) return false;
    parent[a] = b;
  }
  return true;
}

}  // namespace tapsim::testing
