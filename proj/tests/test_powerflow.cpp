#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace tapsim;
using namespace tapsim::testing;

namespace {

InjectionVector zero_injections(const Feeder& f) {
  return {Vec::Zero(f.internal_buses()), Vec::Zero(f.internal_buses())};
}

InjectionVector scaled(const InjectionVector& inj, double alpha) {
  return {inj.p * alpha, inj.q * alpha};
}

}  // namespace

TEST_CASE("zero injections give a flat profile under unit taps") {
  const Feeder f = validate_topology(two_bus_spec());
  const VoltageState lin = lindistflow_solve(f, Vec{}, zero_injections(f));
  CHECK(lin.v[0] == doctest::Approx(1.0).epsilon(1e-14));
  const VoltageState ac = sweep_ac_solve(f, Vec{}, zero_injections(f));
  CHECK(ac.v[0] == 1.0);  // no flows, no losses, flat start is the answer
}

TEST_CASE("two-bus hand-computed voltage drop") {
  const Feeder f = validate_topology(two_bus_spec(0.01, 0.01));
  InjectionVector inj = zero_injections(f);
  inj.p[0] = -0.1;
  inj.q[0] = -0.1;
  const VoltageState v = lindistflow_solve(f, Vec{}, inj);
  // v1 = v0 - 2 (r p01 + x q01) with a 0.1 p.u. flow on each leg
  CHECK(v.v[0] == doctest::Approx(0.996).epsilon(1e-14));
}

TEST_CASE("two-bus tap changer rescales the substation side") {
  const Feeder f = validate_topology(two_bus_spec(0.01, 0.02, true));
  InjectionVector inj = zero_injections(f);
  inj.p[0] = -0.08;
  inj.q[0] = -0.03;
  const double t = tap_position_to_ratio(-5);
  Vec taps(1);
  taps << t;
  const VoltageState v = lindistflow_solve(f, taps, inj);
  const double expect = 1.0 / (t * t) - 2.0 * (0.01 * 0.08 + 0.02 * 0.03);
  CHECK(v.v[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("linear solver matches the naive assembly oracle") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 30);
    const FeederSpec spec =
        random_radial_spec(rng, n, 1 + static_cast<int>(rng() % 3));
    const Feeder f = validate_topology(spec);
    const Vec taps = random_taps(f, rng);
    const InjectionVector inj = random_injections(n, rng);
    const VoltageState v = lindistflow_solve(f, taps, inj);
    const Vec expect = naive_lindistflow(spec, taps_by_line(f, taps), inj);
    CHECK((v.v - expect).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("linear model deviation scales linearly with the injections") {
  std::mt19937_64 rng(55);
  const FeederSpec spec = random_radial_spec(rng, 12, 2);
  const Feeder f = validate_topology(spec);
  const Vec taps = random_taps(f, rng);
  const InjectionVector inj = random_injections(12, rng);
  const Vec base = lindistflow_solve(f, taps, zero_injections(f)).v;
  const Vec dev1 = lindistflow_solve(f, taps, inj).v - base;
  const Vec dev3 = lindistflow_solve(f, taps, scaled(inj, 3.0)).v - base;
  CHECK((dev3 - 3.0 * dev1).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("sweep and linear solutions close quadratically at light load") {
  const Feeder f = load_feeder_file(data_file("ieee13.json"));
  std::mt19937_64 rng(3);
  const InjectionVector inj = random_injections(f.internal_buses(), rng, 0.08);
  const Vec taps = f.neutral_taps();

  std::vector<double> gaps;
  for (double alpha : {1.0, 0.5, 0.25}) {
    const Vec lin = lindistflow_solve(f, taps, scaled(inj, alpha)).magnitudes();
    const Vec ac = sweep_ac_solve(f, taps, scaled(inj, alpha)).magnitudes();
    gaps.push_back((lin - ac).cwiseAbs().maxCoeff());
  }
  CHECK(gaps[0] > gaps[1]);
  CHECK(gaps[1] > gaps[2]);
  // halving the load shrinks the lossless-model gap about fourfold
  CHECK(gaps[1] <= 0.35 * gaps[0]);
  CHECK(gaps[2] <= 0.35 * gaps[1]);
}

TEST_CASE("voltage-collapse loading fails to converge") {
  const Feeder f = validate_topology(two_bus_spec());
  InjectionVector inj = zero_injections(f);
  inj.p[0] = -100.0;
  CHECK_THROWS_AS(sweep_ac_solve(f, Vec{}, inj), err::NotConverged);
}

TEST_CASE("tap re-estimation is the identity for unchanged taps") {
  const Feeder f = load_feeder_file(data_file("ieee13.json"));
  std::mt19937_64 rng(17);
  const InjectionVector inj = random_injections(f.internal_buses(), rng);
  const Vec taps = random_taps(f, rng);
  const VoltageState v = lindistflow_solve(f, taps, inj);
  const VoltageState same = estimate_voltage_under_taps(f, v, taps, taps);
  CHECK((same.v - v.v).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("tap re-estimation commutes exactly with the linear model") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 25);
    const FeederSpec spec =
        random_radial_spec(rng, n, 1 + static_cast<int>(rng() % 3));
    const Feeder f = validate_topology(spec);
    const Vec taps_a = random_taps(f, rng);
    const Vec taps_b = random_taps(f, rng);
    const InjectionVector inj = random_injections(n, rng);
    const VoltageState base = lindistflow_solve(f, taps_a, inj);
    const VoltageState moved = estimate_voltage_under_taps(f, base, taps_a, taps_b);
    const VoltageState direct = lindistflow_solve(f, taps_b, inj);
    CHECK((moved.v - direct.v).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("single-step re-estimation tracks the AC solution on the 13-bus feeder") {
  const Feeder f = load_feeder_file(data_file("ieee13.json"));
  const int n = f.internal_buses();
  // moderate loading, anchored at ratio 1
  InjectionVector inj;
  inj.p = Vec::Constant(n, -0.5 / n);
  inj.q = inj.p * 0.3287;
  const Vec base_taps = f.neutral_taps();
  const VoltageState base = sweep_ac_solve(f, base_taps, inj);

  for (int step : {-1, +1}) {
    Vec taps(1);
    taps << tap_position_to_ratio(step);
    const VoltageState est = estimate_voltage_under_taps(f, base, base_taps, taps);
    const VoltageState truth = sweep_ac_solve(f, taps, inj);
    const double err =
        (est.magnitudes() - truth.magnitudes()).cwiseAbs().maxCoeff();
    CHECK(err < 1e-3);
  }
}

TEST_CASE("taps outside the changer window are rejected") {
  const Feeder f = validate_topology(two_bus_spec(0.01, 0.01, true));
  Vec bad(1);
  bad << 1.2;
  CHECK_THROWS_AS(lindistflow_solve(f, bad, zero_injections(f)),
                  err::TapOutOfRange);
  FeederSpec narrow = two_bus_spec();
  narrow.lines[0].ltc_window = {{-8, 0}};
  const Feeder g = validate_topology(narrow);
  Vec above(1);
  above << tap_position_to_ratio(2);  // legal ratio, illegal window position
  CHECK_THROWS_AS(sweep_ac_solve(g, above, zero_injections(g)),
                  err::TapOutOfRange);
  const VoltageState v = lindistflow_solve(g, Vec::Ones(1), zero_injections(g));
  Vec target(1);
  target << 1.2;
  CHECK_THROWS_AS(estimate_voltage_under_taps(g, v, Vec::Ones(1), target),
                  err::TapOutOfRange);
}
