#include "tapsim/powerflow.hpp"

#include <Eigen/LU>
#include <cmath>

namespace tapsim {

namespace {

void check_injections(const Feeder& feeder, const InjectionVector& inj) {
  const int n = feeder.internal_buses();
  if (inj.p.size() != n || inj.q.size() != n) {
    throw err::LengthMismatch("injection vectors must have length N = " +
                              std::to_string(n));
  }
  if (!inj.p.allFinite() || !inj.q.allFinite()) {
    throw err::SchemaMismatch("injections must be finite");
  }
}

// Tap ratio applied to each line (1.0 where no changer is mounted).
Vec line_ratios(const Feeder& feeder, const Vec& taps) {
  Vec ratios = Vec::Ones(feeder.line_count());
  for (const auto& tc : feeder.ltcs()) ratios[tc.line - 1] = taps[tc.ordinal];
  return ratios;
}

}  // namespace

VoltageState lindistflow_solve(const Feeder& feeder, const Vec& taps,
                               const InjectionVector& inj) {
  feeder.check_taps(taps);
  check_injections(feeder, inj);

  // Line flows from injections alone: f = M^{-1} p with the tapless matrix.
  const IncidencePair plain = plain_incidence_matrices(feeder);
  Eigen::PartialPivLU<Mat> lu_plain(plain.M);
  const Vec fp = lu_plain.solve(inj.p);
  const Vec fq = lu_plain.solve(inj.q);

  Vec rhs(feeder.line_count());
  for (int l = 0; l < feeder.line_count(); ++l) {
    const auto& ln = feeder.lines()[l];
    rhs[l] = 2.0 * (ln.r * fp[l] + ln.x * fq[l]);
  }

  const IncidencePair inc = incidence_matrices(feeder, taps);
  rhs -= inc.m * feeder.v0();
  Eigen::PartialPivLU<Mat> lu(inc.M.transpose());
  VoltageState out;
  out.v = lu.solve(rhs);
  out.v0 = feeder.v0();
  if (!out.v.allFinite()) {
    throw err::SingularSystem("LinDistFlow system is singular");
  }
  return out;
}

VoltageState sweep_ac_solve(const Feeder& feeder, const Vec& taps,
                            const InjectionVector& inj, double tol,
                            int max_iter) {
  feeder.check_taps(taps);
  check_injections(feeder, inj);
  if (!(tol > 0.0)) throw err::SchemaMismatch("sweep tolerance must be positive");

  const int n = feeder.internal_buses();
  const int l = feeder.line_count();
  const Vec ratios = line_ratios(feeder, taps);
  const auto& order = feeder.sweep_order();

  Vec v = Vec::Constant(n, feeder.v0());  // flat start
  Vec flow_p = Vec::Zero(l), flow_q = Vec::Zero(l), cur2 = Vec::Zero(l);

  auto bus_v = [&](int bus) { return bus == 0 ? feeder.v0() : v[bus - 1]; };

  for (int iter = 0; iter < max_iter; ++iter) {
    // Backward sweep: accumulate sending-end flows, leaves first.
    // Sending end is the internal node behind the ideal transformer, where
    // the squared voltage is v_from / t^2.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int idx = *it - 1;
      const auto& ln = feeder.lines()[idx];
      double p = -inj.p[ln.to - 1];
      double q = -inj.q[ln.to - 1];
      for (int child : feeder.child_lines(ln.to)) {
        p += flow_p[child - 1];
        q += flow_q[child - 1];
      }
      const double t = ratios[idx];
      const double v_send = bus_v(ln.from) / (t * t);
      if (!(v_send > 1e-6)) {
        throw err::NotConverged("voltage collapsed during backward sweep");
      }
      cur2[idx] = (p * p + q * q) / v_send;
      flow_p[idx] = p + ln.r * cur2[idx];
      flow_q[idx] = q + ln.x * cur2[idx];
    }

    // Forward sweep: update voltages root first.
    double max_change = 0.0;
    for (int idx1 : order) {
      const auto& ln = feeder.line(idx1);
      const double t = ratios[idx1 - 1];
      const double v_send = bus_v(ln.from) / (t * t);
      const double z2 = ln.r * ln.r + ln.x * ln.x;
      const double v_new = v_send -
                           2.0 * (ln.r * flow_p[idx1 - 1] + ln.x * flow_q[idx1 - 1]) +
                           z2 * cur2[idx1 - 1];
      if (!(v_new > 0.0)) {
        throw err::NotConverged("negative squared voltage at bus " +
                                std::to_string(ln.to));
      }
      max_change = std::max(
          max_change, std::abs(std::sqrt(v_new) - std::sqrt(v[ln.to - 1])));
      v[ln.to - 1] = v_new;
    }

    if (max_change < tol) {
      return VoltageState{v, feeder.v0()};
    }
  }
  throw err::NotConverged("sweep solver did not converge in " +
                          std::to_string(max_iter) + " iterations");
}

VoltageState estimate_voltage_under_taps(const Feeder& feeder,
                                         const VoltageState& base,
                                         const Vec& taps_from,
                                         const Vec& taps_to) {
  feeder.check_taps(taps_from);
  feeder.check_taps(taps_to);
  if (base.v.size() != feeder.internal_buses()) {
    throw err::LengthMismatch("voltage vector must have length N");
  }
  if (taps_from == taps_to) return base;  // identity, keep it exact

  const IncidencePair from = incidence_matrices(feeder, taps_from);
  const IncidencePair to = incidence_matrices(feeder, taps_to);
  const Vec rhs =
      from.M.transpose() * base.v + (from.m - to.m) * base.v0;
  Eigen::PartialPivLU<Mat> lu(to.M.transpose());
  VoltageState out;
  out.v = lu.solve(rhs);
  out.v0 = base.v0;
  if (!out.v.allFinite()) {
    throw err::SingularSystem("tap re-estimation system is singular");
  }
  return out;
}

}  // namespace tapsim
