#include "tapsim/loads.hpp"

#include <algorithm>
#include <cmath>

namespace tapsim {

std::vector<double> default_residential_shape() {
  return {0.44, 0.41, 0.39, 0.38, 0.39, 0.43, 0.52, 0.63, 0.70, 0.72, 0.73, 0.74,
          0.76, 0.75, 0.74, 0.77, 0.83, 0.92, 1.00, 0.97, 0.89, 0.77, 0.62, 0.51};
}

LoadProfile synthesize_loads(int internal_buses, const LoadSynthesisConfig& cfg,
                             std::uint64_t seed) {
  if (cfg.hourly_shape.size() < 2) {
    throw err::DegenerateShape("daily shape needs at least 2 points");
  }
  const double peak =
      *std::max_element(cfg.hourly_shape.begin(), cfg.hourly_shape.end());
  if (!(peak > 0.0)) {
    throw err::DegenerateShape("daily shape must have a positive peak");
  }
  if (!(cfg.power_factor > 0.0) || cfg.power_factor > 1.0) {
    throw err::SchemaMismatch("power factor must lie in (0, 1]");
  }

  std::vector<int> load_buses = cfg.load_buses;
  if (load_buses.empty()) {
    load_buses.resize(internal_buses);
    for (int i = 0; i < internal_buses; ++i) load_buses[i] = i + 1;
  }
  for (int bus : load_buses) {
    if (bus < 1 || bus > internal_buses) {
      throw err::BadWeights("load bus " + std::to_string(bus) +
                            " outside 1..N");
    }
  }

  Rng rng(seed);
  Vec weights = cfg.bus_weights;
  if (weights.size() == 0) {
    // Flat Dirichlet split, drawn once per profile.
    weights.resize(static_cast<Eigen::Index>(load_buses.size()));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      weights[i] = -std::log(1.0 - uni(rng));
    }
    weights /= weights.sum();
  }
  if (weights.size() != static_cast<Eigen::Index>(load_buses.size())) {
    throw err::BadWeights("one weight per load bus required");
  }
  if (weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-9) {
    throw err::BadWeights("weights must be nonnegative and sum to 1");
  }

  const double scale = cfg.max_total_active / peak;
  const double qp_ratio = std::tan(std::acos(cfg.power_factor));
  const std::size_t shape_n = cfg.hourly_shape.size();
  // Shape points are spaced so the profile spans 24 h and wraps at midnight.
  const double hours_per_point = 24.0 / static_cast<double>(shape_n);

  std::normal_distribution<double> noise(1.0, cfg.noise_std);
  LoadProfile profile;
  profile.dt_minutes = cfg.dt_minutes;
  profile.steps.reserve(cfg.steps);

  for (int k = 0; k < cfg.steps; ++k) {
    const double hours = k * cfg.dt_minutes / 60.0;
    const double u = std::fmod(hours, 24.0) / hours_per_point;
    const std::size_t i0 = static_cast<std::size_t>(u) % shape_n;
    const std::size_t i1 = (i0 + 1) % shape_n;
    const double frac = u - std::floor(u);
    const double base = scale * ((1.0 - frac) * cfg.hourly_shape[i0] +
                                 frac * cfg.hourly_shape[i1]);
    const double total = base * noise(rng);

    InjectionVector inj;
    inj.p = Vec::Zero(internal_buses);
    inj.q = Vec::Zero(internal_buses);
    for (std::size_t b = 0; b < load_buses.size(); ++b) {
      const double p = -total * weights[static_cast<Eigen::Index>(b)];
      inj.p[load_buses[b] - 1] = p;
      inj.q[load_buses[b] - 1] = p * qp_ratio;
    }
    profile.steps.push_back(std::move(inj));
  }
  return profile;
}

}  // namespace tapsim
