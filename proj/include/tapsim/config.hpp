#pragma once

#include <map>
#include <string>
#include <vector>

#include "tapsim/control.hpp"
#include "tapsim/loads.hpp"

namespace tapsim {

/// A parsed configuration value: number, string, boolean, or number array.
struct ConfigValue {
  enum class Kind { Number, String, Bool, Array } kind = Kind::Number;
  double number = 0.0;
  std::string text;
  bool boolean = false;
  std::vector<double> array;
};

/// Reads a flat `key = value` file (TOML-style scalars and number arrays,
/// `#` comments). Sections are not supported.
/// Throws err::ParseError.
std::map<std::string, ConfigValue> parse_config_file(const std::string& path);

/// Everything the simulate/compare commands need, with working defaults.
struct SimConfig {
  std::string controller = "rl";  // rl | conventional | exhaustive | hold
  ControllerConfig control;

  // Episode shape
  double dt_minutes = 5.0;
  int days = 1;
  int warmup_days = 5;
  bool env_sweep = true;

  // Load synthesis
  std::vector<double> hourly_shape = default_residential_shape();
  double max_total_active = 1.0;
  double noise_std = 0.02;
  double power_factor = 0.95;
  std::vector<int> load_buses;

  // Per-changer RBF overrides, keyed `rbf_v_start_<ordinal+1>`.
  std::map<int, double> rbf_v_start_overrides;
  std::map<int, double> rbf_v_step_overrides;

  int steps_per_day() const {
    return static_cast<int>(std::lround(24.0 * 60.0 / dt_minutes));
  }
  int total_steps() const { return steps_per_day() * (days + warmup_days); }

  static SimConfig defaults() { return SimConfig{}; }
  static SimConfig from_file(const std::string& path);
};

}  // namespace tapsim
