#include "tapsim/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace tapsim {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

ConfigValue parse_scalar(const std::string& raw, const std::string& path,
                         int row) {
  ConfigValue v;
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    v.kind = ConfigValue::Kind::String;
    v.text = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = ConfigValue::Kind::Bool;
    v.boolean = raw == "true";
    return v;
  }
  try {
    std::size_t used = 0;
    v.number = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    v.kind = ConfigValue::Kind::Number;
    return v;
  } catch (const std::exception&) {
    // Bare words act as strings (controller = rl).
    if (!raw.empty() && raw.find(' ') == std::string::npos) {
      v.kind = ConfigValue::Kind::String;
      v.text = raw;
      return v;
    }
    throw err::ParseError(path + ": line " + std::to_string(row) +
                          ": cannot parse value '" + raw + "'");
  }
}

}  // namespace

std::map<std::string, ConfigValue> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw err::ParseError("cannot open " + path);
  std::map<std::string, ConfigValue> out;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      throw err::ParseError(path + ": line " + std::to_string(row) +
                            ": sections are not supported");
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw err::ParseError(path + ": line " + std::to_string(row) +
                            ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty() || raw.empty()) {
      throw err::ParseError(path + ": line " + std::to_string(row) +
                            ": empty key or value");
    }
    if (raw.front() == '[') {
      if (raw.back() != ']') {
        throw err::ParseError(path + ": line " + std::to_string(row) +
                              ": unterminated array");
      }
      ConfigValue v;
      v.kind = ConfigValue::Kind::Array;
      std::stringstream ss(raw.substr(1, raw.size() - 2));
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) continue;
        v.array.push_back(parse_scalar(cell, path, row).number);
      }
      out[key] = std::move(v);
    } else {
      out[key] = parse_scalar(raw, path, row);
    }
  }
  return out;
}

SimConfig SimConfig::from_file(const std::string& path) {
  const auto kv = parse_config_file(path);
  SimConfig cfg;

  auto number = [&](const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    if (it->second.kind != ConfigValue::Kind::Number) {
      throw err::SchemaMismatch(path + ": key '" + key + "' must be a number");
    }
    return it->second.number;
  };
  auto integer = [&](const std::string& key, int fallback) {
    return static_cast<int>(std::llround(number(key, fallback)));
  };
  auto boolean = [&](const std::string& key, bool fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    if (it->second.kind != ConfigValue::Kind::Bool) {
      throw err::SchemaMismatch(path + ": key '" + key + "' must be a boolean");
    }
    return it->second.boolean;
  };
  auto text = [&](const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    if (it->second.kind != ConfigValue::Kind::String) {
      throw err::SchemaMismatch(path + ": key '" + key + "' must be a string");
    }
    return it->second.text;
  };

  cfg.controller = text("controller", cfg.controller);
  cfg.control.relearn_period = integer("K", cfg.control.relearn_period);
  cfg.control.sweeps = integer("J", cfg.control.sweeps);
  cfg.control.batch_size = integer("D", cfg.control.batch_size);
  cfg.control.deadband = number("epsilon_deadband", cfg.control.deadband);
  cfg.control.gamma = number("gamma", cfg.control.gamma);
  cfg.control.epsilon = number("epsilon_converge", cfg.control.epsilon);
  cfg.control.ridge_c = number("c", cfg.control.ridge_c);
  cfg.control.sigma = number("sigma", cfg.control.sigma);
  cfg.control.kappa = integer("kappa", cfg.control.kappa);
  cfg.control.rbf_v_start = number("rbf_v_start", cfg.control.rbf_v_start);
  cfg.control.rbf_v_step = number("rbf_v_step", cfg.control.rbf_v_step);
  cfg.control.v_low = number("v_low", cfg.control.v_low);
  cfg.control.v_high = number("v_high", cfg.control.v_high);
  cfg.control.window.window_days =
      integer("window_days", cfg.control.window.window_days);
  cfg.control.window.interval_hours =
      number("interval_hours", cfg.control.window.interval_hours);
  cfg.control.enumeration_budget = static_cast<long>(
      number("enumeration_budget", static_cast<double>(cfg.control.enumeration_budget)));
  cfg.control.exhaustive_sweep_truth =
      boolean("exhaustive_sweep_truth", cfg.control.exhaustive_sweep_truth);
  cfg.control.sync_learn = boolean("sync_learn", cfg.control.sync_learn);

  cfg.dt_minutes = number("dt_minutes", cfg.dt_minutes);
  cfg.days = integer("days", cfg.days);
  cfg.warmup_days = integer("warmup_days", cfg.warmup_days);
  const std::string env = text("env", cfg.env_sweep ? "sweep" : "linear");
  if (env != "sweep" && env != "linear") {
    throw err::SchemaMismatch(path + ": env must be sweep or linear");
  }
  cfg.env_sweep = env == "sweep";

  if (auto it = kv.find("shape"); it != kv.end()) {
    if (it->second.kind != ConfigValue::Kind::Array) {
      throw err::SchemaMismatch(path + ": shape must be a number array");
    }
    cfg.hourly_shape = it->second.array;
  }
  cfg.max_total_active = number("max_total_active", cfg.max_total_active);
  cfg.noise_std = number("noise_std", cfg.noise_std);
  cfg.power_factor = number("power_factor", cfg.power_factor);
  if (auto it = kv.find("load_buses"); it != kv.end()) {
    if (it->second.kind != ConfigValue::Kind::Array) {
      throw err::SchemaMismatch(path + ": load_buses must be an array");
    }
    for (double b : it->second.array) {
      cfg.load_buses.push_back(static_cast<int>(std::llround(b)));
    }
  }

  // Per-changer RBF grid overrides: rbf_v_start_1 = 0.89 etc.
  for (const auto& [key, value] : kv) {
    for (const char* prefix : {"rbf_v_start_", "rbf_v_step_"}) {
      if (key.rfind(prefix, 0) != 0) continue;
      if (value.kind != ConfigValue::Kind::Number) {
        throw err::SchemaMismatch(path + ": key '" + key + "' must be a number");
      }
      const int ordinal = std::stoi(key.substr(std::string(prefix).size())) - 1;
      if (ordinal < 0) {
        throw err::SchemaMismatch(path + ": key '" + key +
                                  "' needs a 1-based changer index");
      }
      if (std::string(prefix) == "rbf_v_start_") {
        cfg.rbf_v_start_overrides[ordinal] = value.number;
      } else {
        cfg.rbf_v_step_overrides[ordinal] = value.number;
      }
    }
  }
  for (const auto& [ordinal, v] : cfg.rbf_v_start_overrides) {
    if (static_cast<int>(cfg.control.rbf_v_start_per_ltc.size()) <= ordinal) {
      cfg.control.rbf_v_start_per_ltc.resize(ordinal + 1, 0.0);
    }
    cfg.control.rbf_v_start_per_ltc[ordinal] = v;
  }
  for (const auto& [ordinal, v] : cfg.rbf_v_step_overrides) {
    if (static_cast<int>(cfg.control.rbf_v_step_per_ltc.size()) <= ordinal) {
      cfg.control.rbf_v_step_per_ltc.resize(ordinal + 1, 0.0);
    }
    cfg.control.rbf_v_step_per_ltc[ordinal] = v;
  }

  cfg.control.warmup_steps = cfg.warmup_days * cfg.steps_per_day();
  return cfg;
}

}  // namespace tapsim
