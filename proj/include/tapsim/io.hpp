#pragma once

#include <string>
#include <vector>

#include "tapsim/episode.hpp"
#include "tapsim/features.hpp"
#include "tapsim/loads.hpp"

namespace tapsim {

/// Reads a feeder description: { "v0": ..., "buses": N+1, "lines": [
///   {"id":1,"from":0,"to":1,"r":...,"x":..., "ltc":{"pos_min":..,"pos_max":..}},
///   ... ] }. "ltc" is omitted for plain lines. Impedances in p.u.
/// Throws err::ParseError, err::SchemaMismatch.
FeederSpec load_feeder_spec(const std::string& path);
Feeder load_feeder_file(const std::string& path);

/// Writes the canonical form (lines in id order, oriented away from bus 0).
void save_feeder_file(const std::string& path, const Feeder& feeder);

/// Single-snapshot injections, CSV `bus,p,q`; omitted buses get zero.
InjectionVector load_injections_csv(const std::string& path, int internal_buses);
void save_injections_csv(const std::string& path, const InjectionVector& inj);

/// Episode-long profile, CSV `step,bus,p,q`; steps must be contiguous from 0.
LoadProfile load_profile_csv(const std::string& path, int internal_buses,
                             double dt_minutes = 5.0);
void save_profile_csv(const std::string& path, const LoadProfile& profile);

/// Episode log, CSV `k,timestamp,pos_1..pos_Lt,v_1..v_N,a_1..a_Lt,r`.
/// Tap positions and position changes are integers; voltages are squared
/// magnitudes printed with full precision.
void save_history_csv(const std::string& path, const Feeder& feeder,
                      const EpisodeLog& log);
EpisodeLog load_history_csv(const std::string& path, const Feeder& feeder);

/// Voltage-magnitude trace, CSV `k,timestamp,V_1..V_N`.
void save_voltage_csv(const std::string& path, const EpisodeLog& log);

/// Per-changer weight snapshot:
/// { "ltc": l, "kappa": .., "sigma": .., "actions": [..], "w": [..] }.
void save_weights_json(const std::string& path, const FeatureMap& fm,
                       const Vec& w);
Vec load_weights_json(const std::string& path, const FeatureMap& fm);

/// `bus,V` result table for the powerflow subcommand.
void save_bus_voltage_csv(const std::string& path, const VoltageState& v);

}  // namespace tapsim
