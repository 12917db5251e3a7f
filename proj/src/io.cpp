#include "tapsim/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tapsim {

namespace {

using nlohmann::json;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw err::ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw err::ParseError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw err::ParseError("cannot write " + path);
  out << text;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& path, int row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw err::ParseError(path + ": row " + std::to_string(row) +
                          ": bad number '" + s + "'");
  }
}

long parse_long(const std::string& s, const std::string& path, int row) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw err::ParseError(path + ": row " + std::to_string(row) +
                          ": bad integer '" + s + "'");
  }
}

}  // namespace

FeederSpec load_feeder_spec(const std::string& path) {
  const json j = read_json(path);
  FeederSpec spec;
  try {
    spec.v0 = j.at("v0").get<double>();
    spec.buses = j.at("buses").get<int>();
    for (const json& lj : j.at("lines")) {
      RawLine ln;
      ln.id = lj.at("id").get<int>();
      ln.from = lj.at("from").get<int>();
      ln.to = lj.at("to").get<int>();
      ln.r = lj.at("r").get<double>();
      ln.x = lj.at("x").get<double>();
      if (lj.contains("ltc")) {
        ln.ltc_window = {lj.at("ltc").at("pos_min").get<int>(),
                         lj.at("ltc").at("pos_max").get<int>()};
      }
      spec.lines.push_back(ln);
    }
  } catch (const json::exception& e) {
    throw err::SchemaMismatch(path + ": " + e.what());
  }
  return spec;
}

Feeder load_feeder_file(const std::string& path) {
  return Feeder::validate(load_feeder_spec(path));
}

void save_feeder_file(const std::string& path, const Feeder& feeder) {
  json lines = json::array();
  for (int id = 1; id <= feeder.line_count(); ++id) {
    const auto& ln = feeder.line(id);
    json lj{{"id", id}, {"from", ln.from}, {"to", ln.to}, {"r", ln.r}, {"x", ln.x}};
    if (ln.has_ltc) {
      for (const auto& tc : feeder.ltcs()) {
        if (tc.line == id) {
          lj["ltc"] = json{{"pos_min", tc.pos_min}, {"pos_max", tc.pos_max}};
          break;
        }
      }
    }
    lines.push_back(lj);
  }
  const json j{{"v0", feeder.v0()}, {"buses", feeder.bus_count()}, {"lines", lines}};
  write_text(path, j.dump(2) + "\n");
}

InjectionVector load_injections_csv(const std::string& path,
                                    int internal_buses) {
  std::ifstream in(path);
  if (!in) throw err::ParseError("cannot open " + path);
  InjectionVector inj;
  inj.p = Vec::Zero(internal_buses);
  inj.q = Vec::Zero(internal_buses);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    if (row == 1 && line.rfind("bus", 0) == 0) continue;  // header
    const auto cells = split_csv_row(line);
    if (cells.size() != 3) {
      throw err::ParseError(path + ": row " + std::to_string(row) +
                            ": expected bus,p,q");
    }
    const long bus = parse_long(cells[0], path, row);
    if (bus < 1 || bus > internal_buses) {
      throw err::SchemaMismatch(path + ": row " + std::to_string(row) +
                                ": bus outside 1..N");
    }
    inj.p[bus - 1] = parse_double(cells[1], path, row);
    inj.q[bus - 1] = parse_double(cells[2], path, row);
  }
  return inj;
}

void save_injections_csv(const std::string& path, const InjectionVector& inj) {
  std::ostringstream out;
  out << "bus,p,q\n";
  for (Eigen::Index i = 0; i < inj.p.size(); ++i) {
    out << (i + 1) << ',' << format_double(inj.p[i]) << ','
        << format_double(inj.q[i]) << '\n';
  }
  write_text(path, out.str());
}

LoadProfile load_profile_csv(const std::string& path, int internal_buses,
                             double dt_minutes) {
  std::ifstream in(path);
  if (!in) throw err::ParseError("cannot open " + path);
  LoadProfile profile;
  profile.dt_minutes = dt_minutes;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    if (row == 1 && line.rfind("step", 0) == 0) continue;
    const auto cells = split_csv_row(line);
    if (cells.size() != 4) {
      throw err::ParseError(path + ": row " + std::to_string(row) +
                            ": expected step,bus,p,q");
    }
    const long step = parse_long(cells[0], path, row);
    const long bus = parse_long(cells[1], path, row);
    if (step < 0 || step > static_cast<long>(profile.steps.size())) {
      throw err::SchemaMismatch(path + ": row " + std::to_string(row) +
                                ": steps must be contiguous from 0");
    }
    if (bus < 1 || bus > internal_buses) {
      throw err::SchemaMismatch(path + ": row " + std::to_string(row) +
                                ": bus outside 1..N");
    }
    if (step == static_cast<long>(profile.steps.size())) {
      InjectionVector inj;
      inj.p = Vec::Zero(internal_buses);
      inj.q = Vec::Zero(internal_buses);
      profile.steps.push_back(std::move(inj));
    }
    profile.steps[step].p[bus - 1] = parse_double(cells[2], path, row);
    profile.steps[step].q[bus - 1] = parse_double(cells[3], path, row);
  }
  return profile;
}

void save_profile_csv(const std::string& path, const LoadProfile& profile) {
  std::ostringstream out;
  out << "step,bus,p,q\n";
  for (std::size_t k = 0; k < profile.steps.size(); ++k) {
    const InjectionVector& inj = profile.steps[k];
    for (Eigen::Index i = 0; i < inj.p.size(); ++i) {
      out << k << ',' << (i + 1) << ',' << format_double(inj.p[i]) << ','
          << format_double(inj.q[i]) << '\n';
    }
  }
  write_text(path, out.str());
}

void save_history_csv(const std::string& path, const Feeder& feeder,
                      const EpisodeLog& log) {
  std::ostringstream out;
  out << "k,timestamp";
  for (int l = 1; l <= feeder.ltc_count(); ++l) out << ",pos_" << l;
  for (int i = 1; i <= feeder.internal_buses(); ++i) out << ",v_" << i;
  for (int l = 1; l <= feeder.ltc_count(); ++l) out << ",a_" << l;
  out << ",r\n";
  for (const StepEntry& e : log.entries) {
    out << e.k << ',' << e.ts;
    for (Eigen::Index l = 0; l < e.taps.size(); ++l) {
      out << ',' << tap_ratio_to_position(e.taps[l]);
    }
    for (Eigen::Index i = 0; i < e.v.size(); ++i) {
      out << ',' << format_double(e.v[i]);
    }
    for (Eigen::Index l = 0; l < e.action.size(); ++l) {
      out << ',' << std::lround(e.action[l] / kTapStep);
    }
    out << ',' << format_double(e.r) << '\n';
  }
  write_text(path, out.str());
}

EpisodeLog load_history_csv(const std::string& path, const Feeder& feeder) {
  std::ifstream in(path);
  if (!in) throw err::ParseError("cannot open " + path);
  const int lt = feeder.ltc_count();
  const int n = feeder.internal_buses();
  EpisodeLog log;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    if (row == 1 && line.rfind("k,", 0) == 0) continue;
    const auto cells = split_csv_row(line);
    const std::size_t expected = 2 + 2 * lt + n + 1;
    if (cells.size() != expected) {
      throw err::ParseError(path + ": row " + std::to_string(row) +
                            ": expected " + std::to_string(expected) +
                            " columns, got " + std::to_string(cells.size()));
    }
    StepEntry e;
    std::size_t c = 0;
    e.k = static_cast<int>(parse_long(cells[c++], path, row));
    e.ts = parse_long(cells[c++], path, row);
    e.taps.resize(lt);
    for (int l = 0; l < lt; ++l) {
      e.taps[l] = tap_position_to_ratio(
          static_cast<int>(parse_long(cells[c++], path, row)));
    }
    e.v.resize(n);
    for (int i = 0; i < n; ++i) e.v[i] = parse_double(cells[c++], path, row);
    e.action.resize(lt);
    for (int l = 0; l < lt; ++l) {
      e.action[l] = kTapStep * parse_long(cells[c++], path, row);
    }
    e.r = parse_double(cells[c++], path, row);
    log.entries.push_back(std::move(e));
  }
  return log;
}

void save_voltage_csv(const std::string& path, const EpisodeLog& log) {
  std::ostringstream out;
  out << "k,timestamp";
  if (!log.entries.empty()) {
    for (Eigen::Index i = 1; i <= log.entries.front().v.size(); ++i) {
      out << ",V_" << i;
    }
  }
  out << '\n';
  for (const StepEntry& e : log.entries) {
    out << e.k << ',' << e.ts;
    for (Eigen::Index i = 0; i < e.v.size(); ++i) {
      out << ',' << format_double(std::sqrt(e.v[i]));
    }
    out << '\n';
  }
  write_text(path, out.str());
}

void save_weights_json(const std::string& path, const FeatureMap& fm,
                       const Vec& w) {
  if (w.size() != fm.length()) {
    throw err::LengthMismatch("weight length does not match the feature map");
  }
  json j;
  j["ltc"] = fm.ltc();
  j["kappa"] = fm.kappa();
  j["sigma"] = fm.sigma();
  j["actions"] = fm.actions();
  j["w"] = std::vector<double>(w.data(), w.data() + w.size());
  write_text(path, j.dump(2) + "\n");
}

Vec load_weights_json(const std::string& path, const FeatureMap& fm) {
  const json j = read_json(path);
  try {
    if (j.at("ltc").get<int>() != fm.ltc() ||
        j.at("kappa").get<int>() != fm.kappa() ||
        j.at("sigma").get<double>() != fm.sigma()) {
      throw err::SchemaMismatch(path + ": snapshot belongs to another feature map");
    }
    const auto w = j.at("w").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != fm.length()) {
      throw err::SchemaMismatch(path + ": weight length mismatch");
    }
    return Eigen::Map<const Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
  } catch (const json::exception& e) {
    throw err::SchemaMismatch(path + ": " + e.what());
  }
}

void save_bus_voltage_csv(const std::string& path, const VoltageState& v) {
  std::ostringstream out;
  out << "bus,V\n";
  out << "0," << format_double(std::sqrt(v.v0)) << '\n';
  for (Eigen::Index i = 0; i < v.v.size(); ++i) {
    out << (i + 1) << ',' << format_double(std::sqrt(v.v[i])) << '\n';
  }
  write_text(path, out.str());
}

}  // namespace tapsim
