#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "tapsim/config.hpp"
#include "tapsim/episode.hpp"
#include "tapsim/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tapsim;

namespace {

Vec parse_tap_positions(const std::string& csv, const Feeder& feeder) {
  if (csv.empty()) return feeder.neutral_taps();
  std::vector<int> positions;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) positions.push_back(std::stoi(cell));
  if (static_cast<int>(positions.size()) != feeder.ltc_count()) {
    throw err::TapOutOfRange("expected " + std::to_string(feeder.ltc_count()) +
                             " tap positions");
  }
  Vec taps(feeder.ltc_count());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    taps[static_cast<Eigen::Index>(i)] = tap_position_to_ratio(positions[i]);
  }
  return taps;
}

std::unique_ptr<Controller> make_controller(const std::string& name,
                                            const Feeder& feeder,
                                            const SimConfig& cfg,
                                            std::uint64_t seed) {
  if (name == "rl") {
    return std::make_unique<RlController>(feeder, cfg.control, seed);
  }
  if (name == "conventional") {
    return std::make_unique<ConventionalController>(feeder, cfg.control.v_low,
                                                    cfg.control.v_high);
  }
  if (name == "exhaustive") {
    Vec v_star = cfg.control.v_star.size() == 0
                     ? Vec::Ones(feeder.internal_buses())
                     : cfg.control.v_star;
    return std::make_unique<ExhaustiveController>(
        feeder, v_star, cfg.control.exhaustive_sweep_truth,
        cfg.control.enumeration_budget);
  }
  if (name == "hold") return std::make_unique<HoldController>(feeder);
  throw err::SchemaMismatch("unknown controller '" + name + "'");
}

LoadProfile make_profile(const Feeder& feeder, const SimConfig& cfg,
                         const std::string& loads_path, std::uint64_t seed) {
  if (!loads_path.empty()) {
    return load_profile_csv(loads_path, feeder.internal_buses(), cfg.dt_minutes);
  }
  LoadSynthesisConfig lc;
  lc.hourly_shape = cfg.hourly_shape;
  lc.max_total_active = cfg.max_total_active;
  lc.noise_std = cfg.noise_std;
  lc.load_buses = cfg.load_buses;
  lc.power_factor = cfg.power_factor;
  lc.dt_minutes = cfg.dt_minutes;
  lc.steps = cfg.total_steps();
  return synthesize_loads(feeder.internal_buses(), lc, seed);
}

EpisodeOptions episode_options(const Feeder& feeder, const SimConfig& cfg) {
  EpisodeOptions opt;
  opt.v_star = cfg.control.v_star.size() == 0
                   ? Vec::Ones(feeder.internal_buses())
                   : cfg.control.v_star;
  opt.v_low = cfg.control.v_low;
  opt.v_high = cfg.control.v_high;
  opt.env_sweep = cfg.env_sweep;
  opt.steps_per_day = cfg.steps_per_day();
  return opt;
}

json metrics_json(const SummaryMetrics& m, const EpisodeLog& log) {
  json j;
  j["rho"] = m.rho;
  j["rho_per_day"] = m.rho_per_day;
  j["tap_move_steps"] = m.tap_move_steps;
  j["tap_moves_per_ltc"] = m.tap_moves_per_ltc;
  j["violation_steps"] = m.violation_steps;
  j["steps"] = log.entries.size();
  j["aborted"] = log.aborted;
  if (log.aborted) j["abort_reason"] = log.abort_reason;
  if (m.learn.lstdq_calls > 0) {
    j["learn"] = {{"lstdq_calls", m.learn.lstdq_calls},
                  {"iterations", m.learn.iterations},
                  {"all_converged", m.learn.all_converged},
                  {"seconds", m.learn.seconds}};
  }
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

int cmd_powerflow(const std::string& feeder_path, const std::string& inj_path,
                  const std::string& taps_csv, const std::string& solver,
                  const std::string& out_path) {
  const Feeder feeder = load_feeder_file(feeder_path);
  const InjectionVector inj =
      inj_path.empty()
          ? InjectionVector{Vec::Zero(feeder.internal_buses()),
                            Vec::Zero(feeder.internal_buses())}
          : load_injections_csv(inj_path, feeder.internal_buses());
  const Vec taps = parse_tap_positions(taps_csv, feeder);
  const VoltageState v = solver == "sweep" ? sweep_ac_solve(feeder, taps, inj)
                                           : lindistflow_solve(feeder, taps, inj);
  if (out_path.empty()) {
    std::cout << "bus,V\n0," << std::sqrt(v.v0) << "\n";
    for (Eigen::Index i = 0; i < v.v.size(); ++i) {
      std::cout << (i + 1) << ',' << std::sqrt(v.v[i]) << '\n';
    }
  } else {
    save_bus_voltage_csv(out_path, v);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_simulate(const std::string& feeder_path, const std::string& loads_path,
                 const std::string& config_path, const std::string& controller,
                 std::uint64_t seed, const std::string& out_dir,
                 const std::string& weights_in) {
  const Feeder feeder = load_feeder_file(feeder_path);
  SimConfig cfg = config_path.empty() ? SimConfig::defaults()
                                      : SimConfig::from_file(config_path);
  if (!controller.empty()) cfg.controller = controller;

  const LoadProfile profile = make_profile(feeder, cfg, loads_path, seed);
  auto ctrl = make_controller(cfg.controller, feeder, cfg, seed);

  if (!weights_in.empty()) {
    auto* rl = dynamic_cast<RlController*>(ctrl.get());
    if (rl == nullptr) {
      throw err::SchemaMismatch("--weights-in only applies to the rl controller");
    }
    std::vector<Vec> w;
    for (int l = 0; l < feeder.ltc_count(); ++l) {
      const fs::path p = fs::path(weights_in) /
                         ("weights_" + std::to_string(l + 1) + ".json");
      w.push_back(load_weights_json(p.string(), rl->feature_maps()[l]));
    }
    rl->set_weights(std::move(w));
  }

  auto [log, metrics] = run_episode(feeder, profile, *ctrl, episode_options(feeder, cfg));

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    save_history_csv((fs::path(out_dir) / "episode.csv").string(), feeder, log);
    save_voltage_csv((fs::path(out_dir) / "voltages.csv").string(), log);
    json j = metrics_json(metrics, log);
    j["controller"] = cfg.controller;
    j["seed"] = seed;
    write_json_file(fs::path(out_dir) / "summary.json", j);
    if (auto* rl = dynamic_cast<RlController*>(ctrl.get())) {
      for (int l = 0; l < feeder.ltc_count(); ++l) {
        save_weights_json(
            (fs::path(out_dir) / ("weights_" + std::to_string(l + 1) + ".json"))
                .string(),
            rl->feature_maps()[l], rl->weights()[l]);
      }
    }
  }

  std::cout << cfg.controller << ": rho = " << metrics.rho
            << " over " << log.entries.size() << " steps";
  if (log.aborted) std::cout << " (aborted: " << log.abort_reason << ")";
  std::cout << "\n";
  return log.aborted ? 1 : 0;
}

int cmd_compare(const std::string& feeder_path, const std::string& loads_path,
                const std::string& config_path, std::uint64_t seed,
                const std::string& out_dir) {
  const Feeder feeder = load_feeder_file(feeder_path);
  SimConfig cfg = config_path.empty() ? SimConfig::defaults()
                                      : SimConfig::from_file(config_path);
  const LoadProfile profile = make_profile(feeder, cfg, loads_path, seed);
  const EpisodeOptions opt = episode_options(feeder, cfg);

  const std::vector<std::string> names{"rl", "exhaustive", "conventional"};
  std::map<std::string, EpisodeLog> logs;
  std::map<std::string, SummaryMetrics> metrics;
  for (const std::string& name : names) {
    auto ctrl = make_controller(name, feeder, cfg, seed);
    auto [log, m] = run_episode(feeder, profile, *ctrl, opt);
    logs[name] = std::move(log);
    metrics[name] = std::move(m);
  }

  // Fraction of steps on which the learned policy holds the same tap
  // positions as the full-knowledge search.
  double alignment = 0.0;
  {
    const auto& a = logs["rl"].entries;
    const auto& b = logs["exhaustive"].entries;
    const std::size_t n = std::min(a.size(), b.size());
    std::size_t same = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (((a[k].taps + a[k].action) - (b[k].taps + b[k].action))
              .cwiseAbs()
              .maxCoeff() < kTapStep / 2) {
        ++same;
      }
    }
    alignment = n == 0 ? 0.0 : static_cast<double>(same) / n;
  }

  json summary;
  for (const std::string& name : names) {
    summary["rho"][name] = metrics[name].rho;
    summary["tap_changes"][name] = metrics[name].tap_move_steps;
    summary["detail"][name] = metrics_json(metrics[name], logs[name]);
  }
  summary["alignment_rl_exhaustive"] = alignment;
  summary["seed"] = seed;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json_file(fs::path(out_dir) / "summary.json", summary);

    std::ofstream rewards(fs::path(out_dir) / "rewards.csv");
    rewards << "k,timestamp,r_rl,r_exhaustive,r_conventional\n";
    const std::size_t n = logs["rl"].entries.size();
    for (std::size_t k = 0; k < n; ++k) {
      if (k >= logs["exhaustive"].entries.size() ||
          k >= logs["conventional"].entries.size()) {
        break;
      }
      rewards << k << ',' << logs["rl"].entries[k].ts << ','
              << logs["rl"].entries[k].r << ',' << logs["exhaustive"].entries[k].r
              << ',' << logs["conventional"].entries[k].r << '\n';
    }

    std::ofstream taps(fs::path(out_dir) / "taps.csv");
    taps << "k,timestamp";
    for (const std::string& name : names) {
      for (int l = 1; l <= feeder.ltc_count(); ++l) {
        taps << ',' << name << "_pos_" << l;
      }
    }
    taps << '\n';
    for (std::size_t k = 0; k < n; ++k) {
      bool ok = true;
      for (const std::string& name : names) {
        ok = ok && k < logs[name].entries.size();
      }
      if (!ok) break;
      taps << k << ',' << logs["rl"].entries[k].ts;
      for (const std::string& name : names) {
        const StepEntry& e = logs[name].entries[k];
        const Vec after = e.taps + e.action;
        for (Eigen::Index l = 0; l < after.size(); ++l) {
          taps << ',' << tap_ratio_to_position(after[l]);
        }
      }
      taps << '\n';
    }

    for (const std::string& name : names) {
      save_voltage_csv((fs::path(out_dir) / ("voltages_" + name + ".csv")).string(),
                       logs[name]);
      save_history_csv((fs::path(out_dir) / ("episode_" + name + ".csv")).string(),
                       feeder, logs[name]);
    }
  }

  std::cout << "rho (last day):\n";
  for (const std::string& name : names) {
    std::cout << "  " << name << ": " << metrics[name].rho << "\n";
  }
  std::cout << "rl/exhaustive tap alignment: " << alignment << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial-feeder tap setting simulator and learning engine"};
  app.require_subcommand(1);

  std::string feeder_path, inj_path, taps_csv, solver = "linear", out_path;
  auto* pf = app.add_subcommand("powerflow", "Solve one power flow snapshot");
  pf->add_option("--feeder", feeder_path, "feeder JSON file")->required();
  pf->add_option("--injections", inj_path, "bus,p,q CSV (default: zero load)");
  pf->add_option("--taps", taps_csv, "comma-separated tap positions");
  pf->add_option("--solver", solver, "linear|sweep")
      ->check(CLI::IsMember({"linear", "sweep"}));
  pf->add_option("--out", out_path, "output CSV (default: stdout)");

  std::string loads_path, config_path, controller, out_dir, weights_in;
  std::uint64_t seed = 7;
  auto* sim = app.add_subcommand("simulate", "Run one controller over a profile");
  sim->add_option("--feeder", feeder_path, "feeder JSON file")->required();
  sim->add_option("--loads", loads_path, "step,bus,p,q CSV (default: synthetic)");
  sim->add_option("--config", config_path, "flat TOML config file");
  sim->add_option("--controller", controller, "rl|conventional|exhaustive|hold");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--out", out_dir, "output directory");
  sim->add_option("--weights-in", weights_in, "warm-start weight directory");

  auto* cmp = app.add_subcommand(
      "compare", "Run rl, exhaustive and conventional on one profile");
  cmp->add_option("--feeder", feeder_path, "feeder JSON file")->required();
  cmp->add_option("--loads", loads_path, "step,bus,p,q CSV (default: synthetic)");
  cmp->add_option("--config", config_path, "flat TOML config file");
  cmp->add_option("--seed", seed, "RNG seed");
  cmp->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pf->parsed()) {
      return cmd_powerflow(feeder_path, inj_path, taps_csv, solver, out_path);
    }
    if (sim->parsed()) {
      return cmd_simulate(feeder_path, loads_path, config_path, controller,
                          seed, out_dir, weights_in);
    }
    if (cmp->parsed()) {
      return cmd_compare(feeder_path, loads_path, config_path, seed, out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
