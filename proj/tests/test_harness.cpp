#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "tapsim/config.hpp"
#include "tapsim/episode.hpp"
#include "tapsim/io.hpp"

using namespace tapsim;
using namespace tapsim::testing;

namespace {

Feeder thirteen_bus() { return load_feeder_file(data_file("ieee13.json")); }

LoadProfile zero_profile(int n, int steps) {
  LoadProfile p;
  for (int k = 0; k < steps; ++k) {
    p.steps.push_back({Vec::Zero(n), Vec::Zero(n)});
  }
  return p;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

// ---- load synthesis ----

TEST_CASE("flat shape with uniform weights and no noise splits evenly") {
  LoadSynthesisConfig cfg;
  cfg.hourly_shape.assign(24, 1.0);
  cfg.max_total_active = 0.6;
  cfg.noise_std = 0.0;
  cfg.bus_weights = Vec::Constant(4, 0.25);
  cfg.steps = 50;
  const LoadProfile p = synthesize_loads(4, cfg, 1);
  REQUIRE(p.step_count() == 50);
  for (const InjectionVector& inj : p.steps) {
    CHECK(inj.p.sum() == doctest::Approx(-0.6).epsilon(1e-12));
    for (int b = 0; b < 4; ++b) {
      CHECK(inj.p[b] == doctest::Approx(-0.15).epsilon(1e-12));
    }
  }
}

TEST_CASE("the noise-free peak hits the configured maximum") {
  LoadSynthesisConfig cfg;
  cfg.hourly_shape = default_residential_shape();
  cfg.max_total_active = 1.25;
  cfg.noise_std = 0.0;
  cfg.steps = 288;
  const LoadProfile p = synthesize_loads(6, cfg, 5);
  double peak = 0.0;
  for (const InjectionVector& inj : p.steps) {
    peak = std::max(peak, -inj.p.sum());
  }
  CHECK(std::abs(peak - 1.25) <= 1e-9);
}

TEST_CASE("reactive power follows the constant power factor") {
  LoadSynthesisConfig cfg;
  cfg.steps = 40;
  const LoadProfile p = synthesize_loads(5, cfg, 9);
  const double expect = std::tan(std::acos(0.95));
  CHECK(expect == doctest::Approx(0.3287).epsilon(1e-4));
  for (const InjectionVector& inj : p.steps) {
    for (int b = 0; b < 5; ++b) {
      if (inj.p[b] != 0.0) {
        CHECK(inj.q[b] / inj.p[b] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("degenerate shapes and bad weights are rejected") {
  LoadSynthesisConfig cfg;
  cfg.hourly_shape = {1.0};
  CHECK_THROWS_AS(synthesize_loads(3, cfg, 1), err::DegenerateShape);

  cfg.hourly_shape = default_residential_shape();
  cfg.bus_weights = Vec::Constant(2, 0.5);  // wrong length for 3 buses
  CHECK_THROWS_AS(synthesize_loads(3, cfg, 1), err::BadWeights);

  cfg.bus_weights = Vec::Constant(3, 0.5);  // sums to 1.5
  CHECK_THROWS_AS(synthesize_loads(3, cfg, 1), err::BadWeights);

  cfg.bus_weights = Vec(3);
  cfg.bus_weights << 1.2, -0.1, -0.1;
  CHECK_THROWS_AS(synthesize_loads(3, cfg, 1), err::BadWeights);
}

TEST_CASE("synthesis is bit-reproducible per seed") {
  LoadSynthesisConfig cfg;
  cfg.steps = 100;
  const LoadProfile a = synthesize_loads(7, cfg, 42);
  const LoadProfile b = synthesize_loads(7, cfg, 42);
  const LoadProfile c = synthesize_loads(7, cfg, 43);
  REQUIRE(a.step_count() == b.step_count());
  bool all_equal = true;
  bool differs_from_c = false;
  for (int k = 0; k < a.step_count(); ++k) {
    all_equal = all_equal && a.steps[k].p == b.steps[k].p &&
                a.steps[k].q == b.steps[k].q;
    differs_from_c = differs_from_c || a.steps[k].p != c.steps[k].p;
  }
  CHECK(all_equal);
  CHECK(differs_from_c);
}

// ---- episodes ----

TEST_CASE("hold controller on zero loads yields one constant reward") {
  const Feeder f = thirteen_bus();
  HoldController hold(f);
  EpisodeOptions opt;
  opt.v_star = Vec::Constant(f.internal_buses(), 0.98);
  const LoadProfile profile = zero_profile(f.internal_buses(), 40);
  const auto [log, metrics] = run_episode(f, profile, hold, opt);
  REQUIRE(log.entries.size() == 40);
  const double expect =
      reward(Vec::Ones(f.internal_buses()), opt.v_star);
  for (const StepEntry& e : log.entries) {
    CHECK(e.r == expect);
  }
  CHECK(metrics.tap_move_steps == 0);
}

TEST_CASE("one simulated day logs exactly 288 steps") {
  const Feeder f = thirteen_bus();
  LoadSynthesisConfig cfg;
  cfg.steps = 288;
  const LoadProfile profile = synthesize_loads(f.internal_buses(), cfg, 3);
  HoldController hold(f);
  const auto [log, metrics] = run_episode(f, profile, hold, EpisodeOptions{});
  CHECK(log.entries.size() == 288);
  CHECK(metrics.rho_per_day.size() == 1);
}

TEST_CASE("logged taps chain through the logged actions") {
  const Feeder f = thirteen_bus();
  LoadSynthesisConfig cfg;
  cfg.steps = 96;
  cfg.max_total_active = 1.0;
  const LoadProfile profile = synthesize_loads(f.internal_buses(), cfg, 8);
  ConventionalController ctrl(f, 0.97, 1.02);  // tight range to force moves
  const auto [log, metrics] = run_episode(f, profile, ctrl, EpisodeOptions{});
  REQUIRE(log.entries.size() == 96);
  bool moved = false;
  for (std::size_t k = 0; k + 1 < log.entries.size(); ++k) {
    const Vec expect = log.entries[k].taps + log.entries[k].action;
    CHECK((log.entries[k + 1].taps - expect).cwiseAbs().maxCoeff() <= 1e-12);
    moved = moved || log.entries[k].action.cwiseAbs().maxCoeff() > 0.0;
  }
  CHECK(moved);  // the tight range must have triggered at least one move
}

TEST_CASE("episodes are bit-reproducible") {
  const Feeder f = thirteen_bus();
  LoadSynthesisConfig lc;
  lc.steps = 60;
  const LoadProfile profile = synthesize_loads(f.internal_buses(), lc, 21);
  ControllerConfig cc;
  cc.kappa = 2;
  cc.batch_size = 30;
  cc.relearn_period = 12;
  cc.epsilon = 1e-3;
  RlController rl_a(f, cc, 5);
  RlController rl_b(f, cc, 5);
  const auto [log_a, ma] = run_episode(f, profile, rl_a, EpisodeOptions{});
  const auto [log_b, mb] = run_episode(f, profile, rl_b, EpisodeOptions{});
  REQUIRE(log_a.entries.size() == log_b.entries.size());
  for (std::size_t k = 0; k < log_a.entries.size(); ++k) {
    CHECK(log_a.entries[k].v == log_b.entries[k].v);
    CHECK(log_a.entries[k].action == log_b.entries[k].action);
    CHECK(log_a.entries[k].r == log_b.entries[k].r);
  }
}

TEST_CASE("an rl run accumulates one chained history record per step") {
  const Feeder f = thirteen_bus();
  LoadSynthesisConfig lc;
  lc.steps = 288;
  const LoadProfile profile = synthesize_loads(f.internal_buses(), lc, 31);
  ControllerConfig cc;
  cc.kappa = 2;
  cc.warmup_steps = 1 << 20;  // no learning, history accumulation only
  RlController rl(f, cc, 6);
  const auto [log, metrics] = run_episode(f, profile, rl, EpisodeOptions{});
  CHECK(log.entries.size() == 288);
  CHECK(rl.history().size() == 288);
  CHECK(rl.history().transition_count() == 287);
}

TEST_CASE("rewards recompute from the logged follow-up voltages") {
  const Feeder f = thirteen_bus();
  LoadSynthesisConfig lc;
  lc.steps = 48;
  const LoadProfile profile = synthesize_loads(f.internal_buses(), lc, 13);
  EpisodeOptions opt;
  ConventionalController ctrl(f, 0.9, 1.1);
  const auto [log, metrics] = run_episode(f, profile, ctrl, opt);
  const Vec v_star = Vec::Ones(f.internal_buses());
  for (std::size_t k = 0; k + 1 < log.entries.size(); ++k) {
    CHECK(log.entries[k].r ==
          doctest::Approx(reward(log.entries[k + 1].v, v_star)).epsilon(1e-15));
  }
}

TEST_CASE("a collapsing step aborts with partial results") {
  const Feeder f = thirteen_bus();
  LoadProfile profile = zero_profile(f.internal_buses(), 20);
  profile.steps[10].p = Vec::Constant(f.internal_buses(), -50.0);
  HoldController hold(f);
  const auto [log, metrics] = run_episode(f, profile, hold, EpisodeOptions{});
  CHECK(log.aborted);
  CHECK(log.entries.size() < 20);
  CHECK(log.abort_reason.find("step") != std::string::npos);
}

TEST_CASE("daily mean reward aggregates per day") {
  EpisodeLog log;
  for (int k = 0; k < 2 * 288; ++k) {
    StepEntry e;
    e.k = k;
    e.r = k < 288 ? -1.0 : -2.0;
    log.entries.push_back(e);
  }
  const auto rho = daily_mean_reward(log);
  REQUIRE(rho.size() == 2);
  CHECK(rho[0] == -1.0);
  CHECK(rho[1] == -2.0);

  EpisodeLog arith;
  for (int k = 0; k < 288; ++k) {
    StepEntry e;
    e.r = -static_cast<double>(k) / 1000.0;
    arith.entries.push_back(e);
  }
  CHECK(daily_mean_reward(arith)[0] ==
        doctest::Approx(-0.287 / 2.0).epsilon(1e-12));

  CHECK_THROWS_AS(daily_mean_reward(EpisodeLog{}), err::EmptyLog);
}

// ---- file round-trips ----

TEST_CASE("feeder files survive a write/read cycle") {
  const Feeder f = thirteen_bus();
  const std::string path = temp_path("tapsim_feeder_rt.json");
  save_feeder_file(path, f);
  const Feeder g = load_feeder_file(path);
  CHECK(g.internal_buses() == f.internal_buses());
  CHECK(g.v0() == f.v0());
  for (int id = 1; id <= f.line_count(); ++id) {
    CHECK(g.line(id).from == f.line(id).from);
    CHECK(g.line(id).to == f.line(id).to);
    CHECK(g.line(id).r == f.line(id).r);
    CHECK(g.line(id).x == f.line(id).x);
  }
  // canonical form is a fixed point of write(read(.))
  const std::string path2 = temp_path("tapsim_feeder_rt2.json");
  save_feeder_file(path2, g);
  std::ifstream a(path), b(path2);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("profiles and injections survive a write/read cycle") {
  LoadSynthesisConfig cfg;
  cfg.steps = 12;
  const LoadProfile p = synthesize_loads(4, cfg, 77);
  const std::string path = temp_path("tapsim_profile_rt.csv");
  save_profile_csv(path, p);
  const LoadProfile q = load_profile_csv(path, 4);
  REQUIRE(q.step_count() == p.step_count());
  for (int k = 0; k < p.step_count(); ++k) {
    CHECK(q.steps[k].p == p.steps[k].p);
    CHECK(q.steps[k].q == p.steps[k].q);
  }
  std::remove(path.c_str());

  InjectionVector inj{Vec::Constant(3, -0.11), Vec::Constant(3, -0.04)};
  const std::string ipath = temp_path("tapsim_inj_rt.csv");
  save_injections_csv(ipath, inj);
  const InjectionVector back = load_injections_csv(ipath, 3);
  CHECK(back.p == inj.p);
  CHECK(back.q == inj.q);
  std::remove(ipath.c_str());
}

TEST_CASE("episode logs survive a write/read cycle") {
  const Feeder f = thirteen_bus();
  LoadSynthesisConfig lc;
  lc.steps = 24;
  const LoadProfile profile = synthesize_loads(f.internal_buses(), lc, 15);
  ConventionalController ctrl(f, 0.9, 1.1);
  const auto [log, metrics] = run_episode(f, profile, ctrl, EpisodeOptions{});
  const std::string path = temp_path("tapsim_log_rt.csv");
  save_history_csv(path, f, log);
  const EpisodeLog back = load_history_csv(path, f);
  REQUIRE(back.entries.size() == log.entries.size());
  for (std::size_t k = 0; k < log.entries.size(); ++k) {
    CHECK(back.entries[k].ts == log.entries[k].ts);
    CHECK(back.entries[k].taps == log.entries[k].taps);
    CHECK(back.entries[k].v == log.entries[k].v);
    CHECK(back.entries[k].r == log.entries[k].r);
  }
  std::remove(path.c_str());
}

TEST_CASE("weight snapshots survive a write/read cycle") {
  const Feeder f = thirteen_bus();
  const FeatureMap fm = FeatureMap::rbf_grid(f, 0, 0.895, 0.005, 4, 1.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec w(fm.length());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = normal(rng);
  const std::string path = temp_path("tapsim_weights_rt.json");
  save_weights_json(path, fm, w);
  const Vec back = load_weights_json(path, fm);
  CHECK(back == w);
  std::remove(path.c_str());
}

TEST_CASE("malformed rows raise parse errors that name the row") {
  const std::string path = temp_path("tapsim_bad.csv");
  {
    std::ofstream out(path);
    out << "bus,p,q\n1,-0.1,-0.03\n2,oops,-0.01\n";
  }
  try {
    load_injections_csv(path, 4);
    FAIL("expected a parse error");
  } catch (const err::ParseError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("the 123-bus description parses to 122 internal buses") {
  const Feeder f = load_feeder_file(data_file("ieee123.json"));
  CHECK(f.internal_buses() == 122);
  CHECK(f.line_count() == 122);
  REQUIRE(f.ltc_count() == 4);
  int nine = 0, five = 0;
  for (const auto& tc : f.ltcs()) {
    if (tc.window_size() == 9) ++nine;
    if (tc.window_size() == 5) ++five;
  }
  CHECK(nine == 2);
  CHECK(five == 2);
}

// ---- configuration ----

TEST_CASE("flat config files parse into simulation settings") {
  const std::string path = temp_path("tapsim_cfg.toml");
  {
    std::ofstream out(path);
    out << "# comment\n"
        << "controller = rl\n"
        << "K = 12\n"
        << "J = 3\n"
        << "D = 500\n"
        << "epsilon_deadband = 2e-4\n"
        << "gamma = 0.8\n"
        << "epsilon_converge = 1e-6\n"
        << "c = 0.2\n"
        << "sigma = 1.5\n"
        << "kappa = 11\n"
        << "v_low = 0.93\n"
        << "v_high = 1.07\n"
        << "env = \"linear\"\n"
        << "days = 2\n"
        << "warmup_days = 1\n"
        << "shape = [0.5, 1.0, 0.75]\n"
        << "rbf_v_start_1 = 0.89\n";
  }
  const SimConfig cfg = SimConfig::from_file(path);
  CHECK(cfg.controller == "rl");
  CHECK(cfg.control.relearn_period == 12);
  CHECK(cfg.control.sweeps == 3);
  CHECK(cfg.control.batch_size == 500);
  CHECK(cfg.control.deadband == 2e-4);
  CHECK(cfg.control.gamma == 0.8);
  CHECK(cfg.control.epsilon == 1e-6);
  CHECK(cfg.control.ridge_c == 0.2);
  CHECK(cfg.control.sigma == 1.5);
  CHECK(cfg.control.kappa == 11);
  CHECK(cfg.control.v_low == 0.93);
  CHECK(cfg.control.v_high == 1.07);
  CHECK_FALSE(cfg.env_sweep);
  CHECK(cfg.days == 2);
  CHECK(cfg.warmup_days == 1);
  CHECK(cfg.hourly_shape == std::vector<double>{0.5, 1.0, 0.75});
  REQUIRE(cfg.control.rbf_v_start_per_ltc.size() == 1);
  CHECK(cfg.control.rbf_v_start_per_ltc[0] == 0.89);
  CHECK(cfg.control.warmup_steps == 288);
  std::remove(path.c_str());

  {
    std::ofstream out(path);
    out << "[section]\n";
  }
  CHECK_THROWS_AS(SimConfig::from_file(path), err::ParseError);
  std::remove(path.c_str());
}
