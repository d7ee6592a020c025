// lunardop: simulate, solve, montecarlo and gdop front end.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "lunardop/config.hpp"
#include "lunardop/dop.hpp"
#include "lunardop/ephemeris.hpp"
#include "lunardop/io.hpp"
#include "lunardop/measurement.hpp"
#include "lunardop/montecarlo.hpp"
#include "lunardop/solver.hpp"

namespace fs = std::filesystem;
using namespace lunardop;
using OJson = nlohmann::ordered_json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> passes;
  std::optional<std::string> ephemeris;
  std::optional<std::string> out;
};

ScenarioConfig resolve(const CommonOptions& o) {
  ScenarioConfig cfg = o.config.empty() ? ScenarioConfig{} : load_config(o.config);
  Scenario& s = cfg.scenario;
  if (o.seed) s.seed = *o.seed;
  if (o.trials) s.n_trials = *o.trials;
  if (o.passes) {
    s.n_passes = *o.passes;
    std::erase_if(s.checkpoints, [&](int c) { return c > s.n_passes; });
  }
  if (o.ephemeris) {
    try {
      s.ephemeris = parse_ephemeris_kind(*o.ephemeris);
    } catch (const std::exception& e) {
      throw ValidationError(e.what());
    }
  }
  if (o.out) cfg.output_dir = *o.out;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  return cfg;
}

OJson vec_json(const Vec3& v) { return OJson::array({v.x(), v.y(), v.z()}); }

OJson position_json(const Vec3& r, const LunarConstants& k) {
  return {{"position_km", vec_json(r)},
          {"lat_deg", latitude_of(r) * kRadToDeg},
          {"lon_deg", longitude_of(r) * kRadToDeg},
          {"alt_km", r.norm() - k.moon_radius}};
}

/// Writes every file, then the manifest listing them with content hashes.
void write_outputs(const fs::path& dir, const std::string& command, const Scenario& scenario,
                   const std::vector<std::pair<std::string, std::string>>& files) {
  fs::create_directories(dir);
  OJson manifest;
  manifest["schema"] = "lunardop-manifest/1";
  manifest["command"] = command;
  manifest["scenario_hash"] = scenario_hash(scenario);
  manifest["seed"] = scenario.seed;
  manifest["scenario"] = OJson::parse(scenario_to_json(scenario));
  auto& list = manifest["files"] = OJson::array();
  for (const auto& [name, contents] : files) {
    write_file_atomic(dir / name, contents);
    list.push_back({{"name", name}, {"fnv1a", fnv1a_hex(contents)}, {"bytes", contents.size()}});
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

int cmd_simulate(const CommonOptions& o) {
  const ScenarioConfig cfg = resolve(o);
  const Scenario& s = cfg.scenario;
  const TrialSetup setup = draw_trial(s, 0);
  const SimulatedData data = simulate_trial(s, setup);

  std::ostringstream obs;
  write_observations_csv(obs, data.observations);
  OJson truth;
  truth["schema"] = "lunardop-receiver-truth/1";
  truth["receiver"] = position_json(setup.receiver, s.constants);
  truth["mean_anomaly_deg"] = setup.orbit.mean_anomaly * kRadToDeg;
  auto& passes = truth["passes"] = OJson::array();
  for (std::size_t p = 0; p < data.passes.size(); ++p) {
    passes.push_back({{"pass_id", p},
                      {"t_start", data.passes[p].start},
                      {"t_end", data.passes[p].end},
                      {"samples", data.passes[p].sample_count()}});
  }
  write_outputs(cfg.output_dir, "simulate", s,
                {{"ephemeris.json", ephemeris_to_json(data.ephemeris)},
                 {"observations.csv", obs.str()},
                 {"truth.json", truth.dump(2) + "\n"}});
  std::cerr << fmt::format("simulate: {} passes, {} observations -> {}\n", data.passes.size(),
                           data.observations.size(), cfg.output_dir);
  return 0;
}

OJson history_json(const SolverEstimate& e, const LunarConstants& k) {
  OJson steps = OJson::array();
  for (const auto& h : e.step_history) {
    OJson step = position_json(h.position, k);
    step["step"] = h.step;
    step["cost"] = h.cost;
    steps.push_back(step);
  }
  return steps;
}

int cmd_solve(const CommonOptions& o, const std::string& in_dir) {
  const ScenarioConfig cfg = resolve(o);
  const Scenario& s = cfg.scenario;
  const fs::path in = in_dir.empty() ? fs::path(cfg.output_dir) : fs::path(in_dir);

  const BroadcastEphemeris eph = ephemeris_from_json(read_file(in / "ephemeris.json"));
  std::istringstream obs_text(read_file(in / "observations.csv"));
  const std::vector<DopplerObservation> obs = read_observations_csv(obs_text);
  if (obs.empty()) throw ValidationError("observations.csv holds no observations");
  const auto groups = group_by_pass(obs);

  OJson sol;
  sol["schema"] = "lunardop-solution/1";
  sol["passes"] = groups.size();
  sol["observations"] = obs.size();
  Vec3 position;
  if (groups.size() == 1) {
    const PassSolution p = solve_single_pass(groups[0], eph, s.constants, s.solver);
    position = p.cost_choice();
    sol["method"] = "single_pass_cost_choice";
    sol["estimate"] = position_json(position, s.constants);
    sol["converged"] = p.estimate.converged;
    sol["iterations"] = {{"step2", p.estimate.step2_iterations}, {"step3", p.estimate.step3_iterations}};
    sol["cost_final"] = std::min(p.estimate.cost_final, p.mirror_cost);
    sol["step_history"] = history_json(p.estimate, s.constants);
    sol["candidates"] = {{{"kind", "pipeline"}, {"position_km", vec_json(p.estimate.position)}, {"cost", p.estimate.cost_final}},
                         {{"kind", "mirror"}, {"position_km", vec_json(p.mirror)}, {"cost", p.mirror_cost}}};
    sol["warnings"] = p.estimate.warnings;
  } else {
    const MultipassSolution m = disambiguate_multipass(obs, eph, s.constants, s.solver);
    position = m.estimate.position;
    sol["method"] = "multipass";
    sol["estimate"] = position_json(position, s.constants);
    sol["converged"] = m.estimate.converged;
    sol["iterations"] = {{"step2", m.estimate.step2_iterations}, {"step3", m.estimate.step3_iterations}};
    sol["cost_final"] = m.estimate.cost_final;
    sol["step_history"] = history_json(m.estimate, s.constants);
    OJson per_pass = OJson::array();
    for (std::size_t i = 0; i < m.passes.size(); ++i) {
      const auto& p = m.passes[i];
      per_pass.push_back({{"pass_id", p.pass_id},
                          {"estimate_km", vec_json(p.estimate.position)},
                          {"estimate_cost", p.estimate.cost_final},
                          {"mirror_km", vec_json(p.mirror)},
                          {"mirror_cost", p.mirror_cost},
                          {"selected_km", vec_json(m.selected[i])}});
    }
    sol["disambiguation"] = {{"cluster_spread_km", m.spread},
                             {"chosen_cluster", m.chosen_cluster},
                             {"ambiguous", m.ambiguous},
                             {"used_cost_fallback", m.used_cost_fallback},
                             {"passes", per_pass}};
    sol["warnings"] = m.estimate.warnings;
  }
  if (fs::exists(in / "truth.json")) {
    const auto truth = OJson::parse(read_file(in / "truth.json"));
    const auto& t = truth.at("receiver").at("position_km");
    const Vec3 r(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    sol["error_m"] = 1e3 * (position - r).norm();
  }
  write_outputs(cfg.output_dir, "solve", s, {{"solution.json", sol.dump(2) + "\n"}});
  std::cerr << fmt::format("solve: {} passes, {} observations -> {}\n", groups.size(), obs.size(),
                           (fs::path(cfg.output_dir) / "solution.json").string());
  return 0;
}

int cmd_montecarlo(const CommonOptions& o, bool attribution) {
  ScenarioConfig cfg = resolve(o);
  Scenario& s = cfg.scenario;
  if (s.checkpoints.empty()) {
    for (const int c : {1, 2}) {
      if (c < s.n_passes) s.checkpoints.push_back(c);
    }
  }
  const auto results = run_trials(s, [](std::size_t done, std::size_t total) {
    std::cerr << fmt::format("\rmontecarlo: {}/{} trials", done, total) << std::flush;
  });
  std::cerr << '\n';
  for (const auto& r : results) {
    if (!r.ok) std::cerr << fmt::format("trial {} failed: {}\n", r.setup.index, r.failure);
  }
  const Summary summary = summarize(results);
  std::ostringstream csv;
  write_results_csv(csv, results);
  std::vector<std::pair<std::string, std::string>> files{{"trials.csv", csv.str()},
                                                         {"summary.json", summary_json(s, summary)}};
  if (attribution) {
    std::cerr << "montecarlo: error-budget attribution (4 runs)\n";
    std::ostringstream a;
    a << "# schema: lunardop-attribution/1\nsource,mean_error_m\n";
    for (const auto& row : error_budget_attribution(s)) a << row.source << ',' << format_double(row.mean_error_m) << '\n';
    files.emplace_back("attribution.csv", a.str());
  }
  write_outputs(cfg.output_dir, "montecarlo", s, files);
  for (const auto& c : summary.checkpoints) {
    std::cerr << fmt::format("  {} pass(es): mean {:.3f} m, 99% {:.3f} m\n", c.passes, c.mean_error_m, c.p99_error_m);
  }
  return 0;
}

int cmd_gdop(const CommonOptions& o) {
  CommonOptions opts = o;
  if (!opts.passes) opts.passes = 10;
  const ScenarioConfig cfg = resolve(opts);
  const Scenario& s = cfg.scenario;
  const KeplerTrajectory truth(s.orbit, s.constants);
  const double span = s.n_passes * orbital_period(s.orbit, s.constants);
  const SatelliteStateSeries series = sample_trajectory(truth, 0.0, span, s.sample_interval);
  std::cerr << fmt::format("gdop: {} orbits, {} samples, {} cells\n", s.n_passes, series.size(),
                           GdopGrid::kLatCells * GdopGrid::kLonCells);
  const GdopGrid grid = gdop_map(series, s.effective_budget(), s.constants, s.threads);
  std::ostringstream csv;
  write_gdop_csv(csv, grid);
  write_outputs(cfg.output_dir, "gdop", s, {{"gdop.csv", csv.str()}});
  return 0;
}

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "Scenario JSON file")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--trials", o.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  app->add_option("--passes", o.passes, "Satellite passes")->check(CLI::PositiveNumber);
  app->add_option("--ephemeris", o.ephemeris, "Ephemeris method: 1, 2 or perfect");
  app->add_option("--out", o.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-satellite lunar Doppler positioning"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string in_dir;
  bool attribution = false;
  bool grid_only = false;

  auto* simulate = app.add_subcommand("simulate", "Simulate a receiver: ephemeris JSON + observations CSV");
  add_common(simulate, opts);
  auto* solve = app.add_subcommand("solve", "Solve for the receiver position from simulate outputs");
  add_common(solve, opts);
  solve->add_option("--in", in_dir, "Directory holding ephemeris.json and observations.csv");
  auto* montecarlo = app.add_subcommand("montecarlo", "Monte Carlo accuracy statistics");
  add_common(montecarlo, opts);
  montecarlo->add_flag("--attribution", attribution, "Also run the per-source error attribution");
  auto* gdop = app.add_subcommand("gdop", "Polar GDOP map");
  add_common(gdop, opts);
  gdop->add_flag("--grid-only", grid_only, "Emit only the grid (the default; kept for scripts)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*simulate) return cmd_simulate(opts);
    if (*solve) return cmd_solve(opts, in_dir);
    if (*montecarlo) return cmd_montecarlo(opts, attribution);
    if (*gdop) return cmd_gdop(opts);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
