#include "lunardop/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "lunardop/config.hpp"
#include "lunardop/io.hpp"
#include "lunardop/random.hpp"

namespace lunardop {

namespace {

// Streams of the per-trial noise seed.
constexpr std::uint64_t kMeasurementStream = 1;
constexpr std::uint64_t kEphemerisStream = 2;

bool closer_to_truth(const Vec3& estimate, const Vec3& truth, const Vec3& mirrored_truth) {
  return (estimate - truth).norm() <= (estimate - mirrored_truth).norm();
}

double modulo_mirror_error(const Vec3& estimate, const Vec3& truth, const Vec3& mirrored_truth) {
  return std::min((estimate - truth).norm(), (estimate - mirrored_truth).norm());
}

}  // namespace

void ReceiverDistribution::validate() const {
  if (!(lat_min_deg >= -90.0 && lat_min_deg <= lat_max_deg && lat_max_deg <= 90.0)) {
    throw std::invalid_argument("receiver latitude range must satisfy -90 <= min <= max <= 90");
  }
  if (!(alt_min_km <= alt_max_km) || !(alt_min_km > -100.0) || !(alt_max_km < 100.0)) {
    throw std::invalid_argument("receiver altitude range must be ordered and within +-100 km");
  }
  if (fixed) {
    if (!(std::abs(fixed->lat_deg) <= 90.0) || !std::isfinite(fixed->lon_deg) ||
        !(std::abs(fixed->alt_km) < 100.0)) {
      throw std::invalid_argument("fixed receiver outside the valid range");
    }
  }
}

void Scenario::validate() const {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
  if (n_passes < 1) throw std::invalid_argument("n_passes must be at least 1");
  for (const int c : checkpoints) {
    if (c < 1 || c > n_passes) throw std::invalid_argument("checkpoints must lie in [1, n_passes]");
  }
  receiver.validate();
  constants.validate();
  orbit.validate(constants);
  budget.link.validate();
  budget.clocks.validate();
  if (!(budget.mask >= 0.0 && budget.mask < kPi / 2.0)) {
    throw std::invalid_argument("mask must lie in [0, 90) deg");
  }
  solver.validate();
  if (!(sample_interval > 0.0 && sample_interval <= 10.0)) {
    throw std::invalid_argument("sample_interval must lie in (0, 10] s");
  }
  if (min_pass_samples < 12) throw std::invalid_argument("min_pass_samples must be at least 12");
  if (!(fit_margin_s >= 0.0 && fit_margin_s <= 3600.0)) {
    throw std::invalid_argument("fit_margin_s must lie in [0, 3600] s");
  }
}

std::vector<int> Scenario::resolved_checkpoints() const {
  std::vector<int> out = checkpoints;
  out.push_back(n_passes);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ErrorBudgetConfig Scenario::effective_budget() const {
  ErrorBudgetConfig b = budget;
  b.velocity_sigma = EphemerisMethod::of(ephemeris).velocity_sigma();
  return b;
}

TrialSetup draw_trial(const Scenario& scenario, std::size_t index) {
  Rng rng = make_rng(scenario.seed, index);
  TrialSetup s;
  s.index = index;
  const auto& dist = scenario.receiver;
  std::uniform_real_distribution<double> lat(dist.lat_min_deg, dist.lat_max_deg);
  std::uniform_real_distribution<double> lon(0.0, 360.0);
  std::uniform_real_distribution<double> alt(dist.alt_min_km, dist.alt_max_km);
  std::uniform_real_distribution<double> anomaly(0.0, 2.0 * kPi);
  // Draw everything in a fixed order so the stream layout never depends on
  // which options are enabled.
  s.lat_deg = lat(rng);
  s.lon_deg = lon(rng);
  s.alt_km = alt(rng);
  const double offset = anomaly(rng);
  s.noise_seed = rng();
  if (dist.fixed) {
    s.lat_deg = dist.fixed->lat_deg;
    s.lon_deg = dist.fixed->lon_deg;
    s.alt_km = dist.fixed->alt_km;
  }
  s.orbit = scenario.orbit;
  if (scenario.randomize_anomaly) s.orbit.mean_anomaly = std::fmod(s.orbit.mean_anomaly + offset, 2.0 * kPi);
  s.receiver = surface_point(s.lat_deg * kDegToRad, s.lon_deg * kDegToRad, s.alt_km, scenario.constants);
  return s;
}

SimulatedData simulate_trial(const Scenario& scenario, const TrialSetup& setup) {
  const LunarConstants& k = scenario.constants;
  const KeplerTrajectory truth(setup.orbit, k);
  const ErrorBudgetConfig budget = scenario.effective_budget();
  const double period = orbital_period(setup.orbit, k);

  SatelliteStateSeries series;
  std::vector<PassWindow> usable;
  double span = (scenario.n_passes + 3) * period;
  for (int attempt = 0; attempt < 3; ++attempt, span *= 2.0) {
    series = sample_trajectory(truth, 0.0, span, scenario.sample_interval);
    usable.clear();
    for (const auto& w : find_passes(series, setup.receiver, budget.mask)) {
      // Passes cut by either end of the window are incomplete.
      if (w.first == 0 || w.last >= series.size()) continue;
      if (w.sample_count() < static_cast<std::size_t>(scenario.min_pass_samples)) continue;
      usable.push_back(w);
      if (usable.size() == static_cast<std::size_t>(scenario.n_passes)) break;
    }
    if (usable.size() == static_cast<std::size_t>(scenario.n_passes)) break;
  }
  if (usable.size() < static_cast<std::size_t>(scenario.n_passes)) {
    throw std::runtime_error(fmt::format("only {} usable passes over receiver at lat {:.3f} deg",
                                         usable.size(), setup.lat_deg));
  }

  SimulatedData out;
  out.passes = usable;
  Rng rng = make_rng(setup.noise_seed, kMeasurementStream);
  for (std::size_t p = 0; p < usable.size(); ++p) {
    const auto& w = usable[p];
    const std::vector<double> times(series.times.begin() + static_cast<std::ptrdiff_t>(w.first),
                                    series.times.begin() + static_cast<std::ptrdiff_t>(w.last));
    auto obs = synthesize_pass(setup.receiver, times, truth, budget, k, rng, static_cast<int>(p));
    out.observations.insert(out.observations.end(), obs.begin(), obs.end());
  }

  // One prediction covers the whole trial, so ephemeris errors are
  // correlated from pass to pass.
  const auto margin = static_cast<std::size_t>(std::lround(scenario.fit_margin_s / scenario.sample_interval));
  const std::size_t end = std::min(series.size(), usable.back().last + margin);
  const EphemerisKind kind = scenario.budget.switches.ephemeris ? scenario.ephemeris : EphemerisKind::Perfect;
  const SatelliteStateSeries predicted = corrupt_orbit(
      series.slice(0, end), EphemerisMethod::of(kind), derive_seed(setup.noise_seed, kEphemerisStream));
  for (std::size_t p = 0; p < usable.size(); ++p) {
    const auto& w = usable[p];
    const std::size_t lo = w.first >= margin ? w.first - margin : 0;
    const std::size_t hi = std::min(end, w.last + margin);
    out.ephemeris.add(fit_chebyshev(predicted.slice(lo, hi), static_cast<int>(p)));
  }
  return out;
}

TrialResult run_trial(const Scenario& scenario, std::size_t index) {
  TrialResult result;
  result.setup = draw_trial(scenario, index);
  result.mirror_separation_km = std::numeric_limits<double>::quiet_NaN();
  try {
    const SimulatedData data = simulate_trial(scenario, result.setup);
    const auto groups = group_by_pass(data.observations);
    for (const auto& w : data.passes) result.pass_durations_s.push_back(w.duration());

    std::vector<PassSolution> passes;
    for (const auto& g : groups) {
      passes.push_back(solve_single_pass(g, data.ephemeris, scenario.constants, scenario.solver));
    }
    const Vec3& truth = result.setup.receiver;
    const Vec3 mirrored = mirror_reflect(truth, passes[0].normal);
    const auto& history = passes[0].estimate.step_history;
    for (std::size_t s = 0; s < 2 && s < history.size(); ++s) {
      result.step_error_m[s] = 1e3 * modulo_mirror_error(history[s].position, truth, mirrored);
    }
    // The mirror-side minimum is not the exact reflection of the truth, so
    // step 3 is scored on whichever refined candidate lies on the true side.
    result.step_error_m[2] = 1e3 * std::min((passes[0].estimate.position - truth).norm(),
                                            (passes[0].mirror - truth).norm());
    result.step2_iterations = passes[0].estimate.step2_iterations;
    result.step3_iterations = passes[0].estimate.step3_iterations;
    result.cost_choice_correct = closer_to_truth(passes[0].cost_choice(), truth, mirrored);

    if (passes.size() >= 2) {
      const auto wrong = [&](const PassSolution& p) {
        return (p.estimate.position - truth).norm() > (p.mirror - truth).norm() ? p.estimate.position
                                                                               : p.mirror;
      };
      result.mirror_separation_km = (wrong(passes[0]) - wrong(passes[1])).norm();
    }

    for (const int n : scenario.resolved_checkpoints()) {
      CheckpointResult c;
      c.passes = n;
      if (n == 1) {
        // A single pass cannot tell the two sides apart; report the
        // true-side candidate as the one-pass accuracy.
        const PassSolution& p = passes[0];
        c.estimate = (p.estimate.position - truth).norm() <= (p.mirror - truth).norm() ? p.estimate.position
                                                                                       : p.mirror;
        c.step2_iterations = passes[0].estimate.step2_iterations;
        c.step3_iterations = passes[0].estimate.step3_iterations;
        c.converged = passes[0].estimate.converged;
      } else {
        std::vector<DopplerObservation> obs;
        for (int p = 0; p < n; ++p) obs.insert(obs.end(), groups[p].begin(), groups[p].end());
        const MultipassSolution m = combine_passes(
            {passes.begin(), passes.begin() + n}, obs, data.ephemeris, scenario.constants, scenario.solver);
        c.estimate = m.estimate.position;
        c.step2_iterations = m.estimate.step2_iterations;
        c.step3_iterations = m.estimate.step3_iterations;
        c.converged = m.estimate.converged;
      }
      c.error_m = 1e3 * (c.estimate - truth).norm();
      c.correct_side = closer_to_truth(c.estimate, truth, mirrored);
      result.checkpoints.push_back(c);
    }
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.failure = e.what();
  }
  return result;
}

std::vector<TrialResult> run_trials(const Scenario& scenario,
                                    const std::function<void(std::size_t, std::size_t)>& progress) {
  scenario.validate();
  const auto total = static_cast<std::size_t>(scenario.n_trials);
  std::vector<TrialResult> results(total);
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex mu;
  const auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      results[i] = run_trial(scenario, i);
      if (progress) {
        std::lock_guard lock(mu);
        progress(++done, total);
      }
    }
  };
  unsigned threads = scenario.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                           : scenario.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

Summary summarize(const std::vector<TrialResult>& results) {
  Summary s;
  s.trials = results.size();
  std::vector<const TrialResult*> ok;
  for (const auto& r : results) {
    if (r.ok) ok.push_back(&r);
  }
  s.failures = results.size() - ok.size();
  if (ok.empty()) throw std::invalid_argument("no successful trials to summarize");
  const auto n = static_cast<double>(ok.size());

  double durations = 0.0;
  std::size_t pass_count = 0;
  for (const auto* r : ok) {
    for (int k = 0; k < 3; ++k) s.step_mean_error_m[k] += r->step_error_m[k] / n;
    s.mean_iterations += (r->step2_iterations + r->step3_iterations) / n;
    s.cost_choice_rate += (r->cost_choice_correct ? 1.0 : 0.0) / n;
    for (const double d : r->pass_durations_s) durations += d;
    pass_count += r->pass_durations_s.size();
  }
  s.mean_pass_duration_s = pass_count > 0 ? durations / static_cast<double>(pass_count) : 0.0;

  for (std::size_t c = 0; c < ok.front()->checkpoints.size(); ++c) {
    CheckpointSummary cs;
    cs.passes = ok.front()->checkpoints[c].passes;
    std::vector<double> errors;
    for (const auto* r : ok) {
      errors.push_back(r->checkpoints[c].error_m);
      cs.correct_side_rate += (r->checkpoints[c].correct_side ? 1.0 : 0.0) / n;
    }
    cs.mean_error_m = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
    cs.p99_error_m = percentile(errors, 99.0);
    s.checkpoints.push_back(cs);
  }
  return s;
}

std::vector<AttributionRow> error_budget_attribution(const Scenario& scenario) {
  const std::array<std::pair<const char*, ErrorSwitches>, 4> sources{{
      {"ephemeris", {true, false, false, false}},
      {"receiver_clock", {false, false, true, false}},
      {"carrier_tracking", {false, false, false, true}},
      {"satellite_clock", {false, true, false, false}},
  }};
  std::vector<AttributionRow> rows;
  for (const auto& [name, switches] : sources) {
    Scenario s = scenario;
    s.budget.switches = switches;
    s.checkpoints.clear();
    const Summary summary = summarize(run_trials(s));
    rows.push_back({name, summary.checkpoints.back().mean_error_m});
  }
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<TrialResult>& results) {
  std::vector<int> passes;
  for (const auto& r : results) {
    if (r.ok) {
      for (const auto& c : r.checkpoints) passes.push_back(c.passes);
      break;
    }
  }
  out << "# schema: lunardop-trials/1\n"
      << "trial,lat_deg,lon_deg,alt_km,ok,step1_err_m,step2_err_m,step3_err_m,step2_iter,step3_iter,"
         "cost_choice_correct,mirror_separation_km";
  for (const int p : passes) out << fmt::format(",err_m_{0}p,correct_{0}p", p);
  out << '\n';
  for (const auto& r : results) {
    const auto& s = r.setup;
    out << fmt::format("{},{},{},{},{}", s.index, format_double(s.lat_deg), format_double(s.lon_deg),
                       format_double(s.alt_km), r.ok ? 1 : 0);
    if (!r.ok) {
      out << std::string(7 + 2 * passes.size(), ',') << '\n';
      continue;
    }
    out << fmt::format(",{},{},{},{},{},{},{}", format_double(r.step_error_m[0]),
                       format_double(r.step_error_m[1]), format_double(r.step_error_m[2]),
                       r.step2_iterations, r.step3_iterations, r.cost_choice_correct ? 1 : 0,
                       std::isnan(r.mirror_separation_km) ? std::string() : format_double(r.mirror_separation_km));
    for (const auto& c : r.checkpoints) out << ',' << format_double(c.error_m) << ',' << (c.correct_side ? 1 : 0);
    out << '\n';
  }
}

std::string summary_json(const Scenario& scenario, const Summary& summary) {
  nlohmann::ordered_json j;
  j["schema"] = "lunardop-summary/1";
  j["scenario_hash"] = scenario_hash(scenario);
  j["seed"] = scenario.seed;
  j["ephemeris"] = to_string(scenario.ephemeris);
  j["trials"] = summary.trials;
  j["failures"] = summary.failures;
  j["passes"] = scenario.n_passes;
  auto& cps = j["checkpoints"] = nlohmann::ordered_json::array();
  for (const auto& c : summary.checkpoints) {
    cps.push_back({{"passes", c.passes},
                   {"mean_error_m", c.mean_error_m},
                   {"p99_error_m", c.p99_error_m},
                   {"correct_side_rate", c.correct_side_rate}});
  }
  j["step_mean_error_m"] = summary.step_mean_error_m;
  j["mean_iterations_step2_step3"] = summary.mean_iterations;
  j["single_pass_cost_choice_rate"] = summary.cost_choice_rate;
  j["mean_pass_duration_s"] = summary.mean_pass_duration_s;
  return j.dump(2) + "\n";
}

}  // namespace lunardop
