#ifndef LUNARDOP_MONTECARLO_HPP
#define LUNARDOP_MONTECARLO_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lunardop/ephemeris.hpp"
#include "lunardop/measurement.hpp"
#include "lunardop/orbit.hpp"
#include "lunardop/solver.hpp"

namespace lunardop {

/// Receiver draw: lat U[lat_min, lat_max], lon U[0, 360), alt U[alt_min, alt_max].
/// `fixed` pins every trial to one location instead.
struct ReceiverDistribution {
  double lat_min_deg = 70.0;
  double lat_max_deg = 90.0;
  double alt_min_km = -10.0;
  double alt_max_km = 10.0;
  struct Fixed {
    double lat_deg = 90.0;
    double lon_deg = 0.0;
    double alt_km = 0.0;
  };
  std::optional<Fixed> fixed;

  void validate() const;
};

struct Scenario {
  std::uint64_t seed = 1;
  int n_trials = 100;
  EphemerisKind ephemeris = EphemerisKind::Method1;
  int n_passes = 1;
  /// Pass counts at which the multipass solution is also reported; always
  /// contains n_passes. Empty means {n_passes}.
  std::vector<int> checkpoints;
  ReceiverDistribution receiver;
  ErrorBudgetConfig budget;  // switches, clocks, link, mask; velocity_sigma is set from the method
  KeplerianElements orbit;
  LunarConstants constants;
  SolverConfig solver;
  bool randomize_anomaly = true;  // random initial mean-anomaly offset per trial
  double sample_interval = 1.0;   // s
  int min_pass_samples = 60;      // shorter passes are skipped
  /// Broadcast segments span the pass plus this much on either side (s).
  double fit_margin_s = 600.0;
  unsigned threads = 0;           // 0 = hardware concurrency

  void validate() const;
  std::vector<int> resolved_checkpoints() const;
  /// Budget with velocity_sigma taken from the ephemeris method.
  ErrorBudgetConfig effective_budget() const;
};

struct TrialSetup {
  std::size_t index = 0;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double alt_km = 0.0;
  Vec3 receiver = Vec3::Zero();
  KeplerianElements orbit;
  std::uint64_t noise_seed = 0;
};

TrialSetup draw_trial(const Scenario& scenario, std::size_t index);

/// Observations and broadcast ephemeris for the first n_passes complete
/// passes over the trial receiver.
struct SimulatedData {
  std::vector<PassWindow> passes;
  std::vector<DopplerObservation> observations;
  BroadcastEphemeris ephemeris;
};

/// Throws std::runtime_error when fewer than n_passes usable passes occur.
SimulatedData simulate_trial(const Scenario& scenario, const TrialSetup& setup);

struct CheckpointResult {
  int passes = 0;
  Vec3 estimate = Vec3::Zero();
  double error_m = 0.0;
  int step2_iterations = 0;
  int step3_iterations = 0;
  bool converged = false;
  bool correct_side = false;  // closer to truth than to its mirror image
};

struct TrialResult {
  TrialSetup setup;
  bool ok = false;
  std::string failure;
  std::vector<CheckpointResult> checkpoints;
  /// First pass, per step, distance to truth or to its mirror image, whichever is smaller.
  std::array<double, 3> step_error_m{0, 0, 0};
  int step2_iterations = 0;  // first pass
  int step3_iterations = 0;
  bool cost_choice_correct = false;  // single-pass cost comparison picked the true side
  double mirror_separation_km = 0.0;  // pass 1 vs pass 2 mirror candidates, NaN with one pass
  std::vector<double> pass_durations_s;
};

TrialResult run_trial(const Scenario& scenario, std::size_t index);

/// Runs every trial on `scenario.threads` workers. Results are ordered by
/// trial index. `progress` (optional) is called after each completed trial.
std::vector<TrialResult> run_trials(const Scenario& scenario,
                                    const std::function<void(std::size_t done, std::size_t total)>& progress = {});

/// Nearest-rank percentile, rank = ceil(p/100 * n). Throws on empty input.
double percentile(std::vector<double> values, double p);

struct CheckpointSummary {
  int passes = 0;
  double mean_error_m = 0.0;
  double p99_error_m = 0.0;
  double correct_side_rate = 0.0;
};

struct Summary {
  std::size_t trials = 0;
  std::size_t failures = 0;
  std::vector<CheckpointSummary> checkpoints;
  std::array<double, 3> step_mean_error_m{0, 0, 0};
  double mean_iterations = 0.0;  // step 2 + step 3 on the first pass
  double cost_choice_rate = 0.0;
  double mean_pass_duration_s = 0.0;
};

/// Throws std::invalid_argument when no trial succeeded.
Summary summarize(const std::vector<TrialResult>& results);

struct AttributionRow {
  std::string source;
  double mean_error_m = 0.0;
};

/// One run per error source with only that source enabled; mean error at
/// n_passes. Rows: ephemeris, receiver clock, carrier tracking, satellite clock.
std::vector<AttributionRow> error_budget_attribution(const Scenario& scenario);

void write_results_csv(std::ostream& out, const std::vector<TrialResult>& results);
/// Summary document keyed by the scenario hash (see config.hpp).
std::string summary_json(const Scenario& scenario, const Summary& summary);

}  // namespace lunardop

#endif  // LUNARDOP_MONTECARLO_HPP
