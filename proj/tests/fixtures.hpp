#ifndef LUNARDOP_TESTS_FIXTURES_HPP
#define LUNARDOP_TESTS_FIXTURES_HPP

#include <vector>

#include "lunardop/montecarlo.hpp"

namespace fixtures {

using namespace lunardop;

inline Scenario noiseless_scenario(double lat_deg, double lon_deg, double alt_km, int passes = 1) {
  Scenario s;
  s.n_trials = 1;
  s.n_passes = passes;
  s.ephemeris = EphemerisKind::Perfect;
  s.budget.switches = ErrorSwitches::all_off();
  s.randomize_anomaly = false;
  s.receiver.fixed = ReceiverDistribution::Fixed{lat_deg, lon_deg, alt_km};
  return s;
}

/// Noiseless passes over a fixed receiver; `truth` doubles as an exact ephemeris.
struct NoiselessPass {
  Scenario scenario;
  TrialSetup setup;
  KeplerTrajectory truth;
  SimulatedData data;

  NoiselessPass(double lat_deg, double lon_deg, double alt_km, int passes = 1)
      : scenario(noiseless_scenario(lat_deg, lon_deg, alt_km, passes)),
        setup(draw_trial(scenario, 0)),
        truth(setup.orbit, scenario.constants),
        data(simulate_trial(scenario, setup)) {}

  const Vec3& receiver() const { return setup.receiver; }
  const LunarConstants& constants() const { return scenario.constants; }
  std::vector<DopplerObservation> pass(int id) const {
    std::vector<DopplerObservation> out;
    for (const auto& o : data.observations) {
      if (o.pass_id == id) out.push_back(o);
    }
    return out;
  }
};

}  // namespace fixtures

#endif  // LUNARDOP_TESTS_FIXTURES_HPP
