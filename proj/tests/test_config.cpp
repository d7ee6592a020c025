#include <doctest.h>

#include "lunardop/config.hpp"

using namespace lunardop;

TEST_CASE("empty document gives the defaults") {
  const auto c = parse_config("{}");
  CHECK(c.output_dir == "out");
  CHECK(c.scenario.n_trials == 100);
  CHECK(c.scenario.ephemeris == EphemerisKind::Method1);
  CHECK(scenario_hash(c.scenario) == scenario_hash(Scenario{}));
}

TEST_CASE("values are read with units converted") {
  const auto c = parse_config(R"({
    "seed": 77, "trials": 12, "passes": 3, "checkpoints": [1, 2],
    "ephemeris": "2", "mask_deg": 10, "output_dir": "runs/a",
    "receiver": {"fixed": {"lat_deg": 88, "lon_deg": 15, "alt_km": -2}},
    "errors": {"carrier_tracking": false},
    "orbit": {"inclination_deg": 85},
    "solver": {"max_iterations": 40}
  })");
  const Scenario& s = c.scenario;
  CHECK(s.seed == 77);
  CHECK(s.n_trials == 12);
  CHECK(s.resolved_checkpoints() == std::vector<int>{1, 2, 3});
  CHECK(s.ephemeris == EphemerisKind::Method2);
  CHECK(s.budget.mask == doctest::Approx(10.0 * kDegToRad));
  CHECK(s.orbit.inclination == doctest::Approx(85.0 * kDegToRad));
  REQUIRE(s.receiver.fixed.has_value());
  CHECK(s.receiver.fixed->alt_km == -2.0);
  CHECK_FALSE(s.budget.switches.carrier_tracking);
  CHECK(s.budget.switches.ephemeris);
  CHECK(s.solver.max_iterations == 40);
  CHECK(c.output_dir == "runs/a");
}

TEST_CASE("invalid documents are rejected") {
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config("[]"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"trails": 5})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"receiver": {"lat": 5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"trials": "many"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"trials": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"passes": -1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"ephemeris": "3"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"receiver": {"lat_min_deg": 95}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"orbit": {"eccentricity": 1.2}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"constants": {"speed_of_light_kmps": 0}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("scenario hash tracks result-relevant fields only") {
  Scenario a;
  Scenario b = a;
  b.threads = 7;
  CHECK(scenario_hash(a) == scenario_hash(b));
  b.seed = 2;
  CHECK(scenario_hash(a) != scenario_hash(b));
  b = a;
  b.budget.link.eirp_dbw = 1.0;
  CHECK(scenario_hash(a) != scenario_hash(b));
  CHECK(scenario_hash(a).size() == 16);
}

TEST_CASE("canonical scenario JSON parses back to the same scenario") {
  Scenario s;
  s.seed = 5;
  s.n_passes = 4;
  s.checkpoints = {2};
  s.receiver.fixed = ReceiverDistribution::Fixed{80.0, 33.0, 0.5};
  s.budget.switches.satellite_clock = false;
  const std::string once = scenario_to_json(parse_config(scenario_to_json(s)).scenario);
  CHECK(scenario_to_json(parse_config(once).scenario) == once);
  const Scenario back = parse_config(scenario_to_json(s)).scenario;
  CHECK(back.seed == 5);
  CHECK(back.resolved_checkpoints() == s.resolved_checkpoints());
  CHECK_FALSE(back.budget.switches.satellite_clock);
  REQUIRE(back.receiver.fixed.has_value());
  CHECK(back.receiver.fixed->lon_deg == 33.0);
}
