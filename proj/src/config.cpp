#include "lunardop/config.hpp"

#include <cmath>
#include <functional>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "lunardop/io.hpp"

namespace lunardop {

namespace {

using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

using Handler = std::function<void(const Json&, const std::string&)>;

void visit(const Json& object, const std::string& path, const std::map<std::string, Handler>& handlers) {
  if (!object.is_object()) throw ConfigError(fmt::format("{}: expected an object", path));
  for (const auto& [key, value] : object.items()) {
    const auto it = handlers.find(key);
    const std::string where = path.empty() ? key : path + "." + key;
    if (it == handlers.end()) throw ConfigError(fmt::format("unknown key '{}'", where));
    it->second(value, where);
  }
}

Handler number(double& target, double lo, double hi) {
  return [&target, lo, hi](const Json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", where));
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi) {
      throw ConfigError(fmt::format("{}: {} outside [{}, {}]", where, x, lo, hi));
    }
    target = x;
  };
}

Handler degrees(double& target_rad, double lo, double hi) {
  return [&target_rad, lo, hi](const Json& v, const std::string& where) {
    double deg = 0.0;
    number(deg, lo, hi)(v, where);
    target_rad = deg * kDegToRad;
  };
}

template <class Int>
Handler integer(Int& target, long long lo, long long hi) {
  return [&target, lo, hi](const Json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", where));
    const long long x = v.get<long long>();
    if (x < lo || x > hi) throw ConfigError(fmt::format("{}: {} outside [{}, {}]", where, x, lo, hi));
    target = static_cast<Int>(x);
  };
}

Handler boolean(bool& target) {
  return [&target](const Json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", where));
    target = v.get<bool>();
  };
}

Handler object(const std::map<std::string, Handler>& handlers) {
  return [handlers](const Json& v, const std::string& where) { visit(v, where, handlers); };
}

}  // namespace

ScenarioConfig parse_config(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  ScenarioConfig cfg;
  Scenario& s = cfg.scenario;
  ErrorBudgetConfig& b = s.budget;
  SolverConfig& sol = s.solver;
  ReceiverDistribution::Fixed fixed;
  bool has_fixed = false;

  const std::map<std::string, Handler> top{
      {"seed",
       [&](const Json& v, const std::string& where) {
         if (!v.is_number_unsigned()) throw ConfigError(fmt::format("{}: expected a non-negative integer", where));
         s.seed = v.get<std::uint64_t>();
       }},
      {"trials", integer(s.n_trials, 1, 1000000)},
      {"passes", integer(s.n_passes, 1, 1000)},
      {"checkpoints",
       [&](const Json& v, const std::string& where) {
         if (!v.is_array()) throw ConfigError(fmt::format("{}: expected an array", where));
         s.checkpoints.clear();
         for (const auto& e : v) {
           int c = 0;
           integer(c, 1, 1000)(e, where);
           s.checkpoints.push_back(c);
         }
       }},
      {"ephemeris",
       [&](const Json& v, const std::string& where) {
         try {
           s.ephemeris = parse_ephemeris_kind(v.is_string() ? v.get<std::string>() : v.dump());
         } catch (const std::exception& e) {
           throw ConfigError(fmt::format("{}: {}", where, e.what()));
         }
       }},
      {"randomize_anomaly", boolean(s.randomize_anomaly)},
      {"sample_interval_s", number(s.sample_interval, 1e-3, 10.0)},
      {"min_pass_samples", integer(s.min_pass_samples, 12, 100000)},
      {"fit_margin_s", number(s.fit_margin_s, 0.0, 3600.0)},
      {"threads", integer(s.threads, 0, 1024)},
      {"mask_deg", degrees(b.mask, 0.0, 89.0)},
      {"output_dir",
       [&](const Json& v, const std::string& where) {
         if (!v.is_string() || v.get<std::string>().empty()) {
           throw ConfigError(fmt::format("{}: expected a non-empty string", where));
         }
         cfg.output_dir = v.get<std::string>();
       }},
      {"receiver",
       object({{"lat_min_deg", number(s.receiver.lat_min_deg, -90.0, 90.0)},
               {"lat_max_deg", number(s.receiver.lat_max_deg, -90.0, 90.0)},
               {"alt_min_km", number(s.receiver.alt_min_km, -50.0, 50.0)},
               {"alt_max_km", number(s.receiver.alt_max_km, -50.0, 50.0)},
               {"fixed", [&](const Json& v, const std::string& where) {
                  has_fixed = true;
                  visit(v, where,
                        {{"lat_deg", number(fixed.lat_deg, -90.0, 90.0)},
                         {"lon_deg", number(fixed.lon_deg, -360.0, 360.0)},
                         {"alt_km", number(fixed.alt_km, -50.0, 50.0)}});
                }}})},
      {"errors",
       object({{"ephemeris", boolean(b.switches.ephemeris)},
               {"satellite_clock", boolean(b.switches.satellite_clock)},
               {"receiver_clock", boolean(b.switches.receiver_clock)},
               {"carrier_tracking", boolean(b.switches.carrier_tracking)}})},
      {"constants",
       object({{"speed_of_light_kmps", number(s.constants.speed_of_light, 1.0, 1e6)},
               {"moon_radius_km", number(s.constants.moon_radius, 100.0, 10000.0)},
               {"carrier_frequency_hz", number(s.constants.carrier_frequency, 1e6, 1e11)},
               {"mu_km3ps2", number(s.constants.mu, 1.0, 1e7)},
               {"sidereal_month_days", number(s.constants.sidereal_month_days, 1.0, 100.0)}})},
      {"orbit",
       object({{"semi_major_axis_km", number(s.orbit.semi_major_axis, 100.0, 100000.0)},
               {"eccentricity", number(s.orbit.eccentricity, 0.0, 0.99)},
               {"inclination_deg", degrees(s.orbit.inclination, 0.0, 180.0)},
               {"arg_perilune_deg", degrees(s.orbit.arg_perilune, 0.0, 360.0)},
               {"raan_deg", degrees(s.orbit.raan, 0.0, 360.0)},
               {"mean_anomaly_deg", degrees(s.orbit.mean_anomaly, 0.0, 360.0)}})},
      {"link",
       object({{"receiver_gain_db", number(b.link.receiver_gain_db, -50.0, 100.0)},
               {"system_temperature_k", number(b.link.system_temperature_k, 1.0, 10000.0)},
               {"lna_noise_figure_db", number(b.link.lna_noise_figure_db, 0.0, 30.0)},
               {"pll_bandwidth_hz", number(b.link.pll_bandwidth_hz, 0.01, 1000.0)},
               {"coherent_time_s", number(b.link.coherent_time_s, 1e-4, 10.0)},
               {"eirp_dbw", number(b.link.eirp_dbw, -50.0, 100.0)}})},
      {"clocks",
       object({{"satellite_frac_stability", number(b.clocks.satellite_frac_stability, 0.0, 1e-6)},
               {"receiver_h0", number(b.clocks.receiver_h0, 0.0, 1e-10)},
               {"receiver_h_minus1", number(b.clocks.receiver_h_minus1, 0.0, 1e-10)},
               {"receiver_h_minus2", number(b.clocks.receiver_h_minus2, 0.0, 1e-10)},
               {"sample_time_s", number(b.clocks.sample_time, 1e-3, 100.0)}})},
      {"solver",
       object({{"step2_threshold_km", number(sol.step2_threshold, 1e-9, 100.0)},
               {"step3_threshold_km", number(sol.step3_threshold, 1e-12, 100.0)},
               {"max_iterations", integer(sol.max_iterations, 1, 100000)},
               {"armijo_alpha", number(sol.armijo.alpha, 1e-6, 0.999)},
               {"armijo_epsilon0", number(sol.armijo.epsilon0, 1e-6, 100.0)},
               {"armijo_beta", number(sol.armijo.beta, 0.01, 0.99)},
               {"sls_alpha_max", number(sol.sls.alpha_max, 1.0, 1000.0)},
               {"sls_k_max", integer(sol.sls.k_max, 1, 100000)},
               {"sls_beta_curvature", number(sol.sls.beta_curvature, 0.01, 0.999)},
               {"step1_slice", integer(sol.step1_slice, 3, 100000)},
               {"stencil_step_s", number(sol.stencil_step, 1e-4, 10.0)}})},
  };
  visit(doc, "", top);
  if (has_fixed) s.receiver.fixed = fixed;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string scenario_to_json(const Scenario& s) {
  const ErrorBudgetConfig& b = s.budget;
  OJson j;
  j["seed"] = s.seed;
  j["trials"] = s.n_trials;
  j["passes"] = s.n_passes;
  j["checkpoints"] = s.resolved_checkpoints();
  j["ephemeris"] = to_string(s.ephemeris);
  j["randomize_anomaly"] = s.randomize_anomaly;
  j["sample_interval_s"] = s.sample_interval;
  j["min_pass_samples"] = s.min_pass_samples;
  j["fit_margin_s"] = s.fit_margin_s;
  j["mask_deg"] = b.mask * kRadToDeg;
  j["receiver"] = {{"lat_min_deg", s.receiver.lat_min_deg},
                   {"lat_max_deg", s.receiver.lat_max_deg},
                   {"alt_min_km", s.receiver.alt_min_km},
                   {"alt_max_km", s.receiver.alt_max_km}};
  if (s.receiver.fixed) {
    j["receiver"]["fixed"] = {{"lat_deg", s.receiver.fixed->lat_deg},
                              {"lon_deg", s.receiver.fixed->lon_deg},
                              {"alt_km", s.receiver.fixed->alt_km}};
  }
  j["errors"] = {{"ephemeris", b.switches.ephemeris},
                 {"satellite_clock", b.switches.satellite_clock},
                 {"receiver_clock", b.switches.receiver_clock},
                 {"carrier_tracking", b.switches.carrier_tracking}};
  j["constants"] = {{"speed_of_light_kmps", s.constants.speed_of_light},
                    {"moon_radius_km", s.constants.moon_radius},
                    {"carrier_frequency_hz", s.constants.carrier_frequency},
                    {"mu_km3ps2", s.constants.mu},
                    {"sidereal_month_days", s.constants.sidereal_month_days}};
  j["orbit"] = {{"semi_major_axis_km", s.orbit.semi_major_axis},
                {"eccentricity", s.orbit.eccentricity},
                {"inclination_deg", s.orbit.inclination * kRadToDeg},
                {"arg_perilune_deg", s.orbit.arg_perilune * kRadToDeg},
                {"raan_deg", s.orbit.raan * kRadToDeg},
                {"mean_anomaly_deg", s.orbit.mean_anomaly * kRadToDeg}};
  j["link"] = {{"receiver_gain_db", b.link.receiver_gain_db},
               {"system_temperature_k", b.link.system_temperature_k},
               {"lna_noise_figure_db", b.link.lna_noise_figure_db},
               {"pll_bandwidth_hz", b.link.pll_bandwidth_hz},
               {"coherent_time_s", b.link.coherent_time_s},
               {"eirp_dbw", b.link.eirp_dbw}};
  j["clocks"] = {{"satellite_frac_stability", b.clocks.satellite_frac_stability},
                 {"receiver_h0", b.clocks.receiver_h0},
                 {"receiver_h_minus1", b.clocks.receiver_h_minus1},
                 {"receiver_h_minus2", b.clocks.receiver_h_minus2},
                 {"sample_time_s", b.clocks.sample_time}};
  const SolverConfig& sol = s.solver;
  j["solver"] = {{"step2_threshold_km", sol.step2_threshold},
                 {"step3_threshold_km", sol.step3_threshold},
                 {"max_iterations", sol.max_iterations},
                 {"armijo_alpha", sol.armijo.alpha},
                 {"armijo_epsilon0", sol.armijo.epsilon0},
                 {"armijo_beta", sol.armijo.beta},
                 {"sls_alpha_max", sol.sls.alpha_max},
                 {"sls_k_max", sol.sls.k_max},
                 {"sls_beta_curvature", sol.sls.beta_curvature},
                 {"step1_slice", sol.step1_slice},
                 {"stencil_step_s", sol.stencil_step}};
  return j.dump();
}

std::string scenario_hash(const Scenario& scenario) { return fnv1a_hex(scenario_to_json(scenario)); }

}  // namespace lunardop
