#include "lunardop/measurement.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "lunardop/io.hpp"

namespace lunardop {

namespace {

constexpr char kObservationSchema[] = "# schema: lunardop-observations/1";
constexpr double kMaxRelativeSpeed = 3.0;  // km/s, sanity bound on |D|

}  // namespace

LightTimeSolution solve_light_time(const Vec3& receiver, double t_R, const Trajectory& eph,
                                   const LunarConstants& constants, const ClockBiases& clocks) {
  const double c = constants.speed_of_light;
  const double w = constants.rotation_rate();
  LightTimeSolution sol;
  double delay = 0.0;
  for (int iter = 1; iter <= 10; ++iter) {
    const Vec3 rs = eph.position(t_R - clocks.receiver - delay);
    const Vec3 rotated = rotation_z(w * delay) * rs;
    const Vec3 diff = receiver - rotated;
    const double range = diff.norm();
    const double next = range / c;
    const double change = std::abs(next - delay);
    sol = LightTimeSolution{next, rs, rotated, diff, range, iter};
    delay = next;
    if (change < 1e-12) return sol;
  }
  throw std::runtime_error("light-time iteration did not converge");
}

double propagation_delay(const Vec3& receiver, double t_R, const Trajectory& eph,
                         const LunarConstants& constants, const ClockBiases& clocks) {
  return solve_light_time(receiver, t_R, eph, constants, clocks).delay;
}

double accumulated_delta_range(const Vec3& receiver, double t_R, const Trajectory& eph,
                               const LunarConstants& constants, const ClockBiases& clocks) {
  const LightTimeSolution sol = solve_light_time(receiver, t_R, eph, constants, clocks);
  return sol.range + constants.speed_of_light * (clocks.receiver - clocks.satellite);
}

double adr_rate(const Vec3& receiver, double t_R, const Trajectory& eph,
                const LunarConstants& constants, const ClockBiases& clocks, double step) {
  return five_point_derivative(
      [&](double t) { return accumulated_delta_range(receiver, t, eph, constants, clocks); }, t_R,
      step);
}

double geometric_range_rate(const Vec3& receiver, double t_R, const Trajectory& eph,
                            const LunarConstants& constants) {
  const LightTimeSolution sol = solve_light_time(receiver, t_R, eph, constants);
  const double w = constants.rotation_rate();
  const StateVector sat = eph.state(t_R - sol.delay);
  const Vec3 los = sol.receiver_from_sat / sol.range;
  const Vec3 v_rot = rotation_z(w * sol.delay) * sat.velocity;
  // g(t) = r - A(w tau) r_s(t - tau); dg/dtau below, and tau' = rho'/c.
  const Vec3 g_tau = v_rot - w * (rotation_z_derivative(w * sol.delay) * sat.position);
  return -los.dot(v_rot) / (1.0 - los.dot(g_tau) / constants.speed_of_light);
}

void LinkBudgetParams::validate() const {
  if (!(system_temperature_k > 0.0) || !(pll_bandwidth_hz > 0.0) || !(coherent_time_s > 0.0) ||
      !(lna_noise_figure_db >= 0.0)) {
    throw std::invalid_argument("link budget: temperature, bandwidth and integration time must be positive");
  }
}

double cn0(const LinkBudgetParams& link, double range, const LunarConstants& constants) {
  if (!(range > 0.0)) throw std::invalid_argument("slant range must be positive");
  const double path_loss =
      20.0 * std::log10(4.0 * kPi * constants.carrier_frequency * range / constants.speed_of_light);
  const double received = link.eirp_dbw - path_loss;
  const double t_eq = 10.0 * std::log10(link.system_temperature_k +
                                        290.0 * (std::pow(10.0, link.lna_noise_figure_db / 10.0) - 1.0));
  const double g_over_t = link.receiver_gain_db - t_eq;
  return received + g_over_t - link.boltzmann_dbw;
}

double sigma_meas(const LinkBudgetParams& link, double cn0_dbhz, const LunarConstants& constants) {
  const double ratio = std::pow(10.0, cn0_dbhz / 10.0);
  const double t = link.coherent_time_s;
  return constants.speed_of_light / (2.0 * kPi * constants.carrier_frequency * t) *
         std::sqrt(link.pll_bandwidth_hz / ratio) * (1.0 + 1.0 / (2.0 * t * ratio));
}

void ClockModel::validate() const {
  if (!(satellite_frac_stability > 0.0) || !(receiver_h0 > 0.0) || !(receiver_h_minus1 > 0.0) ||
      !(receiver_h_minus2 > 0.0) || !(sample_time > 0.0)) {
    throw std::invalid_argument("clock model coefficients must be positive");
  }
}

double ClockModel::receiver_frac_stability() const {
  return std::sqrt(receiver_h0 / (2.0 * sample_time) + 4.0 * receiver_h_minus1 +
                   4.0 / 3.0 * kPi * kPi * sample_time * receiver_h_minus2);
}

double ClockModel::sigma_satellite(const LunarConstants& constants) const {
  return constants.speed_of_light * satellite_frac_stability;
}

double ClockModel::sigma_receiver(const LunarConstants& constants) const {
  return constants.speed_of_light * receiver_frac_stability();
}

double sigma_tot(const ErrorComponents& e) {
  if (e.velocity < 0.0 || e.satellite_clock < 0.0 || e.receiver_clock < 0.0 || e.measurement < 0.0) {
    throw std::invalid_argument("error components must be non-negative");
  }
  return std::sqrt(e.velocity * e.velocity + e.satellite_clock * e.satellite_clock +
                   e.receiver_clock * e.receiver_clock + e.measurement * e.measurement);
}

ErrorComponents ErrorBudgetConfig::components(double range, const LunarConstants& constants) const {
  ErrorComponents e;
  e.velocity = velocity_sigma;
  e.satellite_clock = clocks.sigma_satellite(constants);
  e.receiver_clock = clocks.sigma_receiver(constants);
  e.measurement = sigma_meas(link, cn0(link, range, constants), constants);
  return e;
}

DopplerObservation synthesize_doppler(const Vec3& receiver, double t_R, const Trajectory& truth,
                                      const ClockDrift& drift, const ErrorBudgetConfig& budget,
                                      const LunarConstants& constants, Rng& rng, int pass_id) {
  if (!(elevation_angle(receiver, truth.position(t_R)) > budget.mask)) {
    throw std::invalid_argument(fmt::format("satellite below the mask at t = {}", t_R));
  }
  const double c = constants.speed_of_light;
  const double lambda = constants.wavelength();
  const double rate = geometric_range_rate(receiver, t_R, truth, constants);
  const double range = solve_light_time(receiver, t_R, truth, constants).range;

  DopplerObservation obs;
  obs.t_R = t_R;
  obs.pass_id = pass_id;
  obs.cn0 = cn0(budget.link, range, constants);
  const ErrorComponents comp = budget.components(range, constants);
  obs.sigma_tot = sigma_tot(comp);

  double measured_rate = rate + c * (drift.receiver - drift.satellite);
  if (budget.switches.carrier_tracking) {
    std::normal_distribution<double> tracking(0.0, comp.measurement);
    measured_rate += tracking(rng);
  }
  obs.doppler = -measured_rate / lambda;
  return obs;
}

std::vector<DopplerObservation> synthesize_pass(const Vec3& receiver, std::span<const double> times,
                                                const Trajectory& truth,
                                                const ErrorBudgetConfig& budget,
                                                const LunarConstants& constants, Rng& rng,
                                                int pass_id) {
  std::normal_distribution<double> rec(0.0, budget.clocks.receiver_frac_stability());
  std::normal_distribution<double> sat(0.0, budget.clocks.satellite_frac_stability);
  std::vector<DopplerObservation> out;
  out.reserve(times.size());
  for (const double t : times) {
    ClockDrift drift;
    if (budget.switches.receiver_clock) drift.receiver = rec(rng);
    if (budget.switches.satellite_clock) drift.satellite = sat(rng);
    out.push_back(synthesize_doppler(receiver, t, truth, drift, budget, constants, rng, pass_id));
  }
  return out;
}

void write_observations_csv(std::ostream& out, std::span<const DopplerObservation> obs) {
  out << kObservationSchema << '\n' << "t_R,D_Hz,cn0_dBHz,sigma_tot_kmps,pass_id\n";
  for (const auto& o : obs) {
    out << fmt::format("{},{},{},{},{}\n", format_double(o.t_R), format_double(o.doppler),
                       format_double(o.cn0), format_double(o.sigma_tot), o.pass_id);
  }
}

std::vector<DopplerObservation> read_observations_csv(std::istream& in) {
  std::vector<DopplerObservation> obs;
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("t_R", 0) == 0) continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 5) {
      throw ParseError(fmt::format("row {}: expected 5 columns, got {}", row, f.size()), row);
    }
    DopplerObservation o;
    o.t_R = parse_double(f[0], row);
    o.doppler = parse_double(f[1], row);
    o.cn0 = parse_double(f[2], row);
    o.sigma_tot = parse_double(f[3], row);
    o.pass_id = static_cast<int>(parse_long(f[4], row));
    if (!(o.sigma_tot > 0.0)) {
      throw ParseError(fmt::format("row {}: sigma_tot must be positive", row), row);
    }
    if (!std::isfinite(o.doppler) || std::abs(o.doppler) > kMaxRelativeSpeed * 2050e6 / 299792.458) {
      throw ParseError(fmt::format("row {}: Doppler {} Hz out of range", row, o.doppler), row);
    }
    obs.push_back(o);
  }
  return obs;
}

}  // namespace lunardop
