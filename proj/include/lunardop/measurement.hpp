#ifndef LUNARDOP_MEASUREMENT_HPP
#define LUNARDOP_MEASUREMENT_HPP

#include <iosfwd>
#include <span>
#include <vector>

#include "lunardop/orbit.hpp"
#include "lunardop/random.hpp"

namespace lunardop {

/// Clock biases in seconds; receiver minus satellite enters the range.
struct ClockBiases {
  double receiver = 0.0;
  double satellite = 0.0;
};

/// Light-time corrected geometry for one reception time.
struct LightTimeSolution {
  double delay = 0.0;             // s
  Vec3 sat_position;              // r_s(t_R - dr - delay), Moon-fixed at transmit
  Vec3 sat_rotated;               // A(w delay) r_s, Moon-fixed at reception
  Vec3 receiver_from_sat;         // r - A(w delay) r_s
  double range = 0.0;             // km
  int iterations = 0;
};

/// Fixed point delay = |r - A(w delay) r_s(t_R - dr - delay)| / c, started
/// at zero and iterated until the update drops below 1e-12 s. Throws
/// std::runtime_error after 10 iterations without convergence.
LightTimeSolution solve_light_time(const Vec3& receiver, double t_R, const Trajectory& eph,
                                   const LunarConstants& constants, const ClockBiases& clocks = {});

double propagation_delay(const Vec3& receiver, double t_R, const Trajectory& eph,
                         const LunarConstants& constants, const ClockBiases& clocks = {});

/// Modelled accumulated delta range |r_sr| + c (dr - ds), km.
double accumulated_delta_range(const Vec3& receiver, double t_R, const Trajectory& eph,
                               const LunarConstants& constants, const ClockBiases& clocks = {});

inline constexpr double kStencilStep = 0.1;  // s

/// Five-point central difference of f at t with spacing h.
template <class F>
double five_point_derivative(F&& f, double t, double h) {
  return (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h);
}

/// Time derivative of the accumulated delta range by the five-point stencil.
double adr_rate(const Vec3& receiver, double t_R, const Trajectory& eph,
                const LunarConstants& constants, const ClockBiases& clocks = {},
                double step = kStencilStep);

/// Exact geometric range rate d|r_sr|/dt_R including light time and frame
/// rotation, from the trajectory's position and velocity.
double geometric_range_rate(const Vec3& receiver, double t_R, const Trajectory& eph,
                            const LunarConstants& constants);

struct LinkBudgetParams {
  double receiver_gain_db = 22.0;
  double system_temperature_k = 113.0;
  double lna_noise_figure_db = 1.0;
  double pll_bandwidth_hz = 10.0;
  double coherent_time_s = 0.02;
  double eirp_dbw = 0.0;
  double boltzmann_dbw = -228.6;  // dBW/(K Hz)

  void validate() const;
};

/// Carrier-to-noise density (dB-Hz) at slant range `range` km.
double cn0(const LinkBudgetParams& link, double range, const LunarConstants& constants);

/// Carrier-tracking range-rate noise (km/s) at the given C/N0 (dB-Hz).
double sigma_meas(const LinkBudgetParams& link, double cn0_dbhz, const LunarConstants& constants);

struct ClockModel {
  double satellite_frac_stability = 2e-13;  // s/s
  double receiver_h0 = 1.3e-22;
  double receiver_h_minus1 = 2.3e-26;
  double receiver_h_minus2 = 3.3e-31;
  double sample_time = 1.0;  // s

  void validate() const;
  /// Receiver fractional-frequency deviation from the power-law coefficients.
  double receiver_frac_stability() const;
  double sigma_satellite(const LunarConstants& constants) const;  // km/s
  double sigma_receiver(const LunarConstants& constants) const;   // km/s
};

/// Per-sample error components, km/s.
struct ErrorComponents {
  double velocity = 0.0;
  double satellite_clock = 0.0;
  double receiver_clock = 0.0;
  double measurement = 0.0;
};

/// Root-sum-square of the components. Throws std::invalid_argument on a
/// negative component.
double sigma_tot(const ErrorComponents& components);

/// Which error sources are injected into the simulated data.
struct ErrorSwitches {
  bool ephemeris = true;
  bool satellite_clock = true;
  bool receiver_clock = true;
  bool carrier_tracking = true;

  static ErrorSwitches all_off() { return {false, false, false, false}; }
  bool any() const { return ephemeris || satellite_clock || receiver_clock || carrier_tracking; }
};

struct ErrorBudgetConfig {
  ErrorSwitches switches;
  ClockModel clocks;
  LinkBudgetParams link;
  double velocity_sigma = 0.0;      // km/s, ephemeris velocity error of the receiver model
  double mask = 5.0 * kDegToRad;    // rad

  /// Error components the receiver assigns to a sample at slant range `range`.
  ErrorComponents components(double range, const LunarConstants& constants) const;
};

/// One carrier Doppler measurement. doppler in Hz, cn0 in dB-Hz, sigma_tot in km/s.
struct DopplerObservation {
  double t_R = 0.0;
  double doppler = 0.0;
  double cn0 = 0.0;
  double sigma_tot = 0.0;
  int pass_id = 0;
};

/// Fractional-frequency clock errors at one sample (s/s).
struct ClockDrift {
  double receiver = 0.0;
  double satellite = 0.0;
};

/// Noisy Doppler from the true geometry. The deterministic part is
/// -(range rate + c (y_R - y_S)) / lambda0; carrier tracking noise is drawn
/// from `rng` when enabled. Throws std::invalid_argument if the satellite is
/// at or below the mask.
DopplerObservation synthesize_doppler(const Vec3& receiver, double t_R, const Trajectory& truth,
                                      const ClockDrift& drift, const ErrorBudgetConfig& budget,
                                      const LunarConstants& constants, Rng& rng, int pass_id = 0);

/// Observations at each time in `times`, with clock drift realizations drawn
/// per sample for the enabled clock sources.
std::vector<DopplerObservation> synthesize_pass(const Vec3& receiver, std::span<const double> times,
                                                const Trajectory& truth,
                                                const ErrorBudgetConfig& budget,
                                                const LunarConstants& constants, Rng& rng,
                                                int pass_id = 0);

/// CSV `t_R,D_Hz,cn0_dBHz,sigma_tot_kmps,pass_id` after a schema comment line.
void write_observations_csv(std::ostream& out, std::span<const DopplerObservation> obs);
/// Throws ParseError naming the offending line.
std::vector<DopplerObservation> read_observations_csv(std::istream& in);

}  // namespace lunardop

#endif  // LUNARDOP_MEASUREMENT_HPP
