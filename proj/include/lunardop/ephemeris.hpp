#ifndef LUNARDOP_EPHEMERIS_HPP
#define LUNARDOP_EPHEMERIS_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lunardop/orbit.hpp"

namespace lunardop {

enum class EphemerisKind { Perfect, Method1, Method2 };

std::string to_string(EphemerisKind kind);
/// Accepts "1", "2", "perfect" (and "method1", "method2").
EphemerisKind parse_ephemeris_kind(std::string_view text);

/// Along-track / cross-track / radial triple, metres.
struct AxisTriple {
  double along = 0.0;
  double cross = 0.0;
  double radial = 0.0;
};

/// Receiver-side ephemeris error model.
struct EphemerisMethod {
  EphemerisKind kind = EphemerisKind::Perfect;
  // Method 1: orbit-determination and prediction error statistics (rms, std).
  AxisTriple observed_rms{5.29, 4.05, 0.27};
  AxisTriple observed_std{1.11, 1.03, 0.06};
  AxisTriple predicted_rms{49.14, 9.28, 1.87};
  AxisTriple predicted_std{32.39, 9.27, 1.61};
  double method1_velocity_std = 60.0;  // mm/s, Chebyshev-derivative velocity error
  // Method 2: requirement-scaled white error.
  double method2_position_std = 4.48 / 24.66 * 51.29;  // m, total 3D
  double method2_velocity_std = 0.4 / 10.1 * 45.8;     // mm/s

  static EphemerisMethod perfect();
  static EphemerisMethod method1();
  static EphemerisMethod method2();
  static EphemerisMethod of(EphemerisKind kind);

  /// Root-sum-square of observed and predicted std per axis (m).
  AxisTriple combined_std() const;
  /// Root-sum-square of observed and predicted rms per axis (m).
  AxisTriple combined_rms() const;
  /// Magnitude of the constant offset that lifts combined_std to combined_rms (m).
  double bias_magnitude() const;
  /// Velocity error std used in the measurement error budget, km/s.
  double velocity_sigma() const;
};

/// Second-order IIR shaping filter y = H(z) x for colored ephemeris noise.
struct ColoredNoiseFilter {
  std::array<double, 3> numerator{1.0, 0.0, -1.0};
  std::array<double, 3> denominator{1.0, -1.9999, 0.9999};

  std::vector<double> apply(std::span<const double> input) const;
};

inline constexpr std::size_t kColoredNoiseWarmup = 10000;

/// Filtered unit white noise, warm-up discarded, de-meaned and scaled so the
/// population standard deviation equals target_std. Throws
/// std::invalid_argument if n < 2 or target_std <= 0.
std::vector<double> colored_noise(std::size_t n, double target_std, std::uint64_t seed);

/// Noise realizations for Method 1 span at least this many samples so the
/// normalisation sees the filter's long correlation time.
inline constexpr std::size_t kColoredNoiseSpan = 86400;

/// Predicted orbit = truth + ephemeris error per `method`. Positions change;
/// velocities are replaced by the derivative of the corrupted positions.
SatelliteStateSeries corrupt_orbit(const SatelliteStateSeries& truth,
                                   const EphemerisMethod& method, std::uint64_t seed);

inline constexpr int kChebyshevOrder = 10;
inline constexpr double kExtrapolationTolerance = 5.0;  // s

/// Per-pass Chebyshev position model, the broadcast ephemeris message.
class ChebyshevEphemeris {
 public:
  using Coefficients = std::array<std::array<double, kChebyshevOrder + 1>, 3>;

  ChebyshevEphemeris(double t_start, double t_end, const Coefficients& coeffs, int pass_id = 0);

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  int pass_id() const { return pass_id_; }
  const Coefficients& coefficients() const { return coeffs_; }
  bool covers(double t) const;

  /// Throws std::out_of_range when t is more than kExtrapolationTolerance
  /// outside the window.
  Vec3 position(double t) const;
  StateVector state(double t) const;

  /// RMS 3D fit residual over the fitted samples (km); 0 if not fitted here.
  double residual_rms = 0.0;

 private:
  double mapped(double t) const;

  double t_start_;
  double t_end_;
  Coefficients coeffs_;
  Coefficients deriv_;
  int pass_id_;
};

/// Least-squares order-10 fit per axis over the series time span. Throws
/// std::invalid_argument with fewer than 12 samples or 11 distinct times.
ChebyshevEphemeris fit_chebyshev(const SatelliteStateSeries& samples, int pass_id = 0);

/// Collection of per-pass segments; resolves any time to its segment.
class BroadcastEphemeris final : public Trajectory {
 public:
  BroadcastEphemeris() = default;
  explicit BroadcastEphemeris(std::vector<ChebyshevEphemeris> segments);

  void add(ChebyshevEphemeris segment);
  const std::vector<ChebyshevEphemeris>& segments() const { return segments_; }
  const ChebyshevEphemeris& segment_at(double t) const;

  StateVector state(double t) const override;
  Vec3 position(double t) const override;

 private:
  std::vector<ChebyshevEphemeris> segments_;
};

/// JSON message {schema, segments: [{pass_id, t_start, t_end, coeffs[3][11]}]}.
std::string ephemeris_to_json(const BroadcastEphemeris& eph);
BroadcastEphemeris ephemeris_from_json(std::string_view text);

}  // namespace lunardop

#endif  // LUNARDOP_EPHEMERIS_HPP
