#ifndef LUNARDOP_ORBIT_HPP
#define LUNARDOP_ORBIT_HPP

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "lunardop/frames.hpp"

namespace lunardop {

struct StateVector {
  Vec3 position = Vec3::Zero();  // km
  Vec3 velocity = Vec3::Zero();  // km/s
};

/// Classical elements of the two-body orbit about the Moon. Angles in rad.
struct KeplerianElements {
  double semi_major_axis = 1860.52;  // km
  double eccentricity = 0.0359457;
  double inclination = 90.0 * kDegToRad;
  double arg_perilune = 270.0 * kDegToRad;
  double raan = 0.0;
  double mean_anomaly = 180.0 * kDegToRad;  // at t = 0

  void validate(const LunarConstants& constants) const;
};

double orbital_period(const KeplerianElements& elements, const LunarConstants& constants);

/// Solves M = E - e sin E by Newton iteration (tolerance 1e-12 rad, at most
/// 50 iterations). Throws std::runtime_error if it fails to converge.
double solve_kepler(double mean_anomaly, double eccentricity);

/// Two-body state in the Moon-centred inertial frame that coincides with the
/// Moon-fixed frame at t = 0.
StateVector propagate_inertial(const KeplerianElements& elements, double t,
                               const LunarConstants& constants);

/// Two-body state expressed in the Moon-fixed frame.
StateVector propagate(const KeplerianElements& elements, double t,
                      const LunarConstants& constants);

/// A satellite trajectory in the Moon-fixed frame, queryable at any time.
class Trajectory {
 public:
  virtual ~Trajectory() = default;
  virtual StateVector state(double t) const = 0;
  virtual Vec3 position(double t) const { return state(t).position; }
};

class KeplerTrajectory final : public Trajectory {
 public:
  KeplerTrajectory(KeplerianElements elements, LunarConstants constants);
  StateVector state(double t) const override;
  const KeplerianElements& elements() const { return elements_; }

 private:
  KeplerianElements elements_;
  LunarConstants constants_;
};

/// Time-tagged satellite states, strictly increasing in time.
struct SatelliteStateSeries {
  std::vector<double> times;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  /// Throws std::invalid_argument on length mismatch or non-increasing times.
  void validate() const;
  /// Samples [first, last).
  SatelliteStateSeries slice(std::size_t first, std::size_t last) const;
};

/// Samples `trajectory` on t0, t0 + step, ... while t <= t1.
SatelliteStateSeries sample_trajectory(const Trajectory& trajectory, double t0, double t1,
                                       double step = 1.0);

/// Cubic Hermite interpolation of a state series. Used when the truth orbit
/// comes from an external propagator rather than from KeplerTrajectory.
class SeriesTrajectory final : public Trajectory {
 public:
  explicit SeriesTrajectory(SatelliteStateSeries series);
  StateVector state(double t) const override;
  const SatelliteStateSeries& series() const { return series_; }

 private:
  SatelliteStateSeries series_;
};

/// Elevation (rad) of `satellite` seen from `receiver` on a spherical Moon.
double elevation_angle(const Vec3& receiver, const Vec3& satellite);

/// Visibility window as an index range [first, last) into a series.
struct PassWindow {
  double start = 0.0;
  double end = 0.0;
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t sample_count() const { return last - first; }
  double duration() const { return end - start; }
};

/// Maximal runs of consecutive samples with elevation strictly above `mask`.
std::vector<PassWindow> find_passes(const SatelliteStateSeries& series, const Vec3& receiver,
                                    double mask);

/// CSV with header `# schema: lunardop-truth/1` then `t,x,y,z,vx,vy,vz`.
void write_series_csv(std::ostream& out, const SatelliteStateSeries& series);
SatelliteStateSeries read_series_csv(std::istream& in);

}  // namespace lunardop

#endif  // LUNARDOP_ORBIT_HPP
