#ifndef LUNARDOP_FRAMES_HPP
#define LUNARDOP_FRAMES_HPP

#include <Eigen/Dense>

namespace lunardop {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;
inline constexpr double kSecondsPerDay = 86400.0;

/// Physical constants of the Moon-fixed navigation problem. Distances in km,
/// times in s, frequencies in Hz.
struct LunarConstants {
  double speed_of_light = 299792.458;   // km/s
  double moon_radius = 1737.4;          // km
  double carrier_frequency = 2050.0e6;  // Hz
  double mu = 4902.800066;              // km^3/s^2
  double sidereal_month_days = 27.321661;

  /// Nominal carrier wavelength c / f0 in km.
  double wavelength() const { return speed_of_light / carrier_frequency; }

  /// Uniform rotation rate about +z in rad/s.
  double rotation_rate() const {
    return 2.0 * kPi / (sidereal_month_days * kSecondsPerDay);
  }

  /// Throws std::invalid_argument unless every constant is strictly positive.
  void validate() const;
};

/// z-axis rotation with +sin in entry (0,1) and -sin in entry (1,0). Applied to
/// a vector it rotates by -angle, i.e. it maps coordinates of a frame into the
/// frame that has turned by +angle about z.
Mat3 rotation_z(double angle);

/// d/dangle of rotation_z(angle).
Mat3 rotation_z_derivative(double angle);

/// Rotation accumulated by the Moon-fixed frame over dt seconds.
Mat3 moon_rotation_matrix(double dt, const LunarConstants& constants);

/// Spherical-Moon point at latitude/longitude (rad) and altitude (km) above
/// the mean radius. z points through the North Pole.
Vec3 surface_point(double lat, double lon, double alt, const LunarConstants& constants);

/// Latitude (rad) of a Moon-fixed position.
double latitude_of(const Vec3& r);

/// Longitude (rad, in [0, 2pi)) of a Moon-fixed position.
double longitude_of(const Vec3& r);

}  // namespace lunardop

#endif  // LUNARDOP_FRAMES_HPP
