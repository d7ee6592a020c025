#include "lunardop/frames.hpp"

#include <cmath>
#include <stdexcept>

namespace lunardop {

void LunarConstants::validate() const {
  if (!(speed_of_light > 0.0) || !(moon_radius > 0.0) || !(carrier_frequency > 0.0) ||
      !(mu > 0.0) || !(sidereal_month_days > 0.0)) {
    throw std::invalid_argument("lunar constants must be strictly positive");
  }
}

Mat3 rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 m;
  m << c, s, 0.0,
      -s, c, 0.0,
      0.0, 0.0, 1.0;
  return m;
}

Mat3 rotation_z_derivative(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 m;
  m << -s, c, 0.0,
      -c, -s, 0.0,
      0.0, 0.0, 0.0;
  return m;
}

Mat3 moon_rotation_matrix(double dt, const LunarConstants& constants) {
  return rotation_z(constants.rotation_rate() * dt);
}

Vec3 surface_point(double lat, double lon, double alt, const LunarConstants& constants) {
  if (!(std::abs(lat) <= 0.5 * kPi + 1e-12)) {
    throw std::invalid_argument("latitude outside [-90, 90] deg");
  }
  const double radius = constants.moon_radius + alt;
  return {radius * std::cos(lat) * std::cos(lon), radius * std::cos(lat) * std::sin(lon),
          radius * std::sin(lat)};
}

double latitude_of(const Vec3& r) {
  return std::atan2(r.z(), std::hypot(r.x(), r.y()));
}

double longitude_of(const Vec3& r) {
  double lon = std::atan2(r.y(), r.x());
  if (lon < 0.0) lon += 2.0 * kPi;
  return lon;
}

}  // namespace lunardop
