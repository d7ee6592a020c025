#include "lunardop/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "lunardop/io.hpp"

namespace lunardop {

namespace {

constexpr char kTruthSchema[] = "# schema: lunardop-truth/1";

Mat3 perifocal_to_inertial(const KeplerianElements& el) {
  const double co = std::cos(el.raan), so = std::sin(el.raan);
  const double cw = std::cos(el.arg_perilune), sw = std::sin(el.arg_perilune);
  const double ci = std::cos(el.inclination), si = std::sin(el.inclination);
  Mat3 q;
  q << co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si,
      so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si,
      sw * si, cw * si, ci;
  return q;
}

}  // namespace

void KeplerianElements::validate(const LunarConstants& constants) const {
  if (!(semi_major_axis > constants.moon_radius)) {
    throw std::invalid_argument("semi-major axis must exceed the lunar radius");
  }
  if (!(eccentricity >= 0.0 && eccentricity < 1.0)) {
    throw std::invalid_argument("eccentricity must lie in [0, 1)");
  }
}

double orbital_period(const KeplerianElements& elements, const LunarConstants& constants) {
  const double a = elements.semi_major_axis;
  return 2.0 * kPi * std::sqrt(a * a * a / constants.mu);
}

double solve_kepler(double mean_anomaly, double eccentricity) {
  const double m = std::remainder(mean_anomaly, 2.0 * kPi);
  // Danby's starting value converges for every e < 1.
  double e_anom = m + 0.85 * eccentricity * (std::sin(m) >= 0.0 ? 1.0 : -1.0);
  for (int iter = 0; iter < 50; ++iter) {
    const double f = e_anom - eccentricity * std::sin(e_anom) - m;
    const double step = f / (1.0 - eccentricity * std::cos(e_anom));
    e_anom -= step;
    if (std::abs(step) < 1e-12) return e_anom;
  }
  throw std::runtime_error("Kepler iteration did not converge");
}

StateVector propagate_inertial(const KeplerianElements& el, double t,
                               const LunarConstants& constants) {
  const double a = el.semi_major_axis;
  const double e = el.eccentricity;
  const double n = std::sqrt(constants.mu / (a * a * a));
  const double e_anom = solve_kepler(el.mean_anomaly + n * t, e);
  const double ce = std::cos(e_anom), se = std::sin(e_anom);
  const double b = a * std::sqrt(1.0 - e * e);
  const double edot = n / (1.0 - e * ce);
  const Vec3 p(a * (ce - e), b * se, 0.0);
  const Vec3 v(-a * se * edot, b * ce * edot, 0.0);
  const Mat3 q = perifocal_to_inertial(el);
  return {q * p, q * v};
}

StateVector propagate(const KeplerianElements& elements, double t,
                      const LunarConstants& constants) {
  const StateVector inertial = propagate_inertial(elements, t, constants);
  const Mat3 a = moon_rotation_matrix(t, constants);
  StateVector fixed;
  fixed.position = a * inertial.position;
  const Vec3 omega(0.0, 0.0, constants.rotation_rate());
  fixed.velocity = a * inertial.velocity - omega.cross(fixed.position);
  return fixed;
}

KeplerTrajectory::KeplerTrajectory(KeplerianElements elements, LunarConstants constants)
    : elements_(elements), constants_(constants) {
  elements_.validate(constants_);
}

StateVector KeplerTrajectory::state(double t) const {
  return propagate(elements_, t, constants_);
}

void SatelliteStateSeries::validate() const {
  if (positions.size() != times.size() || velocities.size() != times.size()) {
    throw std::invalid_argument("state series columns differ in length");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw std::invalid_argument("state series times must be strictly increasing");
    }
  }
}

SatelliteStateSeries SatelliteStateSeries::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > size()) throw std::out_of_range("series slice out of range");
  SatelliteStateSeries out;
  out.times.assign(times.begin() + first, times.begin() + last);
  out.positions.assign(positions.begin() + first, positions.begin() + last);
  out.velocities.assign(velocities.begin() + first, velocities.begin() + last);
  return out;
}

SatelliteStateSeries sample_trajectory(const Trajectory& trajectory, double t0, double t1,
                                       double step) {
  if (!(step > 0.0)) throw std::invalid_argument("sampling step must be positive");
  SatelliteStateSeries series;
  const auto count = static_cast<std::size_t>(std::floor((t1 - t0) / step + 1e-9)) + 1;
  series.times.reserve(count);
  series.positions.reserve(count);
  series.velocities.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t0 + static_cast<double>(k) * step;
    const StateVector s = trajectory.state(t);
    series.times.push_back(t);
    series.positions.push_back(s.position);
    series.velocities.push_back(s.velocity);
  }
  return series;
}

SeriesTrajectory::SeriesTrajectory(SatelliteStateSeries series) : series_(std::move(series)) {
  series_.validate();
  if (series_.size() < 2) throw std::invalid_argument("interpolation needs two samples");
}

StateVector SeriesTrajectory::state(double t) const {
  const auto& ts = series_.times;
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t k1 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
      it - ts.begin(), 1, static_cast<std::ptrdiff_t>(ts.size()) - 1));
  const std::size_t k0 = k1 - 1;
  const double h = ts[k1] - ts[k0];
  const double s = (t - ts[k0]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  const double d00 = (6 * s2 - 6 * s) / h, d10 = 3 * s2 - 4 * s + 1;
  const double d01 = (-6 * s2 + 6 * s) / h, d11 = 3 * s2 - 2 * s;
  const Vec3& p0 = series_.positions[k0];
  const Vec3& p1 = series_.positions[k1];
  const Vec3& v0 = series_.velocities[k0];
  const Vec3& v1 = series_.velocities[k1];
  StateVector out;
  out.position = h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1;
  out.velocity = d00 * p0 + d10 * v0 + d01 * p1 + d11 * v1;
  return out;
}

double elevation_angle(const Vec3& receiver, const Vec3& satellite) {
  const double rn = receiver.norm();
  if (!(rn > 0.0)) throw std::invalid_argument("receiver position has zero norm");
  const Vec3 los = satellite - receiver;
  const double ln = los.norm();
  if (!(ln > 0.0)) return 0.5 * kPi;
  const double sin_el = std::clamp(los.dot(receiver) / (ln * rn), -1.0, 1.0);
  return std::asin(sin_el);
}

std::vector<PassWindow> find_passes(const SatelliteStateSeries& series, const Vec3& receiver,
                                    double mask) {
  if (!(mask >= 0.0 && mask < 0.5 * kPi)) throw std::invalid_argument("mask outside [0, 90) deg");
  std::vector<PassWindow> passes;
  bool open = false;
  PassWindow current;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const bool visible = elevation_angle(receiver, series.positions[k]) > mask;
    if (visible && !open) {
      open = true;
      current = PassWindow{series.times[k], series.times[k], k, k + 1};
    } else if (visible) {
      current.end = series.times[k];
      current.last = k + 1;
    } else if (open) {
      passes.push_back(current);
      open = false;
    }
  }
  if (open) passes.push_back(current);
  return passes;
}

void write_series_csv(std::ostream& out, const SatelliteStateSeries& series) {
  out << kTruthSchema << '\n' << "t,x,y,z,vx,vy,vz\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Vec3& p = series.positions[k];
    const Vec3& v = series.velocities[k];
    out << fmt::format("{},{},{},{},{},{},{}\n", format_double(series.times[k]),
                       format_double(p.x()), format_double(p.y()), format_double(p.z()),
                       format_double(v.x()), format_double(v.y()), format_double(v.z()));
  }
}

SatelliteStateSeries read_series_csv(std::istream& in) {
  SatelliteStateSeries series;
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("t,", 0) == 0) continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) {
      throw ParseError(fmt::format("row {}: expected 7 columns, got {}", row, fields.size()), row);
    }
    series.times.push_back(parse_double(fields[0], row));
    series.positions.emplace_back(parse_double(fields[1], row), parse_double(fields[2], row),
                                  parse_double(fields[3], row));
    series.velocities.emplace_back(parse_double(fields[4], row), parse_double(fields[5], row),
                                   parse_double(fields[6], row));
  }
  series.validate();
  return series;
}

}  // namespace lunardop
