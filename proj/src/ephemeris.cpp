#include "lunardop/ephemeris.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "lunardop/random.hpp"

namespace lunardop {

namespace {

constexpr char kEphemerisSchema[] = "lunardop-ephemeris/1";

double rss(double a, double b) { return std::hypot(a, b); }

double bias_component(double rms, double std) {
  return std::sqrt(std::max(0.0, rms * rms - std * std));
}

// Satellite-local along/cross/radial unit vectors, columns of the returned matrix.
Mat3 local_frame(const Vec3& position, const Vec3& velocity) {
  const Vec3 radial = position.normalized();
  const Vec3 cross = position.cross(velocity).normalized();
  const Vec3 along = cross.cross(radial);
  Mat3 m;
  m.col(0) = along;
  m.col(1) = cross;
  m.col(2) = radial;
  return m;
}

}  // namespace

std::string to_string(EphemerisKind kind) {
  switch (kind) {
    case EphemerisKind::Perfect: return "perfect";
    case EphemerisKind::Method1: return "1";
    case EphemerisKind::Method2: return "2";
  }
  return "perfect";
}

EphemerisKind parse_ephemeris_kind(std::string_view text) {
  if (text == "1" || text == "method1") return EphemerisKind::Method1;
  if (text == "2" || text == "method2") return EphemerisKind::Method2;
  if (text == "perfect" || text == "Perfect") return EphemerisKind::Perfect;
  throw std::invalid_argument(fmt::format("unknown ephemeris method '{}'", text));
}

EphemerisMethod EphemerisMethod::perfect() { return of(EphemerisKind::Perfect); }
EphemerisMethod EphemerisMethod::method1() { return of(EphemerisKind::Method1); }
EphemerisMethod EphemerisMethod::method2() { return of(EphemerisKind::Method2); }

EphemerisMethod EphemerisMethod::of(EphemerisKind kind) {
  EphemerisMethod m;
  m.kind = kind;
  return m;
}

AxisTriple EphemerisMethod::combined_std() const {
  return {rss(observed_std.along, predicted_std.along), rss(observed_std.cross, predicted_std.cross),
          rss(observed_std.radial, predicted_std.radial)};
}

AxisTriple EphemerisMethod::combined_rms() const {
  return {rss(observed_rms.along, predicted_rms.along), rss(observed_rms.cross, predicted_rms.cross),
          rss(observed_rms.radial, predicted_rms.radial)};
}

double EphemerisMethod::bias_magnitude() const {
  const AxisTriple s = combined_std();
  const AxisTriple r = combined_rms();
  const Vec3 b(bias_component(r.along, s.along), bias_component(r.cross, s.cross),
               bias_component(r.radial, s.radial));
  return b.norm();
}

double EphemerisMethod::velocity_sigma() const {
  switch (kind) {
    case EphemerisKind::Perfect: return 0.0;
    case EphemerisKind::Method1: return method1_velocity_std * 1e-6;
    case EphemerisKind::Method2: return method2_velocity_std * 1e-6;
  }
  return 0.0;
}

std::vector<double> ColoredNoiseFilter::apply(std::span<const double> x) const {
  std::vector<double> y(x.size(), 0.0);
  const double a0 = denominator[0];
  for (std::size_t k = 0; k < x.size(); ++k) {
    double acc = numerator[0] * x[k];
    if (k >= 1) acc += numerator[1] * x[k - 1] - denominator[1] * y[k - 1];
    if (k >= 2) acc += numerator[2] * x[k - 2] - denominator[2] * y[k - 2];
    y[k] = acc / a0;
  }
  return y;
}

std::vector<double> colored_noise(std::size_t n, double target_std, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("colored noise needs at least two samples");
  if (!(target_std > 0.0)) throw std::invalid_argument("target std must be positive");
  Rng rng = make_rng(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> white(n + kColoredNoiseWarmup);
  for (double& w : white) w = gauss(rng);
  const std::vector<double> filtered = ColoredNoiseFilter{}.apply(white);
  std::vector<double> out(filtered.begin() + static_cast<std::ptrdiff_t>(kColoredNoiseWarmup),
                          filtered.end());
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double& v : out) {
    v -= mean;
    var += v * v;
  }
  const double scale = target_std / std::sqrt(var / static_cast<double>(n));
  for (double& v : out) v *= scale;
  return out;
}

SatelliteStateSeries corrupt_orbit(const SatelliteStateSeries& truth,
                                   const EphemerisMethod& method, std::uint64_t seed) {
  truth.validate();
  if (method.kind == EphemerisKind::Perfect) return truth;

  const std::size_t n = truth.size();
  std::vector<Vec3> error_m(n, Vec3::Zero());
  if (method.kind == EphemerisKind::Method1) {
    const AxisTriple sd = method.combined_std();
    const std::size_t span = std::max(n, kColoredNoiseSpan);
    const auto along = colored_noise(span, sd.along, derive_seed(seed, 1));
    const auto cross = colored_noise(span, sd.cross, derive_seed(seed, 2));
    const auto radial = colored_noise(span, sd.radial, derive_seed(seed, 3));
    Rng rng = make_rng(seed, 4);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    const Vec3 bias = method.bias_magnitude() * dir.normalized();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec3 local(along[k] + bias.x(), cross[k] + bias.y(), radial[k] + bias.z());
      error_m[k] = local_frame(truth.positions[k], truth.velocities[k]) * local;
    }
  } else {
    Rng rng = make_rng(seed, 5);
    std::normal_distribution<double> gauss(0.0, method.method2_position_std / std::sqrt(3.0));
    for (auto& e : error_m) e = Vec3(gauss(rng), gauss(rng), gauss(rng));
  }

  SatelliteStateSeries out = truth;
  for (std::size_t k = 0; k < n; ++k) out.positions[k] += error_m[k] * 1e-3;
  if (n >= 2) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t lo = k == 0 ? 0 : k - 1;
      const std::size_t hi = k + 1 == n ? n - 1 : k + 1;
      out.velocities[k] = (out.positions[hi] - out.positions[lo]) / (truth.times[hi] - truth.times[lo]);
    }
  }
  return out;
}

ChebyshevEphemeris::ChebyshevEphemeris(double t_start, double t_end, const Coefficients& coeffs,
                                       int pass_id)
    : t_start_(t_start), t_end_(t_end), coeffs_(coeffs), pass_id_(pass_id) {
  if (!(t_end > t_start)) throw std::invalid_argument("Chebyshev window must have t_end > t_start");
  // d/dtau of sum c_k T_k: c'_{k-1} = c'_{k+1} + 2 k c_k, with c'_0 halved.
  for (int axis = 0; axis < 3; ++axis) {
    auto& d = deriv_[axis];
    const auto& c = coeffs_[axis];
    d.fill(0.0);
    for (int k = kChebyshevOrder; k >= 1; --k) {
      const double next = k + 1 <= kChebyshevOrder ? d[k + 1] : 0.0;
      d[k - 1] = next + 2.0 * k * c[k];
    }
    d[0] *= 0.5;
  }
}

bool ChebyshevEphemeris::covers(double t) const {
  return t >= t_start_ - kExtrapolationTolerance && t <= t_end_ + kExtrapolationTolerance;
}

double ChebyshevEphemeris::mapped(double t) const {
  if (!covers(t)) {
    throw std::out_of_range(fmt::format("t = {} outside ephemeris window [{}, {}]", t, t_start_, t_end_));
  }
  return (2.0 * t - (t_start_ + t_end_)) / (t_end_ - t_start_);
}

namespace {

template <std::size_t N>
double clenshaw(const std::array<double, N>& c, double x) {
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t k = N - 1; k >= 1; --k) {
    const double b0 = 2.0 * x * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  return x * b1 - b2 + c[0];
}

}  // namespace

Vec3 ChebyshevEphemeris::position(double t) const {
  const double x = mapped(t);
  return {clenshaw(coeffs_[0], x), clenshaw(coeffs_[1], x), clenshaw(coeffs_[2], x)};
}

StateVector ChebyshevEphemeris::state(double t) const {
  const double x = mapped(t);
  const double scale = 2.0 / (t_end_ - t_start_);
  StateVector s;
  s.position = {clenshaw(coeffs_[0], x), clenshaw(coeffs_[1], x), clenshaw(coeffs_[2], x)};
  s.velocity = scale * Vec3(clenshaw(deriv_[0], x), clenshaw(deriv_[1], x), clenshaw(deriv_[2], x));
  return s;
}

ChebyshevEphemeris fit_chebyshev(const SatelliteStateSeries& samples, int pass_id) {
  samples.validate();
  const std::size_t n = samples.size();
  constexpr int ncoef = kChebyshevOrder + 1;
  if (n < static_cast<std::size_t>(ncoef) + 1) {
    throw std::invalid_argument("Chebyshev fit needs at least 12 samples");
  }
  if (std::set<double>(samples.times.begin(), samples.times.end()).size() <
      static_cast<std::size_t>(ncoef)) {
    throw std::invalid_argument("Chebyshev fit needs 11 distinct sample times");
  }
  const double t0 = samples.times.front();
  const double t1 = samples.times.back();
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), ncoef);
  Eigen::MatrixXd rhs(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double x = (2.0 * samples.times[i] - (t0 + t1)) / (t1 - t0);
    design(row, 0) = 1.0;
    design(row, 1) = x;
    for (int k = 2; k < ncoef; ++k) {
      design(row, k) = 2.0 * x * design(row, k - 1) - design(row, k - 2);
    }
    rhs.row(row) = samples.positions[i].transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < ncoef) throw std::invalid_argument("rank-deficient Chebyshev fit");
  const Eigen::MatrixXd coef = qr.solve(rhs);
  ChebyshevEphemeris::Coefficients c{};
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < ncoef; ++k) c[axis][k] = coef(k, axis);
  }
  ChebyshevEphemeris eph(t0, t1, c, pass_id);
  const Eigen::MatrixXd resid = design * coef - rhs;
  eph.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  return eph;
}

BroadcastEphemeris::BroadcastEphemeris(std::vector<ChebyshevEphemeris> segments) {
  for (auto& s : segments) add(std::move(s));
}

void BroadcastEphemeris::add(ChebyshevEphemeris segment) {
  auto it = std::upper_bound(segments_.begin(), segments_.end(), segment.t_start(),
                             [](double t, const ChebyshevEphemeris& s) { return t < s.t_start(); });
  segments_.insert(it, std::move(segment));
}

const ChebyshevEphemeris& BroadcastEphemeris::segment_at(double t) const {
  const ChebyshevEphemeris* best = nullptr;
  double best_gap = 0.0;
  for (const auto& s : segments_) {
    const double gap = t < s.t_start() ? s.t_start() - t : (t > s.t_end() ? t - s.t_end() : 0.0);
    if (gap <= kExtrapolationTolerance && (best == nullptr || gap < best_gap)) {
      best = &s;
      best_gap = gap;
    }
  }
  if (best == nullptr) throw std::out_of_range(fmt::format("no ephemeris segment covers t = {}", t));
  return *best;
}

StateVector BroadcastEphemeris::state(double t) const { return segment_at(t).state(t); }

Vec3 BroadcastEphemeris::position(double t) const { return segment_at(t).position(t); }

std::string ephemeris_to_json(const BroadcastEphemeris& eph) {
  nlohmann::ordered_json doc;
  doc["schema"] = kEphemerisSchema;
  doc["units"] = {{"time", "s"}, {"position", "km"}};
  doc["order"] = kChebyshevOrder;
  auto segments = nlohmann::ordered_json::array();
  for (const auto& s : eph.segments()) {
    nlohmann::ordered_json seg;
    seg["pass_id"] = s.pass_id();
    seg["t_start"] = s.t_start();
    seg["t_end"] = s.t_end();
    seg["fit_residual_rms_km"] = s.residual_rms;
    seg["coeffs"] = s.coefficients();
    segments.push_back(std::move(seg));
  }
  doc["segments"] = std::move(segments);
  return doc.dump(2) + "\n";
}

BroadcastEphemeris ephemeris_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("ephemeris JSON: ") + e.what());
  }
  if (doc.value("schema", std::string()) != kEphemerisSchema) {
    throw std::invalid_argument("ephemeris JSON: unsupported schema");
  }
  BroadcastEphemeris eph;
  try {
    for (const auto& seg : doc.at("segments")) {
      const auto coeffs = seg.at("coeffs").get<ChebyshevEphemeris::Coefficients>();
      ChebyshevEphemeris s(seg.at("t_start").get<double>(), seg.at("t_end").get<double>(), coeffs,
                           seg.at("pass_id").get<int>());
      s.residual_rms = seg.value("fit_residual_rms_km", 0.0);
      eph.add(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("ephemeris JSON: ") + e.what());
  }
  return eph;
}

}  // namespace lunardop
