#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "lunardop/io.hpp"
#include "lunardop/measurement.hpp"

using namespace lunardop;

namespace {

// Satellite parked at a fixed Moon-fixed point.
struct Parked final : Trajectory {
  Vec3 p;
  explicit Parked(Vec3 p_) : p(std::move(p_)) {}
  StateVector state(double) const override { return {p, Vec3::Zero()}; }
};

// Light time by bisection on |r - A(w tau) r_s(t - tau)| - c tau.
double bisect_delay(const Vec3& r, double t, const Trajectory& eph, const LunarConstants& k) {
  auto f = [&](double tau) {
    return (r - rotation_z(k.rotation_rate() * tau) * eph.position(t - tau)).norm() - k.speed_of_light * tau;
  };
  double lo = 0.0, hi = 0.1;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("light time for a satellite 120 km overhead") {
  const LunarConstants k;
  const Vec3 rx(0, 0, k.moon_radius);
  const Parked sat(Vec3(0, 0, k.moon_radius + 120.0));
  const auto sol = solve_light_time(rx, 50.0, sat, k);
  CHECK(sol.delay == doctest::Approx(4.003e-4).epsilon(1e-3));
  CHECK(sol.delay == doctest::Approx(120.0 / k.speed_of_light).epsilon(1e-12));
  CHECK(sol.iterations <= 3);
  CHECK(sol.range == doctest::Approx(120.0));
}

TEST_CASE("clock biases shift the accumulated delta range by c times the offset") {
  const LunarConstants k;
  const Vec3 rx(0, 0, k.moon_radius);
  const Parked sat(Vec3(0, 0, k.moon_radius + 120.0));
  const double base = accumulated_delta_range(rx, 0.0, sat, k);
  const double shifted = accumulated_delta_range(rx, 0.0, sat, k, ClockBiases{1e-6, 0.0});
  // c x 1e-6 s is 0.299792458 km.
  CHECK(shifted - base == doctest::Approx(0.299792458).epsilon(1e-9));
  const double sat_shift = accumulated_delta_range(rx, 0.0, sat, k, ClockBiases{0.0, 1e-6});
  CHECK(base - sat_shift == doctest::Approx(0.299792458).epsilon(1e-9));
}

TEST_CASE("light-time iteration agrees with bisection on the orbit") {
  const fixtures::NoiselessPass p(85.0, 30.0, 0.0);
  const auto obs = p.pass(0);
  REQUIRE(obs.size() > 100);
  for (std::size_t i = 0; i < obs.size(); i += obs.size() / 7) {
    const double t = obs[i].t_R;
    const auto sol = solve_light_time(p.receiver(), t, p.truth, p.constants());
    CHECK(sol.delay == doctest::Approx(bisect_delay(p.receiver(), t, p.truth, p.constants())).epsilon(1e-12));
    CHECK(sol.iterations <= 4);
  }
}

TEST_CASE("five-point stencil is exact on quartics") {
  auto f = [](double t) { return 3.0 * std::pow(t, 4) - 2.0 * t * t * t + t - 5.0; };
  for (double t : {-2.0, 0.3, 4.0}) {
    const double exact = 12.0 * t * t * t - 6.0 * t * t + 1.0;
    CHECK(five_point_derivative(f, t, 0.1) == doctest::Approx(exact).epsilon(1e-10));
  }
}

TEST_CASE("five-point stencil error falls as the fourth power of the step") {
  auto f = [](double t) { return std::sin(t); };
  double previous = 0.0;
  for (double h : {0.08, 0.04, 0.02, 0.01}) {
    const double err = std::abs(five_point_derivative(f, 0.7, h) - std::cos(0.7));
    if (previous > 0.0) CHECK(previous / err == doctest::Approx(16.0).epsilon(0.02));
    previous = err;
  }
}

TEST_CASE("stencil range rate matches Richardson and the analytic rate") {
  const fixtures::NoiselessPass p(78.0, 200.0, 0.0);
  const auto obs = p.pass(0);
  REQUIRE(!obs.empty());
  auto adr = [&](double t) { return accumulated_delta_range(p.receiver(), t, p.truth, p.constants()); };
  for (std::size_t i = 0; i < obs.size(); i += obs.size() / 5) {
    const double t = obs[i].t_R;
    const double stencil = adr_rate(p.receiver(), t, p.truth, p.constants());
    auto central = [&](double h) { return (adr(t + h) - adr(t - h)) / (2.0 * h); };
    const double richardson = (4.0 * central(0.5) - central(1.0)) / 3.0;
    CHECK(std::abs(stencil - richardson) < 1e-7);
    CHECK(std::abs(stencil - geometric_range_rate(p.receiver(), t, p.truth, p.constants())) < 1e-6);
    // The noiseless observation inverts to the same rate.
    CHECK(std::abs(-obs[i].doppler * p.constants().wavelength() - stencil) < 1e-6);
  }
}

TEST_CASE("carrier-to-noise density falls 6.02 dB per range doubling") {
  const LunarConstants k;
  const LinkBudgetParams link;
  CHECK(cn0(link, 500.0, k) - cn0(link, 1000.0, k) == doctest::Approx(6.0206).epsilon(1e-4));
  CHECK(cn0(link, 125.0, k) - cn0(link, 250.0, k) == doctest::Approx(6.0206).epsilon(1e-4));
  CHECK_THROWS_AS(cn0(link, 0.0, k), std::invalid_argument);
}

TEST_CASE("tracking noise") {
  const LunarConstants k;
  const LinkBudgetParams link;
  CHECK(sigma_meas(link, 45.0, k) == doctest::Approx(2.071096e-5).epsilon(1e-5));
  // Default link at 120 km: FSPL 140.2665 dB, T_eq 22.7436 dB-K, C/N0 87.5899 dB-Hz.
  CHECK(cn0(link, 120.0, k) == doctest::Approx(87.58989522).epsilon(1e-9));
  CHECK(sigma_meas(link, cn0(link, 120.0, k), k) == doctest::Approx(1.5358975e-7).epsilon(1e-6));
  double previous = 0.0;
  for (double range = 100.0; range <= 3000.0; range += 100.0) {
    const double s = sigma_meas(link, cn0(link, range, k), k);
    // Farther means weaker signal and noisier tracking.
    if (range > 100.0) CHECK(s > previous);
    previous = s;
  }
}

TEST_CASE("clock error components") {
  const LunarConstants k;
  const ClockModel clocks;
  CHECK(clocks.sigma_satellite(k) * 1e3 == doctest::Approx(6e-5).epsilon(1e-3));
  const double y = std::sqrt(1.3e-22 / 2.0 + 4.0 * 2.3e-26 + 4.0 / 3.0 * kPi * kPi * 3.3e-31);
  CHECK(clocks.receiver_frac_stability() == doctest::Approx(y));
  CHECK(clocks.sigma_receiver(k) == doctest::Approx(k.speed_of_light * y));
  ClockModel bad;
  bad.receiver_h0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("total error is the root-sum-square") {
  CHECK(sigma_tot({3.0, 4.0, 0.0, 0.0}) == doctest::Approx(5.0));
  CHECK(sigma_tot({1.0, 1.0, 1.0, 1.0}) == doctest::Approx(2.0));
  CHECK(sigma_tot({0.0, 0.0, 0.0, 0.0}) == 0.0);
  CHECK_THROWS_AS(sigma_tot({-1.0, 0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("Doppler over a pass crosses zero once and stays bounded") {
  const fixtures::NoiselessPass p(80.0, 10.0, 0.0);
  const auto obs = p.pass(0);
  REQUIRE(obs.size() > 100);
  int crossings = 0;
  double max_abs = 0.0;
  for (std::size_t i = 1; i < obs.size(); ++i) {
    if ((obs[i - 1].doppler > 0.0) != (obs[i].doppler > 0.0)) ++crossings;
    max_abs = std::max(max_abs, std::abs(obs[i].doppler));
  }
  CHECK(crossings == 1);
  // Approaching first: positive Doppler before closest approach.
  CHECK(obs.front().doppler > 0.0);
  const double vmax = std::sqrt(p.constants().mu * (2.0 / (p.setup.orbit.semi_major_axis * (1 - p.setup.orbit.eccentricity)) -
                                                    1.0 / p.setup.orbit.semi_major_axis));
  CHECK(max_abs < vmax / p.constants().wavelength());
  CHECK(max_abs > 1000.0);
}

TEST_CASE("observation CSV round trip and bad rows") {
  std::vector<DopplerObservation> obs{{1.0, -1234.5678901234, 44.1, 2.5e-5, 0},
                                      {2.0, 0.1, 43.0, 3.0e-5, 1}};
  std::stringstream ss;
  write_observations_csv(ss, obs);
  const auto back = read_observations_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].doppler == obs[0].doppler);
  CHECK(back[1].pass_id == 1);
  CHECK(back[1].sigma_tot == obs[1].sigma_tot);

  std::istringstream bad("# schema: lunardop-observations/1\nt_R,D_Hz,cn0_dBHz,sigma_tot_kmps,pass_id\n"
                         "1,2,3,1e-5,0\n2,abc,3,1e-5,0\n");
  try {
    read_observations_csv(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 4);
  }
  std::istringstream cols("1,2,3\n");
  CHECK_THROWS_AS(read_observations_csv(cols), ParseError);
  std::istringstream sigma("1,2,3,0,0\n");
  CHECK_THROWS_AS(read_observations_csv(sigma), ParseError);
}

TEST_CASE("synthesis refuses samples below the mask") {
  const LunarConstants k;
  const Vec3 rx(0, 0, k.moon_radius);
  const Parked below(Vec3(0, 0, -k.moon_radius - 100.0));
  ErrorBudgetConfig budget;
  budget.switches = ErrorSwitches::all_off();
  Rng rng = make_rng(1, 1);
  CHECK_THROWS_AS(synthesize_doppler(rx, 0.0, below, {}, budget, k, rng), std::invalid_argument);
}
