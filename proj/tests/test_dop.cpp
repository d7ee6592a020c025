#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "lunardop/dop.hpp"
#include "lunardop/solver.hpp"

using namespace lunardop;

TEST_CASE("GDOP of simple geometry matrices") {
  Eigen::MatrixX3d h = Eigen::MatrixX3d::Identity(3, 3);
  CHECK(gdop(h) == doctest::Approx(std::sqrt(3.0)));
  CHECK(gdop(2.0 * h) == doctest::Approx(std::sqrt(3.0) / 2.0));
  Eigen::MatrixX3d d(3, 3);
  d << 1, 0, 0, 0, 2, 0, 0, 0, 4;
  CHECK(gdop(d) == doctest::Approx(std::sqrt(1.0 + 0.25 + 0.0625)));
  CHECK(gdop(d) == doctest::Approx(gdop_eigen(d)));
}

TEST_CASE("GDOP trace and eigenvalue routes agree on random rows") {
  Rng rng = make_rng(9, 0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixX3d h(30, 3);
    for (Eigen::Index i = 0; i < h.rows(); ++i) h.row(i) << n(rng), n(rng), n(rng);
    CHECK(gdop(h) == doctest::Approx(gdop_eigen(h)).epsilon(1e-10));
    // More rows of the same geometry only lower the GDOP.
    Eigen::MatrixX3d more(60, 3);
    more << h, h;
    CHECK(gdop(more) == doctest::Approx(gdop(h) / std::sqrt(2.0)));
  }
}

TEST_CASE("singular geometry returns the sentinel") {
  Eigen::MatrixX3d two(2, 3);
  two << 1, 0, 0, 0, 1, 0;
  CHECK(gdop(two) == kGdopSingular);
  Eigen::MatrixX3d flat(5, 3);
  for (Eigen::Index i = 0; i < 5; ++i) flat.row(i) << 1.0 + static_cast<double>(i), 2.0, 0.0;
  CHECK(gdop(flat) == kGdopSingular);
  Eigen::MatrixX3d parallel(4, 3);
  for (Eigen::Index i = 0; i < 4; ++i) parallel.row(i) << 1.0, 1.0, 1.0;
  CHECK(gdop(parallel) == kGdopSingular);
  CHECK(std::isinf(kGdopSingular));
}

TEST_CASE("DOP matrix rows are scaled geometric Jacobian rows") {
  const LunarConstants k;
  const KeplerTrajectory traj(KeplerianElements{}, k);
  const auto series = sample_trajectory(traj, 0.0, 7300.0, 10.0);
  ErrorBudgetConfig budget;
  const Vec3 r = surface_point(88.0 * kDegToRad, 0.3, 0.0, k);
  const auto h = dop_matrix(r, series, budget, k);
  std::size_t visible = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (elevation_angle(r, series.positions[i]) <= budget.mask) continue;
    const double range = (r - series.positions[i]).norm();
    const double sigma = sigma_tot(budget.components(range, k));
    const Vec3 expected = k.wavelength() / sigma * geometric_jacobian_row(r - series.positions[i], series.velocities[i]);
    CHECK((h.row(static_cast<Eigen::Index>(visible)).transpose() - expected).norm() <= 1e-9 * expected.norm());
    ++visible;
  }
  CHECK(static_cast<std::size_t>(h.rows()) == visible);
  CHECK(visible > 0);
  CHECK(gdop_at(r, series, budget, k) == doctest::Approx(gdop(h)));
}

TEST_CASE("GDOP grid layout and CSV") {
  CHECK(GdopGrid::lat_center(0) == 70.5);
  CHECK(GdopGrid::lat_center(19) == 89.5);
  CHECK(GdopGrid::lon_center(0) == 2.5);
  CHECK(GdopGrid::lon_center(71) == 357.5);
  GdopGrid g;
  g.at(3, 4) = 1.25;
  CHECK(g.values[3 * 72 + 4] == 1.25);
  std::ostringstream out;
  write_gdop_csv(out, g);
  const std::string text = out.str();
  CHECK(text.rfind("# schema: lunardop-gdop/1\nlat_deg,lon_deg,gdop\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 20 * 72);
  CHECK(text.find("73.5,22.5,1.25\n") != std::string::npos);
  CHECK(text.find("70.5,2.5,inf\n") != std::string::npos);
}

TEST_CASE("GDOP map does not depend on the thread count") {
  const LunarConstants k;
  const KeplerTrajectory traj(KeplerianElements{}, k);
  const auto series = sample_trajectory(traj, 0.0, 4 * 7200.0, 30.0);
  const ErrorBudgetConfig budget;
  const auto one = gdop_map(series, budget, k, 1);
  const auto three = gdop_map(series, budget, k, 3);
  CHECK(one.values == three.values);
  std::size_t finite = 0;
  for (double v : one.values) finite += std::isfinite(v) ? 1 : 0;
  CHECK(finite > 0);
}
