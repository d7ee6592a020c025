#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lunardop/solver.hpp"

using namespace lunardop;

namespace {

// Point on the sphere of radius |r| that is `km` away from r along a fixed
// tangent direction.
Vec3 offset_on_sphere(const Vec3& r, double km) {
  Vec3 t = r.cross(Vec3::UnitX());
  if (t.norm() < 1e-9) t = r.cross(Vec3::UnitY());
  t.normalize();
  const double angle = km / r.norm();
  return std::cos(angle) * r + std::sin(angle) * r.norm() * t;
}

double modulo_mirror(const Vec3& est, const Vec3& truth, const Vec3& normal) {
  return std::min((est - truth).norm(), (est - mirror_reflect(truth, normal)).norm());
}

}  // namespace

TEST_CASE("geometric Jacobian row matches a numerical gradient") {
  const Vec3 sat(100.0, -300.0, 1900.0);
  const Vec3 v(0.2, 1.5, -0.1);
  const Vec3 r(50.0, 20.0, 1737.4);
  auto rate = [&](const Vec3& p) {
    const Vec3 d = p - sat;
    return -d.normalized().dot(v);
  };
  const Vec3 row = geometric_jacobian_row(r - sat, v);
  for (int a = 0; a < 3; ++a) {
    Vec3 h = Vec3::Zero();
    h[a] = 1e-4;
    const double numeric = (rate(r + h) - rate(r - h)) / 2e-4;
    CHECK(row[a] == doctest::Approx(numeric).epsilon(1e-7));
  }
  CHECK_THROWS_AS(geometric_jacobian_row(Vec3::Zero(), v), std::invalid_argument);
}

TEST_CASE("residuals vanish at the truth for noiseless data") {
  const fixtures::NoiselessPass p(82.0, 120.0, 0.0);
  const DopplerProblem problem(p.pass(0), p.truth, p.constants());
  const auto f = problem.residuals(p.receiver());
  CHECK(f.cwiseAbs().maxCoeff() < 1e-8);
  // Weighted by 1/(lambda0 sigma); realistic noise would give about N/2.
  CHECK(problem.cost(p.receiver(), true) < 1.0);
  CHECK(problem.cost(p.receiver(), false) < 1e-15);
  CHECK(problem.cost(offset_on_sphere(p.receiver(), 5.0), true) > 1.0);
}

TEST_CASE("analytic Jacobian matches finite differences of the residual") {
  const fixtures::NoiselessPass p(75.0, 300.0, 0.0);
  const DopplerProblem problem(p.pass(0), p.truth, p.constants());
  const Vec3 r = offset_on_sphere(p.receiver(), 40.0);
  const auto lin = problem.linearize(r);
  for (std::size_t j = 0; j < problem.size(); j += problem.size() / 6) {
    for (int a = 0; a < 3; ++a) {
      Vec3 h = Vec3::Zero();
      // Light-time iteration counts flip with r and add ~1e-11 km/s of
      // jitter, so the difference step cannot be tiny.
      h[a] = 0.1;
      const double numeric = (problem.residual(r + h, j) - problem.residual(r - h, j)) / 0.2;
      CHECK(lin.jacobian(static_cast<Eigen::Index>(j), a) ==
            doctest::Approx(numeric).epsilon(1e-6).scale(1e-9));
    }
    CHECK(lin.residuals(static_cast<Eigen::Index>(j)) == doctest::Approx(problem.residual(r, j)));
  }
  const Vec3 g = problem.gradient(r, true);
  for (int a = 0; a < 3; ++a) {
    Vec3 h = Vec3::Zero();
    h[a] = 0.1;
    const double numeric = (problem.cost(r + h, true) - problem.cost(r - h, true)) / 0.2;
    CHECK(g[a] == doctest::Approx(numeric).epsilon(1e-5));
  }
}

TEST_CASE("Armijo rule") {
  auto cost = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  Eigen::VectorXd x(1), grad(1), dx(1);
  x << 1.0;
  grad << 2.0;
  dx << -1.0;
  auto full = armijo_refine(x, dx, cost, grad);
  CHECK(full.scale == 1.0);
  CHECK_FALSE(full.underflow);
  dx << -4.0;
  auto halved = armijo_refine(x, dx, cost, grad);
  CHECK(halved.scale == 0.25);
  dx << 1.0;
  auto uphill = armijo_refine(x, dx, cost, grad);
  CHECK(uphill.underflow);
  CHECK(uphill.scale == 0.0);
}

TEST_CASE("soft line search") {
  auto phi = [](double a) { return std::pair{(a - 2.0) * (a - 2.0), 2.0 * (a - 2.0)}; };
  const auto r = soft_line_search(phi);
  CHECK(r.alpha > 0.0);
  CHECK(std::abs(2.0 * (r.alpha - 2.0)) <= 0.99 * 4.0);
  CHECK((r.alpha - 2.0) * (r.alpha - 2.0) < 4.0);
  auto up = [](double a) { return std::pair{a, 1.0}; };
  CHECK(soft_line_search(up).alpha == 0.0);
}

TEST_CASE("mirror reflection and sub-track normal") {
  std::vector<Vec3> track;
  for (int i = 0; i < 20; ++i) {
    const double u = 0.1 * i;
    track.emplace_back(0.0, 1900.0 * std::cos(u), 1900.0 * std::sin(u));
  }
  const Vec3 n = subtrack_normal(track);
  CHECK(std::abs(std::abs(n.x()) - 1.0) < 1e-12);
  const Vec3 r(300.0, 100.0, 1700.0);
  const Vec3 m = mirror_reflect(r, n);
  CHECK(m.x() == doctest::Approx(-300.0));
  CHECK(m.norm() == doctest::Approx(r.norm()));
  CHECK((mirror_reflect(m, n) - r).norm() < 1e-12);
  const Vec3 on_plane(0.0, 5.0, 7.0);
  CHECK((mirror_reflect(on_plane, n) - on_plane).norm() < 1e-12);
  std::vector<Vec3> line{Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
  CHECK_THROWS_AS(subtrack_normal(line), std::invalid_argument);
}

TEST_CASE("algebraic initialisation lands near the receiver or its mirror") {
  const fixtures::NoiselessPass p(80.0, 45.0, 0.0);
  const DopplerProblem problem(p.pass(0), p.truth, p.constants());
  const auto s1 = step1_algebraic(problem);
  CHECK(s1.pairs_used > 0);
  CHECK(s1.position.norm() == doctest::Approx(p.constants().moon_radius));
  CHECK(((s1.position - s1.candidates[0]).norm() < 1e-9 || (s1.position - s1.candidates[1]).norm() < 1e-9));
  const double best = std::min((s1.candidates[0] - p.receiver()).norm(), (s1.candidates[1] - p.receiver()).norm());
  CHECK(best < 100.0);
}

TEST_CASE("constrained Gauss-Newton converges from 300 km") {
  const fixtures::NoiselessPass p(85.0, 250.0, 0.0);
  const DopplerProblem problem(p.pass(0), p.truth, p.constants());
  std::vector<Vec3> sats;
  for (const auto& o : problem.observations()) sats.push_back(p.truth.position(o.t_R));
  const Vec3 normal = subtrack_normal(sats);
  const auto out = step2_constrained_gn(offset_on_sphere(p.receiver(), 300.0), problem);
  CHECK(out.converged);
  CHECK(out.position.norm() == doctest::Approx(p.constants().moon_radius));
  CHECK(modulo_mirror(out.position, p.receiver(), normal) < 10.0);
  CHECK(out.iterations <= 100);
}

TEST_CASE("single-pass pipeline recovers a noiseless receiver") {
  const fixtures::NoiselessPass p(78.0, 160.0, 3.0);
  const auto sol = solve_single_pass(p.pass(0), p.truth, p.constants());
  const double err = std::min((sol.estimate.position - p.receiver()).norm(), (sol.mirror - p.receiver()).norm());
  CHECK(err * 1e3 < 1.0);
  CHECK(sol.estimate.step_history.size() == 3);
  const Vec3 choice = sol.cost_choice();
  CHECK(((choice - sol.estimate.position).norm() < 1e-12 || (choice - sol.mirror).norm() < 1e-12));
}

TEST_CASE("two noiseless passes resolve the mirror ambiguity") {
  const fixtures::NoiselessPass p(83.0, 10.0, 0.0, 2);
  const auto groups = group_by_pass(p.data.observations);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].front().pass_id < groups[1].front().pass_id);
  const auto sol = disambiguate_multipass(p.data.observations, p.truth, p.constants());
  CHECK((sol.estimate.position - p.receiver()).norm() * 1e3 < 1.0);
  CHECK(sol.passes.size() == 2);
  CHECK_THROWS_AS(disambiguate_multipass(groups[0], p.truth, p.constants()), std::invalid_argument);
}

TEST_CASE("solver configuration validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.step2_threshold = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.armijo.beta = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
