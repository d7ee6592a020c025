#include "lunardop/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace lunardop {

namespace {

constexpr std::array<double, 4> kStencilOffsets{-2.0, -1.0, 1.0, 2.0};
constexpr std::array<double, 4> kStencilWeights{1.0, -8.0, 8.0, -1.0};
constexpr double kArmijoMinScale = 0x1p-60;
constexpr double kMaxCondition = 1e12;

double condition_number(const Eigen::MatrixXd& normal) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0)) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / ev.minCoeff();
}

Vec3 sphere_point(const Eigen::Vector2d& xy, double radius, double z_sign) {
  const double z2 = radius * radius - xy.squaredNorm();
  return {xy.x(), xy.y(), z_sign * std::sqrt(std::max(0.0, z2))};
}

}  // namespace

void SolverConfig::validate() const {
  if (!(armijo.alpha > 0.0 && armijo.alpha < 1.0) || !(armijo.beta > 0.0 && armijo.beta < 1.0) ||
      !(armijo.epsilon0 > 0.0)) {
    throw std::invalid_argument("Armijo parameters must satisfy 0 < alpha, beta < 1 and epsilon0 > 0");
  }
  if (!(step2_threshold > 0.0) || !(step3_threshold > 0.0)) {
    throw std::invalid_argument("solver thresholds must be positive");
  }
  if (max_iterations < 1 || sls.k_max < 1 || !(sls.alpha_max > 0.0)) {
    throw std::invalid_argument("iteration limits must be positive");
  }
  if (!(sls.beta_curvature > 0.0 && sls.beta_curvature < 1.0) ||
      !(sls.descent > 0.0 && sls.descent < sls.beta_curvature)) {
    throw std::invalid_argument("soft line search needs 0 < descent < beta_curvature < 1");
  }
  if (step1_slice < 3 || !(stencil_step > 0.0)) {
    throw std::invalid_argument("step-1 slice must hold 3 samples and the stencil step be positive");
  }
}

DopplerProblem::DopplerProblem(std::vector<DopplerObservation> observations, const Trajectory& eph,
                               const LunarConstants& constants, double stencil_step)
    : observations_(std::move(observations)), eph_(&eph), constants_(constants), step_(stencil_step) {
  scales_.resize(static_cast<Eigen::Index>(observations_.size()));
  const double lambda = constants_.wavelength();
  for (std::size_t j = 0; j < observations_.size(); ++j) {
    if (!(observations_[j].sigma_tot > 0.0)) throw std::invalid_argument("sigma_tot must be positive");
    scales_(static_cast<Eigen::Index>(j)) = 1.0 / (lambda * observations_[j].sigma_tot);
  }
}

double DopplerProblem::stencil_sum(const Vec3& r, double t, Vec3* gradient) const {
  const double c = constants_.speed_of_light;
  const double w = constants_.rotation_rate();
  double sum = 0.0;
  if (gradient != nullptr) gradient->setZero();
  for (std::size_t k = 0; k < kStencilOffsets.size(); ++k) {
    const double tk = t + kStencilOffsets[k] * step_;
    const LightTimeSolution sol = solve_light_time(r, tk, *eph_, constants_);
    sum += kStencilWeights[k] * sol.range;
    if (gradient != nullptr) {
      const Vec3 los = sol.receiver_from_sat / sol.range;
      const Vec3 vel = eph_->state(tk - sol.delay).velocity;
      const Vec3 g_tau = rotation_z(w * sol.delay) * vel -
                         w * (rotation_z_derivative(w * sol.delay) * sol.sat_position);
      *gradient += kStencilWeights[k] * los / (1.0 - los.dot(g_tau) / c);
    }
  }
  const double scale = 1.0 / (12.0 * step_);
  if (gradient != nullptr) *gradient *= scale;
  return sum * scale;
}

double DopplerProblem::residual(const Vec3& r, std::size_t j) const {
  const auto& o = observations_[j];
  return constants_.wavelength() * o.doppler + stencil_sum(r, o.t_R, nullptr);
}

Eigen::VectorXd DopplerProblem::residuals(const Vec3& r) const {
  Eigen::VectorXd f(static_cast<Eigen::Index>(size()));
  for (std::size_t j = 0; j < size(); ++j) f(static_cast<Eigen::Index>(j)) = residual(r, j);
  return f;
}

DopplerProblem::Linearization DopplerProblem::linearize(const Vec3& r) const {
  Linearization lin;
  const auto n = static_cast<Eigen::Index>(size());
  lin.residuals.resize(n);
  lin.jacobian.resize(n, 3);
  const double lambda = constants_.wavelength();
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& o = observations_[static_cast<std::size_t>(j)];
    Vec3 row;
    lin.residuals(j) = lambda * o.doppler + stencil_sum(r, o.t_R, &row);
    lin.jacobian.row(j) = row.transpose();
  }
  return lin;
}

double DopplerProblem::cost(const Vec3& r, bool weighted) const {
  const Eigen::VectorXd f = residuals(r);
  return weighted ? 0.5 * f.cwiseProduct(scales_).squaredNorm() : 0.5 * f.squaredNorm();
}

Vec3 DopplerProblem::gradient(const Vec3& r, bool weighted) const {
  const Linearization lin = linearize(r);
  if (!weighted) return lin.jacobian.transpose() * lin.residuals;
  return lin.jacobian.transpose() * lin.residuals.cwiseProduct(scales_.cwiseAbs2());
}

Vec3 geometric_jacobian_row(const Vec3& r_rs, const Vec3& v) {
  const double n = r_rs.norm();
  if (!(n > 0.0)) throw std::invalid_argument("receiver coincides with the satellite");
  return -(v - v.dot(r_rs) * r_rs / (n * n)) / n;
}

Vec3 jacobian_row(const Vec3& r, const DopplerObservation& obs, const Trajectory& eph,
                  const LunarConstants& constants, double stencil_step) {
  const DopplerProblem problem({obs}, eph, constants, stencil_step);
  return problem.linearize(r).jacobian.row(0).transpose();
}

ArmijoResult armijo_refine(const Eigen::VectorXd& x, const Eigen::VectorXd& dx,
                           const std::function<double(const Eigen::VectorXd&)>& cost,
                           const Eigen::VectorXd& gradient, const ArmijoParams& params) {
  ArmijoResult out;
  if (!dx.allFinite()) {
    out.underflow = true;
    return out;
  }
  const double slope = gradient.dot(dx);
  if (!(slope < 0.0)) {
    // Not a descent direction; shrinking would only find rounding noise.
    out.underflow = true;
    return out;
  }
  const double j0 = cost(x);
  double eps = params.epsilon0;
  double j1 = cost(x + eps * dx);
  out.evaluations = 2;
  while (!(j1 - j0 < params.alpha * eps * slope)) {
    eps *= params.beta;
    if (eps < kArmijoMinScale) {
      out.underflow = true;
      out.scale = 0.0;
      return out;
    }
    j1 = cost(x + eps * dx);
    ++out.evaluations;
  }
  out.scale = eps;
  return out;
}

LineSearchResult soft_line_search(const LineFunction& phi, const SoftLineSearchParams& params) {
  LineSearchResult out;
  const auto [phi0, dphi0] = phi(0.0);
  out.evaluations = 1;
  if (dphi0 >= 0.0) return out;

  const double gamma = params.beta_curvature * dphi0;
  const auto lambda = [&](double a) { return phi0 + params.descent * a * dphi0; };
  int k = 0;
  double a = 0.0;
  double phi_a = phi0, dphi_a = dphi0;
  double b = std::min(1.0, params.alpha_max);
  auto [phi_b, dphi_b] = phi(b);
  ++out.evaluations;
  while (phi_b <= lambda(b) && dphi_b <= gamma && b < params.alpha_max && k < params.k_max) {
    ++k;
    a = b;
    phi_a = phi_b;
    dphi_a = dphi_b;
    b = std::min(2.0 * b, params.alpha_max);
    std::tie(phi_b, dphi_b) = phi(b);
    ++out.evaluations;
  }

  double alpha = b;
  double phi_alpha = phi_b, dphi_alpha = dphi_b;
  while ((phi_alpha > lambda(alpha) || dphi_alpha < gamma) && k < params.k_max) {
    ++k;
    const double d = b - a;
    const double curv = (phi_b - phi_a - d * dphi_a) / (d * d);
    if (curv > 0.0) {
      alpha = a - dphi_a / (2.0 * curv);
      alpha = std::min(std::max(alpha, a + 0.1 * d), b - 0.1 * d);
    } else {
      alpha = 0.5 * (a + b);
    }
    std::tie(phi_alpha, dphi_alpha) = phi(alpha);
    ++out.evaluations;
    if (phi_alpha < lambda(alpha)) {
      a = alpha;
      phi_a = phi_alpha;
      dphi_a = dphi_alpha;
    } else {
      b = alpha;
      phi_b = phi_alpha;
      dphi_b = dphi_alpha;
    }
  }
  out.exhausted = k >= params.k_max;
  out.alpha = phi_alpha >= phi0 ? 0.0 : alpha;
  return out;
}

Step1Result step1_algebraic(const DopplerProblem& pass, std::size_t slice) {
  const auto& obs = pass.observations();
  const LunarConstants& k = pass.constants();
  if (obs.size() < 2) throw std::invalid_argument("step 1 needs at least two observations");
  const std::size_t n_slice = std::min(slice, obs.size());
  const std::size_t first = obs.size() / 2 - std::min(obs.size() / 2, n_slice / 2);
  const std::size_t last = std::min(obs.size(), first + n_slice);

  std::vector<Vec3> x;
  std::vector<double> alpha;
  double speed = 0.0, radius = 0.0;
  Step1Result out;
  for (std::size_t j = first; j < last; ++j) {
    const StateVector s = pass.ephemeris().state(obs[j].t_R);
    x.push_back(s.position);
    speed += s.velocity.norm();
    radius += s.position.norm();
  }
  const auto m = static_cast<double>(x.size());
  speed /= m;
  const double height = radius / m - k.moon_radius;
  for (std::size_t j = first; j < last; ++j) {
    double cos_a = k.wavelength() * obs[j].doppler / speed;
    if (std::abs(cos_a) > 1.0) {
      out.clamped = true;
      cos_a = std::clamp(cos_a, -1.0, 1.0);
    }
    alpha.push_back(std::acos(cos_a));
  }

  Vec3 pca = Vec3::Zero();
  for (std::size_t j = 1; j < x.size(); ++j) {
    const double s = std::sin(alpha[j] - alpha[0]);
    if (std::abs(s) < 1e-9) continue;
    pca += x[j] + (x[j] - x[0]) * std::sin(alpha[0]) * std::cos(alpha[j]) / s;
    ++out.pairs_used;
  }
  if (out.pairs_used == 0) throw std::invalid_argument("degenerate pass geometry in step 1");
  pca /= out.pairs_used;

  double dist2 = 0.0, cot2 = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    dist2 += (pca - x[j]).squaredNorm();
    const double cot = 1.0 / std::tan(alpha[j]);
    cot2 += cot * cot;
  }
  const double d2 = cot2 > 0.0 ? dist2 / cot2 - height * height : 0.0;
  out.cross_track = std::sqrt(std::max(0.0, d2));
  out.pca = pca;

  const Vec3 d_sat = x.back() - x.front();
  const Vec3 d_d = d_sat.cross(pca).normalized();
  const Vec3 base = pca * (pca.norm() - height) / pca.norm();
  double best = std::numeric_limits<double>::infinity();
  for (int side = 0; side < 2; ++side) {
    const Vec3 r = base + (side == 0 ? 1.0 : -1.0) * out.cross_track * d_d;
    out.candidates[side] = r / r.norm() * k.moon_radius;
    const double cost = pass.cost(out.candidates[side], false);
    if (cost < best) {
      best = cost;
      out.position = out.candidates[side];
    }
  }
  return out;
}

StepOutcome step2_constrained_gn(const Vec3& r0, const DopplerProblem& problem,
                                 const SolverConfig& config) {
  const double radius = problem.constants().moon_radius;
  const double z_sign = r0.z() < 0.0 ? -1.0 : 1.0;
  StepOutcome out;
  Eigen::Vector2d xy(r0.x(), r0.y());
  Vec3 r = sphere_point(xy, radius, z_sign);
  const auto cost_xy = [&](const Eigen::VectorXd& p) {
    return problem.cost(sphere_point(Eigen::Vector2d(p(0), p(1)), radius, z_sign), false);
  };

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const auto lin = problem.linearize(r);
    // z = sqrt(R^2 - x^2 - y^2) on the sphere; chain rule onto (x, y).
    Eigen::MatrixX2d h_xy(lin.jacobian.rows(), 2);
    const double z = r.z();
    const double dzdx = std::abs(z) > 1e-9 ? -r.x() / z : 0.0;
    const double dzdy = std::abs(z) > 1e-9 ? -r.y() / z : 0.0;
    h_xy.col(0) = lin.jacobian.col(0) + dzdx * lin.jacobian.col(2);
    h_xy.col(1) = lin.jacobian.col(1) + dzdy * lin.jacobian.col(2);
    const Eigen::Matrix2d normal = h_xy.transpose() * h_xy;
    const Eigen::Vector2d grad = h_xy.transpose() * lin.residuals;
    if (condition_number(normal) > kMaxCondition) {
      out.warnings.emplace_back("step 2: singular normal matrix");
      break;
    }
    const Eigen::Vector2d dxy = -normal.ldlt().solve(grad);
    const ArmijoResult arm = armijo_refine(xy, dxy, cost_xy, grad, config.armijo);
    ++out.iterations;
    if (arm.underflow) {
      out.warnings.emplace_back("step 2: Armijo step underflow");
      out.converged = true;
      break;
    }
    Eigen::Vector2d step = arm.scale * dxy;
    xy += step;
    if (xy.norm() >= radius) {
      xy *= (radius * (1.0 - 1e-9)) / xy.norm();
      out.warnings.emplace_back("step 2: iterate clipped to the sphere");
    }
    r = sphere_point(xy, radius, z_sign);
    if (step.norm() < config.step2_threshold) {
      out.converged = true;
      break;
    }
  }
  out.position = r;
  out.cost = problem.cost(r, false);
  return out;
}

StepOutcome step3_unconstrained_gn(const Vec3& r0, const DopplerProblem& problem,
                                   const SolverConfig& config) {
  StepOutcome out;
  Vec3 r = r0;
  const Eigen::VectorXd& scales = problem.cost_scales();
  Eigen::VectorXd w(static_cast<Eigen::Index>(problem.size()));
  for (std::size_t j = 0; j < problem.size(); ++j) {
    w(static_cast<Eigen::Index>(j)) = 1.0 / std::sqrt(problem.observations()[j].sigma_tot);
  }
  const Eigen::VectorXd scales2 = scales.cwiseAbs2();

  auto lin = problem.linearize(r);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const Eigen::MatrixX3d h_w = w.asDiagonal() * lin.jacobian;
    const Eigen::VectorXd f_w = w.cwiseProduct(lin.residuals);
    const Mat3 normal = h_w.transpose() * h_w;
    if (condition_number(normal) > kMaxCondition) {
      out.warnings.emplace_back("step 3: rank-deficient normal matrix");
      break;
    }
    const Vec3 dr = -normal.ldlt().solve(h_w.transpose() * f_w);

    DopplerProblem::Linearization at_alpha;
    double cached_alpha = -1.0;
    const LineFunction phi = [&](double a) {
      auto l = a == 0.0 ? lin : problem.linearize(r + a * dr);
      const double value = 0.5 * l.residuals.cwiseProduct(scales).squaredNorm();
      const double slope = dr.dot(l.jacobian.transpose() * l.residuals.cwiseProduct(scales2));
      at_alpha = std::move(l);
      cached_alpha = a;
      return std::make_pair(value, slope);
    };
    const LineSearchResult ls = soft_line_search(phi, config.sls);
    ++out.iterations;
    const Vec3 step = ls.alpha * dr;
    if (ls.alpha > 0.0) {
      r += step;
      if (cached_alpha == ls.alpha) {
        lin = std::move(at_alpha);
      } else {
        lin = problem.linearize(r);
      }
    }
    if (step.norm() < config.step3_threshold) {
      out.converged = true;
      break;
    }
  }
  out.position = r;
  out.cost = 0.5 * lin.residuals.cwiseProduct(scales).squaredNorm();
  return out;
}

Vec3 subtrack_normal(std::span<const Vec3> satellite_positions) {
  if (satellite_positions.size() < 2) throw std::invalid_argument("subtrack plane needs two positions");
  Eigen::MatrixX3d m(static_cast<Eigen::Index>(satellite_positions.size()), 3);
  for (std::size_t i = 0; i < satellite_positions.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = satellite_positions[i].transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(1) > 1e-9 * sv(0))) throw std::invalid_argument("degenerate subtrack plane");
  return svd.matrixV().col(2).normalized();
}

Vec3 mirror_reflect(const Vec3& r, const Vec3& normal) {
  const Vec3 n = normal.normalized();
  const Vec3 reflected = r - 2.0 * r.dot(n) * n;
  return reflected * (r.norm() / reflected.norm());
}

Vec3 PassSolution::cost_choice() const {
  return mirror_cost < estimate.cost_final ? mirror : estimate.position;
}

PassSolution solve_single_pass(std::span<const DopplerObservation> pass_obs, const Trajectory& eph,
                               const LunarConstants& constants, const SolverConfig& config) {
  config.validate();
  PassSolution out;
  if (pass_obs.empty()) throw std::invalid_argument("pass has no observations");
  out.pass_id = pass_obs.front().pass_id;
  const DopplerProblem problem({pass_obs.begin(), pass_obs.end()}, eph, constants,
                               config.stencil_step);

  out.step1 = step1_algebraic(problem, config.step1_slice);
  out.estimate.step_history.push_back({1, out.step1.position, problem.cost(out.step1.position, true)});

  out.step2 = step2_constrained_gn(out.step1.position, problem, config);
  out.estimate.step2_iterations = out.step2.iterations;
  out.estimate.step_history.push_back({2, out.step2.position, problem.cost(out.step2.position, true)});

  const StepOutcome s3 = step3_unconstrained_gn(out.step2.position, problem, config);
  out.estimate.step3_iterations = s3.iterations;
  out.estimate.step_history.push_back({3, s3.position, s3.cost});
  out.estimate.position = s3.position;
  out.estimate.cost_final = s3.cost;
  out.estimate.converged = out.step2.converged && s3.converged;
  out.estimate.warnings = out.step2.warnings;
  out.estimate.warnings.insert(out.estimate.warnings.end(), s3.warnings.begin(), s3.warnings.end());

  std::vector<Vec3> sat;
  sat.reserve(pass_obs.size());
  for (const auto& o : pass_obs) sat.push_back(eph.position(o.t_R));
  out.normal = subtrack_normal(sat);
  const StepOutcome mirror = step3_unconstrained_gn(mirror_reflect(s3.position, out.normal), problem, config);
  out.mirror = mirror.position;
  out.mirror_cost = mirror.cost;
  return out;
}

std::vector<std::vector<DopplerObservation>> group_by_pass(std::span<const DopplerObservation> obs) {
  std::map<int, std::vector<DopplerObservation>> groups;
  for (const auto& o : obs) groups[o.pass_id].push_back(o);
  std::vector<std::vector<DopplerObservation>> out;
  for (auto& [id, g] : groups) {
    std::stable_sort(g.begin(), g.end(),
                     [](const DopplerObservation& a, const DopplerObservation& b) { return a.t_R < b.t_R; });
    out.push_back(std::move(g));
  }
  return out;
}

MultipassSolution disambiguate_multipass(std::span<const DopplerObservation> observations,
                                         const Trajectory& eph, const LunarConstants& constants,
                                         const SolverConfig& config) {
  config.validate();
  const auto groups = group_by_pass(observations);
  if (groups.size() < 2) throw std::invalid_argument("disambiguation needs at least two passes");
  std::vector<PassSolution> passes;
  for (const auto& g : groups) passes.push_back(solve_single_pass(g, eph, constants, config));
  return combine_passes(std::move(passes), observations, eph, constants, config);
}

MultipassSolution combine_passes(std::vector<PassSolution> passes,
                                 std::span<const DopplerObservation> observations,
                                 const Trajectory& eph, const LunarConstants& constants,
                                 const SolverConfig& config) {
  if (passes.size() < 2) throw std::invalid_argument("disambiguation needs at least two passes");
  MultipassSolution out;
  out.passes = std::move(passes);

  // Each side of the first pass anchors a cluster holding the nearest
  // candidate of every other pass.
  std::array<std::vector<Vec3>, 2> clusters;
  for (int side = 0; side < 2; ++side) {
    const Vec3 anchor = side == 0 ? out.passes[0].estimate.position : out.passes[0].mirror;
    clusters[side].push_back(anchor);
    for (std::size_t p = 1; p < out.passes.size(); ++p) {
      const Vec3& e = out.passes[p].estimate.position;
      const Vec3& m = out.passes[p].mirror;
      clusters[side].push_back((e - anchor).norm() <= (m - anchor).norm() ? e : m);
    }
    double total = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < clusters[side].size(); ++i) {
      for (std::size_t j = i + 1; j < clusters[side].size(); ++j) {
        total += (clusters[side][i] - clusters[side][j]).norm();
        ++pairs;
      }
    }
    out.spread[side] = total / pairs;
  }

  const DopplerProblem joint({observations.begin(), observations.end()}, eph, constants,
                             config.stencil_step);
  const auto centroid = [](const std::vector<Vec3>& pts) {
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts) c += p;
    return Vec3(c / static_cast<double>(pts.size()));
  };

  out.ambiguous = std::abs(out.spread[0] - out.spread[1]) < kClusterAmbiguity;
  StepOutcome final_step;
  if (out.ambiguous) {
    out.used_cost_fallback = true;
    const StepOutcome a = step3_unconstrained_gn(centroid(clusters[0]), joint, config);
    const StepOutcome b = step3_unconstrained_gn(centroid(clusters[1]), joint, config);
    out.chosen_cluster = b.cost < a.cost ? 1 : 0;
    final_step = out.chosen_cluster == 1 ? b : a;
  } else {
    out.chosen_cluster = out.spread[1] < out.spread[0] ? 1 : 0;
    final_step = step3_unconstrained_gn(centroid(clusters[out.chosen_cluster]), joint, config);
  }
  out.selected = clusters[out.chosen_cluster];

  SolverEstimate& est = out.estimate;
  est.position = final_step.position;
  est.cost_final = final_step.cost;
  est.converged = final_step.converged;
  est.warnings = final_step.warnings;
  for (const auto& p : out.passes) {
    est.step2_iterations += p.estimate.step2_iterations;
    est.step3_iterations += p.estimate.step3_iterations;
  }
  est.step3_iterations += final_step.iterations;
  const auto& first = out.passes[0].estimate.step_history;
  est.step_history.assign(first.begin(), first.end());
  est.step_history.push_back({3, final_step.position, final_step.cost});
  return out;
}

}  // namespace lunardop
