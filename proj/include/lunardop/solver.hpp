#ifndef LUNARDOP_SOLVER_HPP
#define LUNARDOP_SOLVER_HPP

#include <array>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lunardop/measurement.hpp"
#include "lunardop/orbit.hpp"

namespace lunardop {

struct ArmijoParams {
  double alpha = 0.1;     // fraction of the predicted decrease required
  double epsilon0 = 1.0;  // initial step scale
  double beta = 0.5;      // shrink factor
};

struct SoftLineSearchParams {
  double alpha_max = 10.0;
  int k_max = 100;
  double beta_curvature = 0.99;  // gamma = beta_curvature * phi'(0)
  double descent = 0.001;        // lambda(a) = phi(0) + descent * a * phi'(0)
};

struct SolverConfig {
  double step2_threshold = 1e-3;  // km
  double step3_threshold = 1e-5;  // km
  int max_iterations = 100;
  ArmijoParams armijo;
  SoftLineSearchParams sls;
  std::size_t step1_slice = 100;  // samples around the pass midpoint
  double stencil_step = kStencilStep;

  void validate() const;
};

/// Residuals f_j = lambda0 D_j + d(ADR)/dt_R (r) for a set of observations
/// and the receiver-side ephemeris. The ephemeris must outlive the problem.
class DopplerProblem {
 public:
  DopplerProblem(std::vector<DopplerObservation> observations, const Trajectory& eph,
                 const LunarConstants& constants, double stencil_step = kStencilStep);

  struct Linearization {
    Eigen::VectorXd residuals;
    Eigen::MatrixX3d jacobian;
  };

  std::size_t size() const { return observations_.size(); }
  const std::vector<DopplerObservation>& observations() const { return observations_; }
  const Trajectory& ephemeris() const { return *eph_; }
  const LunarConstants& constants() const { return constants_; }

  double residual(const Vec3& r, std::size_t j) const;
  Eigen::VectorXd residuals(const Vec3& r) const;
  /// Residuals with the analytic Jacobian (rows d f_j / d r).
  Linearization linearize(const Vec3& r) const;

  /// Half sum of squared residuals, each divided by lambda0 sigma_tot when weighted.
  double cost(const Vec3& r, bool weighted) const;
  Vec3 gradient(const Vec3& r, bool weighted) const;
  /// 1 / (lambda0 sigma_tot_j), the per-residual scale of the weighted cost.
  const Eigen::VectorXd& cost_scales() const { return scales_; }

 private:
  double stencil_sum(const Vec3& r, double t, Vec3* gradient) const;

  std::vector<DopplerObservation> observations_;
  const Trajectory* eph_;
  LunarConstants constants_;
  double step_;
  Eigen::VectorXd scales_;
};

/// Geometric Jacobian row: -(1/|r_rs|) (v - <v, r_rs> r_rs / |r_rs|^2).
/// Throws std::invalid_argument when r_rs is zero.
Vec3 geometric_jacobian_row(const Vec3& r_rs, const Vec3& v);

/// Analytic derivative of one residual with respect to r: the stencil
/// applied to the light-time corrected range gradients.
Vec3 jacobian_row(const Vec3& r, const DopplerObservation& obs, const Trajectory& eph,
                  const LunarConstants& constants, double stencil_step = kStencilStep);

struct ArmijoResult {
  double scale = 0.0;  // epsilon; the refined step is scale * dx
  bool underflow = false;
  int evaluations = 0;
};

/// Halves epsilon until J(x + eps dx) - J(x) < alpha eps grad.dx. Gives up
/// with a zero step once epsilon falls below 2^-60.
ArmijoResult armijo_refine(const Eigen::VectorXd& x, const Eigen::VectorXd& dx,
                           const std::function<double(const Eigen::VectorXd&)>& cost,
                           const Eigen::VectorXd& gradient, const ArmijoParams& params = {});

struct LineSearchResult {
  double alpha = 0.0;
  int evaluations = 0;
  bool exhausted = false;  // k_max reached
};

/// phi(a) and phi'(a) along the search direction.
using LineFunction = std::function<std::pair<double, double>(double)>;

/// Soft line search with bracket expansion and safeguarded quadratic
/// interpolation. Returns 0 when phi'(0) >= 0 or when no decrease was found.
LineSearchResult soft_line_search(const LineFunction& phi, const SoftLineSearchParams& params = {});

struct StepRecord {
  int step = 0;
  Vec3 position = Vec3::Zero();
  double cost = 0.0;
};

struct SolverEstimate {
  Vec3 position = Vec3::Zero();
  std::vector<StepRecord> step_history;
  int step2_iterations = 0;
  int step3_iterations = 0;
  bool converged = false;
  double cost_final = 0.0;  // weighted cost at `position`
  std::vector<std::string> warnings;
};

struct Step1Result {
  Vec3 position = Vec3::Zero();
  std::array<Vec3, 2> candidates{Vec3::Zero(), Vec3::Zero()};
  Vec3 pca = Vec3::Zero();
  double cross_track = 0.0;  // km
  int pairs_used = 0;
  bool clamped = false;
};

/// Algebraic initialisation from the middle slice of one pass: point of
/// closest approach from Doppler cone angles, cross-track distance, both
/// cross-track signs projected to the surface; keeps the lower-cost one.
Step1Result step1_algebraic(const DopplerProblem& pass, std::size_t slice = 100);

struct StepOutcome {
  Vec3 position = Vec3::Zero();
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;
  std::vector<std::string> warnings;
};

/// Gauss-Newton on the surface sphere parameterised by (x, y), each step
/// refined by Armijo's rule. Requires |r0| = R_M.
StepOutcome step2_constrained_gn(const Vec3& r0, const DopplerProblem& problem,
                                 const SolverConfig& config = {});

/// Weighted Gauss-Newton in 3D, weights 1/sqrt(sigma_tot), each step refined
/// by the soft line search on the weighted cost.
StepOutcome step3_unconstrained_gn(const Vec3& r0, const DopplerProblem& problem,
                                   const SolverConfig& config = {});

/// Unit normal of the least-squares plane through the origin containing the
/// satellite positions. Throws std::invalid_argument for collinear input.
Vec3 subtrack_normal(std::span<const Vec3> satellite_positions);

/// Reflection of r across the plane with unit normal `normal`; |r| preserved.
Vec3 mirror_reflect(const Vec3& r, const Vec3& normal);

struct PassSolution {
  int pass_id = 0;
  Step1Result step1;
  StepOutcome step2;
  SolverEstimate estimate;  // steps 1-3
  Vec3 mirror = Vec3::Zero();
  double mirror_cost = 0.0;
  Vec3 normal = Vec3::UnitZ();

  /// The lower-weighted-cost candidate of {estimate, mirror}.
  Vec3 cost_choice() const;
};

/// Three-step pipeline on one pass plus the step-3 refined mirror candidate.
PassSolution solve_single_pass(std::span<const DopplerObservation> pass_obs, const Trajectory& eph,
                               const LunarConstants& constants, const SolverConfig& config = {});

struct MultipassSolution {
  SolverEstimate estimate;
  std::vector<PassSolution> passes;
  std::vector<Vec3> selected;          // chosen candidate per pass
  std::array<double, 2> spread{0, 0};  // mean pairwise distance per cluster, km
  int chosen_cluster = 0;
  bool ambiguous = false;
  bool used_cost_fallback = false;
};

inline constexpr double kClusterAmbiguity = 1.0;  // km

/// Solves each pass, picks the candidate cluster that agrees across passes
/// and finishes with a joint step 3 over all observations. Throws
/// std::invalid_argument with fewer than two passes.
MultipassSolution disambiguate_multipass(std::span<const DopplerObservation> observations,
                                         const Trajectory& eph, const LunarConstants& constants,
                                         const SolverConfig& config = {});

/// Disambiguation from already solved passes; `observations` holds every
/// sample of those passes for the joint solve.
MultipassSolution combine_passes(std::vector<PassSolution> passes,
                                 std::span<const DopplerObservation> observations,
                                 const Trajectory& eph, const LunarConstants& constants,
                                 const SolverConfig& config = {});

/// Observations grouped by pass_id, ascending.
std::vector<std::vector<DopplerObservation>> group_by_pass(std::span<const DopplerObservation> obs);

}  // namespace lunardop

#endif  // LUNARDOP_SOLVER_HPP
