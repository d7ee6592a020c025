#ifndef LUNARDOP_DOP_HPP
#define LUNARDOP_DOP_HPP

#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "lunardop/measurement.hpp"
#include "lunardop/orbit.hpp"

namespace lunardop {

/// Returned for singular or under-determined geometry.
inline constexpr double kGdopSingular = std::numeric_limits<double>::infinity();

/// sqrt(trace((H^T H)^-1)); kGdopSingular when cond(H^T H) > 1e12 or H has
/// fewer than three rows.
double gdop(const Eigen::MatrixX3d& h_dop);

/// Same value from the reciprocal eigenvalues of H^T H.
double gdop_eigen(const Eigen::MatrixX3d& h_dop);

/// Rows lambda0 R_j / sigma_j for every sample of `series` above the mask,
/// R_j the geometric Jacobian row at receiver r.
Eigen::MatrixX3d dop_matrix(const Vec3& r, const SatelliteStateSeries& series,
                            const ErrorBudgetConfig& budget, const LunarConstants& constants);

double gdop_at(const Vec3& r, const SatelliteStateSeries& series, const ErrorBudgetConfig& budget,
               const LunarConstants& constants);

/// Polar GDOP map, 1 deg in latitude from 70 to 90 and 5 deg in longitude.
struct GdopGrid {
  static constexpr int kLatCells = 20;
  static constexpr int kLonCells = 72;
  static constexpr double kLatMin = 70.0;  // deg
  static constexpr double kLatStep = 1.0;
  static constexpr double kLonStep = 5.0;

  std::vector<double> values = std::vector<double>(kLatCells * kLonCells, kGdopSingular);

  static double lat_center(int i) { return kLatMin + (i + 0.5) * kLatStep; }
  static double lon_center(int k) { return (k + 0.5) * kLonStep; }
  double& at(int i, int k) { return values[static_cast<std::size_t>(i * kLonCells + k)]; }
  double at(int i, int k) const { return values[static_cast<std::size_t>(i * kLonCells + k)]; }
};

/// Evaluates every cell centre on the surface against all samples of
/// `series`. Cells are split across `threads` workers (0 = hardware).
GdopGrid gdop_map(const SatelliteStateSeries& series, const ErrorBudgetConfig& budget,
                  const LunarConstants& constants, unsigned threads = 0);

/// `lat,lon,gdop` rows after a schema comment line; singular cells as `inf`.
void write_gdop_csv(std::ostream& out, const GdopGrid& grid);

}  // namespace lunardop

#endif  // LUNARDOP_DOP_HPP
