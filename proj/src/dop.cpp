#include "lunardop/dop.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "lunardop/io.hpp"
#include "lunardop/solver.hpp"

namespace lunardop {

namespace {

constexpr double kMaxCondition = 1e12;

bool well_conditioned(const Eigen::SelfAdjointEigenSolver<Mat3>& es) {
  const Vec3& ev = es.eigenvalues();
  return ev.minCoeff() > 0.0 && ev.maxCoeff() / ev.minCoeff() <= kMaxCondition;
}

}  // namespace

double gdop(const Eigen::MatrixX3d& h_dop) {
  if (h_dop.rows() < 3) return kGdopSingular;
  const Mat3 normal = h_dop.transpose() * h_dop;
  if (!well_conditioned(Eigen::SelfAdjointEigenSolver<Mat3>(normal, Eigen::EigenvaluesOnly))) {
    return kGdopSingular;
  }
  return std::sqrt(normal.inverse().trace());
}

double gdop_eigen(const Eigen::MatrixX3d& h_dop) {
  if (h_dop.rows() < 3) return kGdopSingular;
  const Eigen::SelfAdjointEigenSolver<Mat3> es(h_dop.transpose() * h_dop, Eigen::EigenvaluesOnly);
  if (!well_conditioned(es)) return kGdopSingular;
  return std::sqrt(es.eigenvalues().cwiseInverse().sum());
}

Eigen::MatrixX3d dop_matrix(const Vec3& r, const SatelliteStateSeries& series,
                            const ErrorBudgetConfig& budget, const LunarConstants& constants) {
  std::vector<Vec3> rows;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Vec3& sat = series.positions[i];
    if (!(elevation_angle(r, sat) > budget.mask)) continue;
    const Vec3 r_rs = r - sat;
    const double sigma = sigma_tot(budget.components(r_rs.norm(), constants));
    rows.push_back(constants.wavelength() / sigma * geometric_jacobian_row(r_rs, series.velocities[i]));
  }
  Eigen::MatrixX3d h(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t j = 0; j < rows.size(); ++j) h.row(static_cast<Eigen::Index>(j)) = rows[j].transpose();
  return h;
}

double gdop_at(const Vec3& r, const SatelliteStateSeries& series, const ErrorBudgetConfig& budget,
               const LunarConstants& constants) {
  return gdop(dop_matrix(r, series, budget, constants));
}

GdopGrid gdop_map(const SatelliteStateSeries& series, const ErrorBudgetConfig& budget,
                  const LunarConstants& constants, unsigned threads) {
  series.validate();
  GdopGrid grid;
  const int cells = GdopGrid::kLatCells * GdopGrid::kLonCells;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cells));
  const auto work = [&](unsigned worker) {
    for (int c = static_cast<int>(worker); c < cells; c += static_cast<int>(threads)) {
      const int i = c / GdopGrid::kLonCells;
      const int k = c % GdopGrid::kLonCells;
      const Vec3 r = surface_point(GdopGrid::lat_center(i) * kDegToRad,
                                   GdopGrid::lon_center(k) * kDegToRad, 0.0, constants);
      grid.at(i, k) = gdop_at(r, series, budget, constants);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  return grid;
}

void write_gdop_csv(std::ostream& out, const GdopGrid& grid) {
  out << "# schema: lunardop-gdop/1\n" << "lat_deg,lon_deg,gdop\n";
  for (int i = 0; i < GdopGrid::kLatCells; ++i) {
    for (int k = 0; k < GdopGrid::kLonCells; ++k) {
      const double g = grid.at(i, k);
      out << format_double(GdopGrid::lat_center(i)) << ',' << format_double(GdopGrid::lon_center(k))
          << ',' << (std::isfinite(g) ? format_double(g) : std::string("inf")) << '\n';
    }
  }
}

}  // namespace lunardop
