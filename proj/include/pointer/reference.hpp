#pragma once

#include "grid.hpp"
#include "kernels.hpp"

#include <utility>
#include <vector>

namespace pointer {

/// Kernel rho(x_i, x_j) on a periodic grid. As an operator, rho acts as R = rho dx,
/// so Tr rho = sum_i rho_ii dx and Tr rho^2 = ||rho||_F^2 dx^2.
template <typename Real>
class BasicDensityMatrix
{
public:
  using Complex = std::complex<Real>;
  using Kernel = MatrixX<Complex>;

  BasicDensityMatrix() = default;
  BasicDensityMatrix(BasicGrid<Real> const &grid, Kernel rho)
    : grid_(grid)
    , rho_(std::move(rho))
  {
    if (rho_.rows() != grid_.n || rho_.cols() != grid_.n) {
      throw DimensionError("density matrix shape does not match grid");
    }
  }

  static BasicDensityMatrix pure(BasicWaveFunction<Real> const &psi)
  {
    auto const &a = psi.amplitudes();
    return BasicDensityMatrix(psi.grid(), a * a.adjoint());
  }

  BasicGrid<Real> const &grid() const { return grid_; }
  Kernel const &kernel() const { return rho_; }
  Kernel &kernel() { return rho_; }

  /// Operator matrix R = rho dx (trace one, eigenvalues are populations).
  Kernel matrix() const { return rho_ * grid_.dx; }

  Real trace() const { return rho_.diagonal().real().sum() * grid_.dx; }
  Real purity() const { return rho_.cwiseAbs2().sum() * grid_.dx * grid_.dx; }
  Real hermiticity_error() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }
  VectorX<Real> diagonal() const { return rho_.diagonal().real(); }

private:
  BasicGrid<Real> grid_;
  Kernel rho_;
};

using DensityMatrix = BasicDensityMatrix<double>;

/// Largest grid accepted by the dense reference solver.
inline constexpr Eigen::Index reference_max_points = 256;

struct MasterConfig
{
  double dt = 0.01;
  bool kinetic = true;
  /// Maximum probability allowed in the outer sixteenth of the grid on either side.
  double boundary_tol = 1e-6;
  std::vector<double> snapshot_times;
};

struct MasterResult
{
  DensityMatrix final_state;
  std::vector<std::pair<double, DensityMatrix>> snapshots;
  std::vector<double> purity; // after every step
  double max_hermiticity_error = 0;
  double max_trace_error = 0;
};

/// Strang splitting for d rho/dt = -(i/hbar)[p^2/2m, rho] - F(x - x') rho: exact kinetic half steps
/// U rho U^dagger around the exact decoherence factor exp(-F(x - x') dt). Throws BoundaryError when
/// free spreading reaches the edge of the periodic grid.
MasterResult evolve_master(DensityMatrix const &rho0, double t, MasterConfig const &cfg, ModelParams const &params,
                           LocalizationRate const &rate);

/// 1/2 sum |eig(R_a - R_b)|, with R = rho dx.
double trace_distance(DensityMatrix const &a, DensityMatrix const &b, double hermitian_tol = 1e-8);

struct CoherenceFit
{
  double length = 0; // Lambda in exp(-pi s^2 / Lambda^2)
  double r_squared = 0;
  bool gaussian = false; // r_squared >= 0.95
  double center = 0;
  std::vector<double> s;
  std::vector<double> magnitude;
};

/// Fit of |rho(xbar + s/2, xbar - s/2)| / |rho(xbar, xbar)| at the density peak xbar to exp(-pi s^2/Lambda^2),
/// using samples down to `floor` of the peak.
CoherenceFit coherence_profile(DensityMatrix const &rho, double floor = 1e-6);

} // namespace pointer
