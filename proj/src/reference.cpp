#include "pointer/reference.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pointer {

namespace {

// Dense matrix of the spectral propagator exp(-i hbar k^2 tau / 2m), built column by column.
Eigen::MatrixXcd kinetic_matrix(Grid const &grid, ModelParams const &params, double tau)
{
  Spectral spectral;
  Eigen::VectorXd const k = grid.wavenumbers();
  Eigen::VectorXcd phase(grid.n);
  for (Eigen::Index j = 0; j < grid.n; ++j) {
    phase[j] = std::polar(1.0, -params.hbar * k[j] * k[j] * tau / (2 * params.mass));
  }
  Eigen::MatrixXcd u(grid.n, grid.n);
  Eigen::VectorXcd col(grid.n);
  for (Eigen::Index j = 0; j < grid.n; ++j) {
    col.setZero();
    col[j] = 1.0;
    spectral.multiply_in_fourier(col, phase);
    u.col(j) = col;
  }
  return u;
}

double edge_mass(DensityMatrix const &rho)
{
  Eigen::Index const edge = std::max<Eigen::Index>(1, rho.grid().n / 16);
  Eigen::VectorXd const d = rho.diagonal();
  return std::max(d.head(edge).sum(), d.tail(edge).sum()) * rho.grid().dx;
}

} // namespace

MasterResult evolve_master(DensityMatrix const &rho0, double t, MasterConfig const &cfg, ModelParams const &params,
                           LocalizationRate const &rate)
{
  Grid const &grid = rho0.grid();
  if (grid.n > reference_max_points) {
    throw DimensionError("reference solver is limited to " + std::to_string(reference_max_points) + " grid points");
  }
  if (!(cfg.dt > 0) || !(t >= 0)) {
    throw ConfigError("evolve_master needs dt > 0 and t >= 0");
  }
  if (rho0.hermiticity_error() > 1e-12 * rho0.kernel().cwiseAbs().maxCoeff() + 1e-300 ||
      std::abs(rho0.trace() - 1) > 1e-10) {
    throw DomainError("initial density matrix must be Hermitian with unit trace");
  }

  auto const steps = static_cast<long>(std::ceil(t / cfg.dt - 1e-9));
  double const dt = steps > 0 ? t / static_cast<double>(steps) : cfg.dt;

  Eigen::MatrixXcd u;
  if (cfg.kinetic) {
    u = kinetic_matrix(grid, params, dt / 2);
  }
  // Decoherence uses the actual separation x - x', not the periodic image.
  Eigen::MatrixXd decay(grid.n, grid.n);
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    for (Eigen::Index j = 0; j < grid.n; ++j) {
      decay(i, j) = std::exp(-rate(grid.x(i) - grid.x(j)) * dt);
    }
  }

  MasterResult res;
  res.final_state = rho0;
  Eigen::MatrixXcd &rho = res.final_state.kernel();

  std::vector<double> snaps = cfg.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;
  auto take_snapshots = [&](double now) {
    while (next_snap < snaps.size() && snaps[next_snap] <= now + 0.5 * dt) {
      res.snapshots.emplace_back(now, res.final_state);
      ++next_snap;
    }
  };
  take_snapshots(0.0);

  Eigen::MatrixXcd tmp(grid.n, grid.n);
  for (long s = 1; s <= steps; ++s) {
    if (cfg.kinetic) {
      tmp.noalias() = u * rho;
      rho.noalias() = tmp * u.adjoint();
    }
    rho.array() *= decay.array().cast<Complex>();
    if (cfg.kinetic) {
      tmp.noalias() = u * rho;
      rho.noalias() = tmp * u.adjoint();
    }
    double const now = dt * static_cast<double>(s);
    res.max_hermiticity_error = std::max(res.max_hermiticity_error, res.final_state.hermiticity_error());
    res.max_trace_error = std::max(res.max_trace_error, std::abs(res.final_state.trace() - 1));
    res.purity.push_back(res.final_state.purity());
    if (cfg.kinetic) {
      double const m = edge_mass(res.final_state);
      if (m > cfg.boundary_tol) {
        throw BoundaryError("probability " + std::to_string(m) + " reached the grid edge at t = " +
                            std::to_string(now) + "; enlarge the domain");
      }
    }
    take_snapshots(now);
  }
  return res;
}

double trace_distance(DensityMatrix const &a, DensityMatrix const &b, double hermitian_tol)
{
  require_same_grid(a.grid(), b.grid(), "trace distance");
  Eigen::MatrixXcd const d = a.matrix() - b.matrix();
  if ((d - d.adjoint()).cwiseAbs().maxCoeff() > hermitian_tol) {
    throw DomainError("trace distance: difference is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

CoherenceFit coherence_profile(DensityMatrix const &rho, double floor)
{
  Grid const &grid = rho.grid();
  CoherenceFit fit;
  Eigen::Index c = 0;
  rho.diagonal().maxCoeff(&c);
  fit.center = grid.x(c);
  double const peak = std::abs(rho.kernel()(c, c));

  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  double m = 0;
  for (Eigen::Index k = 0; c + k < grid.n && c - k >= 0; ++k) {
    double const s = 2 * static_cast<double>(k) * grid.dx;
    double const r = std::abs(rho.kernel()(c + k, c - k)) / peak;
    fit.s.push_back(s);
    fit.magnitude.push_back(r);
    if (r < floor) {
      continue;
    }
    double const x = s * s, y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    m += 1;
  }
  if (m < 3) {
    return fit;
  }
  double const cxx = sxx - sx * sx / m;
  double const cxy = sxy - sx * sy / m;
  double const cyy = syy - sy * sy / m;
  double const slope = cxy / cxx;
  fit.r_squared = cyy > 0 ? cxy * cxy / (cxx * cyy) : 1.0;
  if (slope < 0) {
    fit.length = std::sqrt(-std::numbers::pi / slope);
  }
  fit.gaussian = fit.r_squared >= 0.95 && slope < 0;
  return fit;
}

} // namespace pointer
