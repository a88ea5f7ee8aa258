#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "pointer/reference.hpp"

using namespace pointer;

namespace {

ModelParams const unit{1, 1, 1, 1};

DensityMatrix cat(Grid const &grid, double a, double b, double sigma)
{
  Eigen::VectorXcd psi = gaussian_packet(grid, a, sigma).amplitudes() + gaussian_packet(grid, b, sigma, 0.4).amplitudes();
  return DensityMatrix::pure(WaveFunction(grid, psi));
}

} // namespace

TEST_CASE("decoherence only: exact exponential decay of the off-diagonals")
{
  Grid const grid = Grid::centered(40, 128);
  DensityMatrix const rho0 = cat(grid, -6, 7, 1.2);
  LocalizationRate const F(ModelParams{0.8, 0.6, 1, 1});
  MasterConfig cfg;
  cfg.kinetic = false;
  cfg.dt = 0.05;
  double const t = 2.3;
  auto const res = evolve_master(rho0, t, cfg, ModelParams{0.8, 0.6, 1, 1}, F);
  double worst = 0;
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    for (Eigen::Index j = 0; j < grid.n; ++j) {
      Complex const want = std::exp(-F(grid.x(i) - grid.x(j)) * t) * rho0.kernel()(i, j);
      Complex const got = res.final_state.kernel()(i, j);
      if (std::abs(want) > 1e-290) {
        worst = std::max(worst, std::abs(got - want) / std::abs(want));
      }
    }
  }
  CHECK(worst < 1e-12);
  CHECK(res.final_state.diagonal() == rho0.diagonal());
}

TEST_CASE("no collisions: free dispersion of a Gaussian")
{
  Grid const grid = Grid::centered(80, 256);
  double const sigma = 1.5, t = 6;
  MasterConfig cfg;
  cfg.dt = 0.5; // the kinetic flow is exact; steps only matter for the edge monitor
  auto const res = evolve_master(DensityMatrix::pure(gaussian_packet(grid, 2.0, sigma, 0.5)), t, cfg, unit,
                                 LocalizationRate::disabled(unit));
  Eigen::VectorXd const diag = res.final_state.diagonal();
  double const st = oracle::free_spread(sigma, t);
  double worst = 0;
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    worst = std::max(worst, std::abs(diag[i] - oracle::gaussian_pdf(grid.x(i) - 2 - 0.5 * t, st)));
  }
  CHECK(worst / oracle::gaussian_pdf(0, st) < 1e-3);
  CHECK(res.final_state.purity() == doctest::Approx(1).epsilon(1e-10));
}

TEST_CASE("cat state: off-diagonal blocks decay at gamma, diagonal blocks persist")
{
  Grid const grid = Grid::centered(128, 128);
  DensityMatrix const rho0 = cat(grid, -28, 28, 1.5);
  MasterConfig cfg;
  cfg.dt = 0.02;
  cfg.snapshot_times = {0.5, 1, 2, 3};
  ModelParams const p{1, 0.5, 1, 1};
  auto const res = evolve_master(rho0, 3, cfg, p, LocalizationRate(p));
  Eigen::Index const h = grid.n / 2;
  double const off0 = rho0.kernel().topRightCorner(h, h).norm();
  for (auto const &[t, rho] : res.snapshots) {
    if (t == 0) {
      continue;
    }
    CAPTURE(t);
    double const off = rho.kernel().topRightCorner(h, h).norm();
    CHECK(off / off0 == doctest::Approx(std::exp(-t)).epsilon(1e-3));
    double const left = rho.kernel().topLeftCorner(h, h).diagonal().real().sum() * grid.dx;
    CHECK(left == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("invariants along the evolution")
{
  Grid const grid = Grid::centered(48, 128);
  DensityMatrix const rho0 = cat(grid, -5, 4, 0.9);
  MasterConfig cfg;
  cfg.dt = 0.01;
  auto const res = evolve_master(rho0, 2, cfg, ModelParams{1, 0.7, 1, 1}, LocalizationRate(ModelParams{1, 0.7, 1, 1}));
  CHECK(res.max_hermiticity_error < 1e-12);
  CHECK(res.max_trace_error < 1e-10);
  double prev = rho0.purity() + 1e-12;
  for (double p : res.purity) {
    CHECK(p <= prev);
    CHECK(p > 0);
    prev = p;
  }
}

TEST_CASE("splitting converges at second order")
{
  Grid const grid = Grid::centered(48, 128);
  DensityMatrix const rho0 = cat(grid, -5, 4, 0.9);
  LocalizationRate const F(unit);
  auto run = [&](double dt) {
    MasterConfig cfg;
    cfg.dt = dt;
    return evolve_master(rho0, 1, cfg, unit, F).final_state;
  };
  DensityMatrix const a = run(0.1), b = run(0.05), c = run(0.025);
  double const e1 = trace_distance(a, b), e2 = trace_distance(b, c);
  MESSAGE("successive differences " << e1 << ", " << e2);
  CHECK(e1 / e2 == doctest::Approx(4).epsilon(0.15));
}

TEST_CASE("trace distance")
{
  Grid const grid = Grid::centered(64, 128);
  WaveFunction const psi = gaussian_packet(grid, -12.0, 1.0);
  WaveFunction const phi = gaussian_packet(grid, 12.0, 1.0, 0.3);
  DensityMatrix const a = DensityMatrix::pure(psi), b = DensityMatrix::pure(phi);
  CHECK(trace_distance(a, a) == doctest::Approx(0).scale(1));
  CHECK(trace_distance(a, a) < 1e-14);
  CHECK(std::abs(trace_distance(a, b) - 1) < 1e-10);
  for (double eps : {1e-3, 0.1, 0.5}) {
    DensityMatrix const mix(grid, (1 - eps) * a.kernel() + eps * b.kernel());
    CHECK(std::abs(trace_distance(a, mix) - eps) < 1e-8);
  }
  // Non-orthogonal pure states: sqrt(1 - |<psi|phi>|^2).
  WaveFunction const near = gaussian_packet(grid, -11.0, 1.0);
  double const ov = std::norm(psi.inner(near));
  CHECK(std::abs(trace_distance(a, DensityMatrix::pure(near)) - std::sqrt(1 - ov)) < 1e-10);

  Eigen::MatrixXcd skew = a.kernel();
  skew(3, 60) += Complex(0.1, 0);
  CHECK_THROWS_AS(trace_distance(a, DensityMatrix(grid, skew)), DomainError);
  CHECK_THROWS_AS(trace_distance(a, DensityMatrix::pure(gaussian_packet(Grid::centered(64, 64), 0.0, 1.0))), DimensionError);
}

TEST_CASE("coherence profile")
{
  Grid const grid = Grid::centered(64, 256);
  SUBCASE("pure Gaussian")
  {
    double const sigma = 1.3;
    auto const fit = coherence_profile(DensityMatrix::pure(gaussian_packet(grid, 3.0, sigma, 0.7)));
    CHECK(fit.gaussian);
    CHECK(fit.length == doctest::Approx(std::sqrt(8 * std::numbers::pi) * sigma).epsilon(1e-3));
    CHECK(fit.center == doctest::Approx(3).epsilon(0.01));
  }
  SUBCASE("decohered mixture of far packets keeps the single-packet length")
  {
    double const sigma = 1.1;
    DensityMatrix const l = DensityMatrix::pure(gaussian_packet(grid, -15.0, sigma));
    DensityMatrix const r = DensityMatrix::pure(gaussian_packet(grid, 15.0, sigma));
    DensityMatrix const mix(grid, 0.6 * l.kernel() + 0.4 * r.kernel());
    auto const fit = coherence_profile(mix);
    CHECK(fit.length == doctest::Approx(std::sqrt(8 * std::numbers::pi) * sigma).epsilon(1e-3));
    CHECK(fit.center == doctest::Approx(-15).epsilon(0.01));
  }
  SUBCASE("thermal-like Gaussian mixture is shorter")
  {
    // Packet of spread sigma with Gaussian momentum spread delta:
    // |rho(xbar + s/2, xbar - s/2)| ~ exp(-s^2/(8 sigma^2) - delta^2 s^2/2), Lambda^2 = pi / (1/(8 sigma^2) + delta^2/2).
    double const sigma = 2.0, delta = 0.4;
    Eigen::MatrixXcd k(grid.n, grid.n);
    for (Eigen::Index i = 0; i < grid.n; ++i) {
      for (Eigen::Index j = 0; j < grid.n; ++j) {
        double const x = grid.x(i), y = grid.x(j);
        k(i, j) = oracle::gaussian_pdf((x + y) / 2, sigma) *
                  std::exp(-(x - y) * (x - y) / (8 * sigma * sigma) - delta * delta * (x - y) * (x - y) / 2);
      }
    }
    k /= k.diagonal().real().sum() * grid.dx;
    auto const fit = coherence_profile(DensityMatrix(grid, k));
    double const want = std::sqrt(std::numbers::pi / (1 / (8 * sigma * sigma) + delta * delta / 2));
    CHECK(fit.gaussian);
    CHECK(fit.length == doctest::Approx(want).epsilon(1e-3));
    CHECK(fit.length < std::sqrt(8 * std::numbers::pi) * sigma);
  }
  SUBCASE("non-Gaussian profile is flagged")
  {
    // Two coherent packets: the antidiagonal at the peak has a side bump.
    DensityMatrix const c = cat(grid, -1.5, 3.5, 0.5);
    auto const fit = coherence_profile(c);
    CHECK_FALSE(fit.gaussian);
    CHECK(fit.s.size() == fit.magnitude.size());
  }
}

TEST_CASE("reference solver errors")
{
  Grid const small = Grid::centered(16, 64);
  CHECK_THROWS_AS(evolve_master(DensityMatrix::pure(gaussian_packet(small, 0.0, 0.3)), 40, MasterConfig{}, unit,
                                LocalizationRate::disabled(unit)),
                  BoundaryError);
  Grid const big = Grid::centered(64, 512);
  CHECK_THROWS_AS(evolve_master(DensityMatrix::pure(gaussian_packet(big, 0.0, 1.0)), 1, MasterConfig{}, unit,
                                LocalizationRate(unit)),
                  DimensionError);
  DensityMatrix const half(small, 0.5 * DensityMatrix::pure(gaussian_packet(small, 0.0, 1.0)).kernel());
  CHECK_THROWS_AS(evolve_master(half, 1, MasterConfig{}, unit, LocalizationRate(unit)), DomainError);
  MasterConfig bad;
  bad.dt = 0;
  CHECK_THROWS_AS(evolve_master(DensityMatrix::pure(gaussian_packet(small, 0.0, 1.0)), 1, bad, unit, LocalizationRate(unit)),
                  ConfigError);
}
