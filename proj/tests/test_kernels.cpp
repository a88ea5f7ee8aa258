#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "pointer/kernels.hpp"

#include <random>

using namespace pointer;

TEST_CASE("F vanishes at zero and saturates at gamma")
{
  LocalizationRate const F(ModelParams{1.3, 0.7, 1, 1});
  CHECK(F(0.0) == 0.0);
  CHECK(F(1e3) == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(F(-1e3) == doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("Gaussian closed form at s = hbar/sigma_G")
{
  LocalizationRate const F(ModelParams{1, 1, 1, 1});
  CHECK(std::abs(F(1.0) - (1 - std::exp(-0.5))) < 1e-15);
  CHECK(std::abs(F(1.0) - oracle::localization_rate_quadrature(1, 1, 1, 1)) < 1e-10);
}

TEST_CASE("Gaussian closed form matches quadrature on [0, 20 hbar/sigma_G]")
{
  ModelParams const p{2.0, 0.5, 3.0, 1.5};
  LocalizationRate const F(p);
  double worst = 0;
  for (int i = 0; i <= 200; ++i) {
    double const s = 20 * p.hbar / p.sigma_G * i / 200.0;
    worst = std::max(worst, std::abs(F(s) - oracle::localization_rate_quadrature(p.gamma, p.sigma_G, p.hbar, s)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("pointwise invariants for Gaussian and tabulated G")
{
  ModelParams const p{1, 1, 1, 1};
  // Symmetric triangle of unit area.
  auto const tri = MomentumDistribution::tabulated({-2, 0, 2}, {0, 0.5, 0});
  // Asymmetric: accepted, complex characteristic function.
  auto const skew = MomentumDistribution::tabulated({0, 1, 2}, {2, 0, 0});
  for (auto const &g : {MomentumDistribution::gaussian(1.0), tri, skew}) {
    LocalizationRate const F(p, g);
    CHECK(std::abs(F(0.0)) < 1e-14);
    for (int i = -400; i <= 400; ++i) {
      double const s = i * 0.05;
      CHECK(F(s) >= -1e-14);
      CHECK(F(s) <= 2 * p.gamma + 1e-14);
      CHECK(std::abs(F(s) - F(-s)) < 1e-12);
    }
  }
}

TEST_CASE("tabulated G characteristic matches quadrature")
{
  auto const tri = MomentumDistribution::tabulated({-2, -1, 0, 1, 2}, {0, 0.25, 0.5, 0.25, 0});
  for (double s : {0.0, 1e-6, 0.3, 1.0, 4.0, 17.0}) {
    double const ref =
      oracle::integrate([&](double q) { return tri.density(q) * std::cos(q * s); }, -2, 0, 1e-14) +
      oracle::integrate([&](double q) { return tri.density(q) * std::cos(q * s); }, 0, 2, 1e-14);
    CHECK(std::abs(tri.characteristic(s, 1.0).real() - ref) < 1e-10);
  }
}

TEST_CASE("invalid G and parameters")
{
  CHECK_THROWS_AS(MomentumDistribution::tabulated({-1, 1}, {0.4, 0.4}), ConfigError);
  CHECK_THROWS_AS(MomentumDistribution::tabulated({-1, 1}, {-1, 2}), ConfigError);
  CHECK_THROWS_AS(MomentumDistribution::tabulated({1, -1}, {0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(MomentumDistribution::gaussian(0.0), ConfigError);
  CHECK_THROWS_AS((ModelParams{0, 1, 1, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelParams{1, 1, -1, 1}.validate()), ConfigError);
}

TEST_CASE("nondimensionalisation")
{
  SUBCASE("kappa from gamma = 2")
  {
    ModelParams const p{2, 1, 1, 1};
    CHECK(p.kappa() == 0.5);
    auto const nd = nondimensionalize(p);
    CHECK(nd.gamma == 1);
    CHECK(nd.mass == 1);
    CHECK(nd.hbar == 1);
    CHECK(nd.sigma_G == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  }
  SUBCASE("unit parameters are fixed")
  {
    auto const nd = nondimensionalize(ModelParams{1, 1, 1, 1});
    CHECK(nd.sigma_G == 1);
    CHECK(nd.kappa() == 1);
  }
  SUBCASE("round trip")
  {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lg(-3, 3);
    for (int i = 0; i < 100; ++i) {
      ModelParams const p{std::pow(10, lg(rng)), std::pow(10, lg(rng)), std::pow(10, lg(rng)), std::pow(10, lg(rng))};
      auto const back = restore(nondimensionalize(p), unit_scales(p));
      CHECK(std::abs(back.gamma / p.gamma - 1) < 1e-12);
      CHECK(std::abs(back.sigma_G / p.sigma_G - 1) < 1e-12);
      CHECK(std::abs(back.mass / p.mass - 1) < 1e-12);
      CHECK(std::abs(back.hbar / p.hbar - 1) < 1e-12);
      CHECK(std::abs(nondimensionalize(p).kappa() / p.kappa() - 1) < 1e-12);
    }
  }
}

namespace {

double rel_max(Eigen::VectorXd const &a, Eigen::VectorXd const &b)
{
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("spectral convolution equals the direct sum")
{
  ModelParams const p{1, 1, 1, 1};
  LocalizationRate const F(p);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (Eigen::Index n : {16, 64, 256, 1024}) {
    // Domain wide enough that F is flat (to 1e-12) at half the period.
    Grid const grid = Grid::centered(40.0, n);
    Eigen::VectorXd g = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return u(rng); });
    g /= g.sum() * grid.dx;
    Convolver conv(grid, F);
    CHECK(rel_max(conv.apply(g), oracle::direct_convolution(g, grid, F)) < 1e-9);
  }
}

TEST_CASE("convolution of a single cell reproduces F around that cell")
{
  LocalizationRate const F(ModelParams{1, 1, 1, 1});
  Grid const grid = Grid::centered(40.0, 256);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(grid.n);
  Eigen::Index const k = 100;
  g[k] = 1 / grid.dx;
  Convolver conv(grid, F);
  Eigen::VectorXd const out = conv.apply(g);
  double worst = 0;
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    double d = grid.x(i) - grid.x(k);
    d -= grid.length() * std::round(d / grid.length());
    worst = std::max(worst, std::abs(out[i] - F(d)));
  }
  CHECK(worst < 1e-13);
}

TEST_CASE("broad uniform density against the direct sum")
{
  LocalizationRate const F(ModelParams{1, 1, 1, 1});
  Grid const grid = Grid::centered(64.0, 256);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(grid.n);
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    g[i] = std::abs(grid.x(i)) <= 10 ? 1.0 : 0.0;
  }
  g /= g.sum() * grid.dx;
  Convolver conv(grid, F);
  Eigen::VectorXd const out = conv.apply(g);
  CHECK(rel_max(out, oracle::direct_convolution(g, grid, F)) < 1e-9);
  // At the centre the overlap term is sqrt(2 pi)/20 for a box of width 20.
  CHECK(std::abs(out[grid.n / 2] - (1 - std::sqrt(2 * std::numbers::pi) / 20)) < 5e-3);
}

TEST_CASE("two far bumps give gamma/2 plus the self term")
{
  LocalizationRate const F(ModelParams{1, 1, 1, 1});
  Grid const grid = Grid::centered(80.0, 512);
  Eigen::VectorXd g(grid.n);
  double const sigma = 0.2;
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    g[i] = 0.5 * (oracle::gaussian_pdf(grid.x(i) + 15, sigma) + oracle::gaussian_pdf(grid.x(i) - 15, sigma));
  }
  Convolver conv(grid, F);
  Eigen::VectorXd const out = conv.apply(g);
  CHECK(rel_max(out, oracle::direct_convolution(g, grid, F)) < 1e-9);
  // Self term at a bump centre: (1/2)(1 - 1/sqrt(1 + sigma^2)).
  Eigen::Index const at = static_cast<Eigen::Index>(std::lround((15 - grid.x0) / grid.dx));
  double const self = 0.5 * (1 - 1 / std::sqrt(1 + sigma * sigma));
  CHECK(std::abs(out[at] - (0.5 + self)) < 2e-3);
}

TEST_CASE("convolver rejects a mismatched density")
{
  LocalizationRate const F(ModelParams{1, 1, 1, 1});
  Convolver conv(Grid::centered(40.0, 64), F);
  CHECK_THROWS_AS(conv.apply(Eigen::VectorXd::Ones(128)), DimensionError);
}

TEST_CASE("grid validation")
{
  CHECK_THROWS_AS(Grid(0, 0.1, 100), ConfigError);
  CHECK_THROWS_AS(Grid(0, -0.1, 128), ConfigError);
  Grid const g = Grid::centered(10, 8);
  CHECK(g.x(0) == -5);
  CHECK(g.periodic_offset(7) == doctest::Approx(-1.25));
}
