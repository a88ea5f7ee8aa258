#pragma once

// Independent reference computations used only by the tests. Nothing here calls into the library's
// numerical kernels beyond plain data types.

#include "pointer/grid.hpp"
#include "pointer/kernels.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using pointer::Grid;

inline double integrate(std::function<double(double)> const &f, double a, double b, double tol = 1e-13)
{
  double err = 0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol, &err);
}

inline double gaussian_pdf(double q, double sigma)
{
  return std::exp(-q * q / (2 * sigma * sigma)) / (sigma * std::sqrt(2 * std::numbers::pi));
}

/// gamma - gamma int G(q) cos(q s / hbar) dq for Gaussian G, by adaptive quadrature.
inline double localization_rate_quadrature(double gamma, double sigma_G, double hbar, double s)
{
  double const lim = 12 * sigma_G;
  double const i = integrate([&](double q) { return gaussian_pdf(q, sigma_G) * std::cos(q * s / hbar); }, -lim, lim);
  return gamma - gamma * i;
}

/// O(n^2) periodic convolution sum_j g_j F(x_i - x_j) dx with minimal-image offsets.
inline Eigen::VectorXd direct_convolution(Eigen::VectorXd const &g, Grid const &grid,
                                          std::function<double(double)> const &F)
{
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.n);
  double const L = grid.length();
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    for (Eigen::Index j = 0; j < grid.n; ++j) {
      double d = grid.x(i) - grid.x(j);
      d -= L * std::round(d / L);
      out[i] += g[j] * F(d) * grid.dx;
    }
  }
  return out;
}

/// chi(q) by direct summation over the samples.
inline std::complex<double> characteristic_sum(Eigen::VectorXcd const &psi, Grid const &grid, double q, double hbar = 1)
{
  std::complex<double> acc = 0;
  double norm = 0;
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    double const g = std::norm(psi[i]);
    acc += g * std::exp(std::complex<double>(0, q * grid.x(i) / hbar));
    norm += g;
  }
  return acc / norm;
}

/// erfi(z) = 2/sqrt(pi) int_0^z exp(t^2) dt by 50-point Gauss-Legendre on four panels (the integrand is
/// entire, so this is converged to round-off for z <= 4).
inline double erfi_quadrature(double z)
{
  auto f = [](double t) { return std::exp(t * t); };
  double s = 0;
  for (int k = 0; k < 4; ++k) {
    s += boost::math::quadrature::gauss<double, 50>::integrate(f, z * k / 4, z * (k + 1) / 4);
  }
  return 2 / std::sqrt(std::numbers::pi) * s;
}

/// Dawson's integral from mpmath at 40 digits: {z, D(z)}.
inline std::vector<std::pair<double, double>> const &dawson_table()
{
  static std::vector<std::pair<double, double>> const t{
    {0.001, 0.00099999933333359999992},     {0.1, 0.09933599239785286115},
    {0.5, 0.42443638350202229593},          {0.9241388730, 0.54104422463518169847},
    {1, 0.53807950691276841914},            {1.5, 0.42824907108539862548},
    {2, 0.30134038892379196603},            {3, 0.17827103061055828734},
    {4, 0.12934800123600511559},            {5, 0.10213407442427683544},
    {6, 0.084542688974543852239},           {6.5, 0.077867818986069871389},
    {8, 0.063000198707553387919},           {12, 0.041812876453988260318},
    {30, 0.016675941401059175798},
  };
  return t;
}

/// Root of the 3D localisation equation from mpmath findroot.
inline constexpr double xi_loc_mpmath_04 = 0.09812001315654792247673283485575467919715;
inline constexpr double xi_loc_mpmath_08 = 0.1988627966155856007372459992522458287427;

/// Scan f on `points` uniform samples of [lo, hi]; return every bracketed root refined by a secant step
/// on the bracketing cell (the cell is 1e-6 wide for the default scan, so the secant is exact to ~1e-12).
inline std::vector<double> sign_scan_roots(std::function<double(double)> const &f, double lo, double hi,
                                           long points = 1000000)
{
  std::vector<double> roots;
  double const h = (hi - lo) / static_cast<double>(points);
  double xa = lo, fa = f(lo);
  for (long i = 1; i <= points; ++i) {
    double const xb = lo + h * static_cast<double>(i);
    double const fb = f(xb);
    if ((fa < 0) != (fb < 0)) {
      // A few secant/regula-falsi refinements inside the cell.
      double a = xa, b = xb, fa2 = fa, fb2 = fb;
      for (int k = 0; k < 60; ++k) {
        double const m = b - fb2 * (b - a) / (fb2 - fa2);
        double const fm = f(m);
        if (fm == 0) {
          a = b = m;
          break;
        }
        if ((fm < 0) == (fa2 < 0)) {
          a = m;
          fa2 = fm;
        } else {
          b = m;
          fb2 = fm;
        }
        if (b - a < 1e-15) {
          break;
        }
      }
      roots.push_back(std::abs(fa2) < std::abs(fb2) ? a : b);
    }
    xa = xb;
    fa = fb;
  }
  return roots;
}

/// Smaller weight of the two-packet flow dp/dt = 2 gamma p (1-p)(2p-1) from its implicit solution
///   ln[(1-2p)^2 / (p(1-p))] = ln[(1-2p0)^2 / (p0(1-p0))] + 2 gamma t,
/// solved by bisection on p in (0, 1/2).
inline double n2_weight_implicit(double p0, double gamma, double t)
{
  auto phi = [](double p) { return std::log((1 - 2 * p) * (1 - 2 * p) / (p * (1 - p))); };
  double const target = phi(p0) + 2 * gamma * t;
  double lo = 1e-300, hi = p0;
  for (int i = 0; i < 2000 && hi - lo > 1e-17 * hi; ++i) {
    double const m = lo < 1e-200 ? hi / 2 : (lo + hi) / 2;
    if (phi(m) > target) {
      lo = m;
    } else {
      hi = m;
    }
  }
  return (lo + hi) / 2;
}

/// Number of events of an inhomogeneous Poisson process with intensity 2 gamma p(t)(1 - p(t)) along the
/// deterministic two-packet flow, sampled by thinning against gamma/2 up to t_end.
template <typename Engine>
int poisson_jump_count(double p0, double gamma, double t_end, Engine &rng)
{
  std::exponential_distribution<double> wait(gamma / 2);
  std::uniform_real_distribution<double> u(0, 1);
  int n = 0;
  for (double t = wait(rng); t < t_end; t += wait(rng)) {
    double const p = n2_weight_implicit(p0, gamma, t);
    if (u(rng) * gamma / 2 < 2 * gamma * p * (1 - p)) {
      ++n;
    }
  }
  return n;
}

/// Inverse-CDF sampler for a density on a fine q grid (trapezoid CDF, linear inversion).
class GridSampler
{
public:
  GridSampler(std::function<double(double)> const &density, double lo, double hi, int points)
    : q_(points)
    , cdf_(points)
  {
    double const h = (hi - lo) / (points - 1);
    double prev = density(lo);
    q_[0] = lo;
    cdf_[0] = 0;
    for (int i = 1; i < points; ++i) {
      q_[i] = lo + h * i;
      double const cur = density(q_[i]);
      cdf_[i] = cdf_[i - 1] + h * (prev + cur) / 2;
      prev = cur;
    }
    for (auto &c : cdf_) {
      c /= cdf_.back();
    }
  }

  template <typename Engine>
  double operator()(Engine &rng) const
  {
    double const u = std::uniform_real_distribution<double>(0, 1)(rng);
    auto const it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t const i = std::clamp<std::size_t>(it - cdf_.begin(), 1, cdf_.size() - 1);
    double const w = (u - cdf_[i - 1]) / std::max(cdf_[i] - cdf_[i - 1], 1e-300);
    return q_[i - 1] + w * (q_[i] - q_[i - 1]);
  }

  double cdf(double q) const
  {
    if (q <= q_.front()) {
      return 0;
    }
    if (q >= q_.back()) {
      return 1;
    }
    auto const it = std::upper_bound(q_.begin(), q_.end(), q);
    std::size_t const i = it - q_.begin();
    double const w = (q - q_[i - 1]) / (q_[i] - q_[i - 1]);
    return cdf_[i - 1] + w * (cdf_[i] - cdf_[i - 1]);
  }

private:
  std::vector<double> q_;
  std::vector<double> cdf_;
};

/// Free Gaussian: position spread sigma(t) = sqrt(sigma0^2 + (hbar t / (2 m sigma0))^2).
inline double free_spread(double sigma0, double t, double hbar = 1, double m = 1)
{
  double const a = hbar * t / (2 * m * sigma0);
  return std::sqrt(sigma0 * sigma0 + a * a);
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> sample, std::function<double(double)> const &cdf)
{
  std::sort(sample.begin(), sample.end());
  double d = 0;
  double const n = static_cast<double>(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double const c = cdf(sample[i]);
    d = std::max({d, c - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - c});
  }
  return d;
}

} // namespace oracle
