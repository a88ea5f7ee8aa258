#pragma once

#include "fft.hpp"
#include "grid.hpp"

#include <cmath>
#include <random>
#include <variant>
#include <vector>

namespace pointer {

/// Collision rate gamma, momentum-transfer spread sigma_G, mass and hbar.
/// kappa is always recomputed from the four primary fields.
template <typename Real>
struct BasicModelParams
{
  Real gamma = 1;
  Real sigma_G = 1;
  Real mass = 1;
  Real hbar = 1;

  Real kappa() const { return sigma_G * sigma_G / (mass * hbar * gamma); }

  void validate() const
  {
    if (!(gamma > 0) || !(sigma_G > 0) || !(mass > 0) || !(hbar > 0) || !std::isfinite(kappa())) {
      throw ConfigError("model parameters gamma, sigma_G, mass and hbar must be positive and finite");
    }
  }

  /// hbar/sigma_G, the natural localisation length.
  Real localization_length() const { return hbar / sigma_G; }
};

using ModelParams = BasicModelParams<double>;

/// Scales that map the dimensionless model (hbar = m = gamma = 1) back to physical units.
template <typename Real>
struct BasicUnitScales
{
  Real time = 1;   // 1/gamma
  Real mass = 1;   // m
  Real action = 1; // hbar

  Real length() const { return std::sqrt(action * time / mass); }
  Real momentum() const { return std::sqrt(mass * action / time); }
};

using UnitScales = BasicUnitScales<double>;

template <typename Real>
BasicUnitScales<Real> unit_scales(BasicModelParams<Real> const &p)
{
  p.validate();
  return {Real(1) / p.gamma, p.mass, p.hbar};
}

/// Equivalent parameters with hbar = m = gamma = 1 and sigma_G = sqrt(kappa).
template <typename Real>
BasicModelParams<Real> nondimensionalize(BasicModelParams<Real> const &p)
{
  p.validate();
  auto const u = unit_scales(p);
  return {Real(1), p.sigma_G / u.momentum(), Real(1), Real(1)};
}

template <typename Real>
BasicModelParams<Real> restore(BasicModelParams<Real> const &nd, BasicUnitScales<Real> const &u)
{
  return {nd.gamma / u.time, nd.sigma_G * u.momentum(), nd.mass * u.mass, nd.hbar * u.action};
}

/// Normalised momentum-transfer distribution G(q).
template <typename Real>
class BasicMomentumDistribution
{
public:
  struct Gaussian
  {
    Real sigma;
  };
  struct Tabulated
  {
    std::vector<Real> q;
    std::vector<Real> weight;
  };

  static BasicMomentumDistribution gaussian(Real sigma)
  {
    if (!(sigma > 0)) {
      throw ConfigError("Gaussian momentum distribution needs sigma > 0");
    }
    return BasicMomentumDistribution(Gaussian{sigma});
  }

  /// Piecewise-linear G on an increasing q grid; must integrate to one (trapezoid rule, 1e-10).
  /// Asymmetric tables are accepted but yield a complex characteristic function; only the real part
  /// enters the localisation rate.
  static BasicMomentumDistribution tabulated(std::vector<Real> q, std::vector<Real> weight)
  {
    if (q.size() != weight.size() || q.size() < 2) {
      throw ConfigError("tabulated G needs matching q and weight arrays with at least two points");
    }
    Real integral = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (weight[i] < 0 || !std::isfinite(weight[i])) {
        throw ConfigError("tabulated G must be non-negative");
      }
      if (i > 0) {
        if (!(q[i] > q[i - 1])) {
          throw ConfigError("tabulated G needs a strictly increasing q grid");
        }
        integral += (q[i] - q[i - 1]) * (weight[i] + weight[i - 1]) / 2;
      }
    }
    if (std::abs(integral - 1) > Real(1e-10)) {
      throw ConfigError("tabulated G is not normalised (integral = " + std::to_string(integral) + ")");
    }
    return BasicMomentumDistribution(Tabulated{std::move(q), std::move(weight)});
  }

  bool is_gaussian() const { return std::holds_alternative<Gaussian>(kind_); }
  Real gaussian_sigma() const { return std::get<Gaussian>(kind_).sigma; }
  Tabulated const &table() const { return std::get<Tabulated>(kind_); }

  Real density(Real q) const
  {
    if (is_gaussian()) {
      Real const s = gaussian_sigma();
      return std::exp(-q * q / (2 * s * s)) / (s * std::sqrt(2 * std::numbers::pi_v<Real>));
    }
    auto const &t = table();
    if (q < t.q.front() || q > t.q.back()) {
      return 0;
    }
    auto const it = std::upper_bound(t.q.begin(), t.q.end(), q);
    std::size_t const hi = std::min<std::size_t>(it - t.q.begin(), t.q.size() - 1);
    std::size_t const lo = hi - 1;
    Real const w = (q - t.q[lo]) / (t.q[hi] - t.q[lo]);
    return (1 - w) * t.weight[lo] + w * t.weight[hi];
  }

  /// Characteristic function  int dq G(q) exp(i q s / hbar).
  std::complex<Real> characteristic(Real s, Real hbar) const
  {
    if (is_gaussian()) {
      Real const a = gaussian_sigma() * s / hbar;
      return {std::exp(-a * a / 2), 0};
    }
    // Exact integral of the piecewise-linear interpolant against exp(i t q), t = s/hbar.
    auto const &tab = table();
    Real const t = s / hbar;
    std::complex<Real> acc = 0;
    for (std::size_t i = 1; i < tab.q.size(); ++i) {
      Real const a = tab.q[i - 1], b = tab.q[i];
      Real const ga = tab.weight[i - 1], gb = tab.weight[i];
      Real const h = b - a;
      if (std::abs(t * h) < Real(1e-4)) {
        // Taylor expansion of the segment integral to avoid cancellation.
        std::complex<Real> const ea = std::polar(Real(1), t * a);
        std::complex<Real> const i1(0, 1);
        Real const th = t * h;
        std::complex<Real> const m0 = h * (ga + gb) / Real(2);
        std::complex<Real> const m1 = h * (ga + 2 * gb) / Real(6) * th;
        std::complex<Real> const m2 = h * (ga + 3 * gb) / Real(24) * th * th;
        acc += ea * (m0 + i1 * m1 - m2);
      } else {
        std::complex<Real> const i1(0, 1);
        std::complex<Real> const ea = std::polar(Real(1), t * a);
        std::complex<Real> const eb = std::polar(Real(1), t * b);
        // int_a^b (ga + (gb-ga)(q-a)/h) e^{itq} dq
        std::complex<Real> const base = (eb * gb - ea * ga) / (i1 * t);
        std::complex<Real> const slope = (gb - ga) / h * (eb - ea) / (t * t);
        acc += base + slope;
      }
    }
    return acc;
  }

  /// Draw q ~ G.
  template <typename Engine>
  Real sample(Engine &rng) const
  {
    if (is_gaussian()) {
      return std::normal_distribution<Real>(0, gaussian_sigma())(rng);
    }
    auto const &t = table();
    return std::piecewise_linear_distribution<Real>(t.q.begin(), t.q.end(), t.weight.begin())(rng);
  }

  /// Support outside of which G is numerically zero (1e-16 of peak for Gaussian).
  std::pair<Real, Real> support() const
  {
    if (is_gaussian()) {
      Real const w = gaussian_sigma() * std::sqrt(Real(2) * Real(36.84));
      return {-w, w};
    }
    return {table().q.front(), table().q.back()};
  }

private:
  explicit BasicMomentumDistribution(std::variant<Gaussian, Tabulated> k)
    : kind_(std::move(k))
  {
  }
  std::variant<Gaussian, Tabulated> kind_;
};

using MomentumDistribution = BasicMomentumDistribution<double>;

/// F(s) = gamma - gamma Re int dq G(q) exp(i q s / hbar).
template <typename Real>
class BasicLocalizationRate
{
public:
  BasicLocalizationRate(BasicModelParams<Real> params, BasicMomentumDistribution<Real> g)
    : params_(params)
    , g_(std::move(g))
  {
    params_.validate();
  }

  /// Gaussian G with the spread stored in params.
  explicit BasicLocalizationRate(BasicModelParams<Real> params)
    : BasicLocalizationRate(params, BasicMomentumDistribution<Real>::gaussian(params.sigma_G))
  {
  }

  /// F == 0 (no collisions) with otherwise valid parameters; used for free-particle limits.
  static BasicLocalizationRate disabled(BasicModelParams<Real> params)
  {
    BasicLocalizationRate r(params);
    r.enabled_ = false;
    return r;
  }

  Real operator()(Real s) const
  {
    if (!enabled_) {
      return 0;
    }
    if (g_.is_gaussian()) {
      Real const a = g_.gaussian_sigma() * s / params_.hbar;
      return -params_.gamma * std::expm1(-a * a / 2);
    }
    return params_.gamma * (1 - g_.characteristic(s, params_.hbar).real());
  }

  /// Total collision rate; zero when disabled.
  Real gamma() const { return enabled_ ? params_.gamma : Real(0); }
  bool enabled() const { return enabled_; }
  BasicModelParams<Real> const &params() const { return params_; }
  BasicMomentumDistribution<Real> const &distribution() const { return g_; }

  /// F sampled at the minimal-image offsets of a periodic grid (index 0 is s = 0).
  VectorX<Real> periodic_samples(BasicGrid<Real> const &grid) const
  {
    return VectorX<Real>::NullaryExpr(grid.n, [&](Eigen::Index i) { return (*this)(grid.periodic_offset(i)); });
  }

private:
  BasicModelParams<Real> params_;
  BasicMomentumDistribution<Real> g_;
  bool enabled_ = true;
};

template <typename Real>
Real localization_rate(BasicModelParams<Real> const &params, BasicMomentumDistribution<Real> const &g, Real s)
{
  return BasicLocalizationRate<Real>(params, g)(s);
}

using LocalizationRate = BasicLocalizationRate<double>;

/// Periodic convolution (g * F)(x_i) = sum_j g_j F(x_i - x_j) dx, evaluated spectrally.
class Convolver
{
public:
  Convolver(Grid const &grid, LocalizationRate const &rate)
    : grid_(grid)
  {
    Eigen::VectorXd const f = rate.periodic_samples(grid) * grid.dx;
    spectral_.forward_real(kernel_hat_, f);
  }

  Grid const &grid() const { return grid_; }

  Eigen::VectorXd apply(Eigen::VectorXd const &g)
  {
    Eigen::VectorXd out;
    apply(g, out);
    return out;
  }

  void apply(Eigen::VectorXd const &g, Eigen::VectorXd &out)
  {
    if (g.size() != grid_.n) {
      throw DimensionError("convolution: density size does not match precomputed kernel grid");
    }
    spectral_.forward_real(work_, g);
    work_.array() *= kernel_hat_.array();
    spectral_.inverse_real(out, work_, grid_.n);
  }

private:
  Grid grid_;
  Spectral spectral_;
  Eigen::VectorXcd kernel_hat_;
  Eigen::VectorXcd work_;
};

} // namespace pointer
