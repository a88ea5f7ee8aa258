#pragma once

#include "errors.hpp"
#include "special.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

namespace pointer {

/// Dimensionless 1D pointer width sigma_pi sigma_G / hbar = kappa / (4 a_loc) + a_loc.
template <typename Real>
Real width_model_1d(Real kappa, Real a_loc)
{
  if (!(kappa >= 0) || !(a_loc > 0)) {
    throw DomainError("width_model_1d needs kappa >= 0 and a_loc > 0");
  }
  return kappa / (4 * a_loc) + a_loc;
}

struct FitError : Error
{
  using Error::Error;
};

template <typename Real>
struct BasicWidthSample
{
  Real kappa;
  Real width;
};

template <typename Real>
struct BasicALocFit
{
  Real a_loc = 0;
  Real max_relative_deviation = 0;
  /// Standard error of a_loc from the linearised relative-residual least-squares problem.
  Real std_error = 0;
  /// log10(kappa_max / kappa_min).
  Real decades = 0;
  /// Set when the table spans fewer than two decades of kappa.
  bool narrow_span = false;
};

using WidthSample = BasicWidthSample<double>;
using ALocFit = BasicALocFit<double>;

/// Least-squares a_loc minimising sum_i (model(kappa_i)/w_i - 1)^2.
template <typename Real>
BasicALocFit<Real> fit_a_loc(std::vector<BasicWidthSample<Real>> const &table)
{
  if (table.size() < 5) {
    throw FitError("fit_a_loc needs at least five (kappa, width) rows");
  }
  Real kmin = std::numeric_limits<Real>::infinity(), kmax = 0;
  for (auto const &row : table) {
    if (!(row.kappa > 0) || !(row.width > 0)) {
      throw FitError("fit_a_loc needs positive kappa and width in every row");
    }
    kmin = std::min(kmin, row.kappa);
    kmax = std::max(kmax, row.kappa);
  }
  auto objective = [&](Real a) {
    Real s = 0;
    for (auto const &row : table) {
      Real const r = width_model_1d(row.kappa, a) / row.width - 1;
      s += r * r;
    }
    return s;
  };

  // Coarse log scan to bracket the global minimum, then Brent.
  Real lo = Real(1e-4), hi = Real(1e2);
  Real best = lo, best_val = objective(lo);
  int const scan = 400;
  for (int i = 1; i <= scan; ++i) {
    Real const a = lo * std::pow(hi / lo, Real(i) / scan);
    Real const v = objective(a);
    if (v < best_val) {
      best_val = v;
      best = a;
    }
  }
  Real const step = std::pow(hi / lo, Real(1) / scan);
  auto const [a_opt, s_opt] = boost::math::tools::brent_find_minima(objective, best / step, best * step,
                                                                     std::numeric_limits<Real>::digits / 2);

  BasicALocFit<Real> fit;
  fit.a_loc = a_opt;
  Real jtj = 0;
  for (auto const &row : table) {
    Real const rel = std::abs(width_model_1d(row.kappa, a_opt) / row.width - 1);
    fit.max_relative_deviation = std::max(fit.max_relative_deviation, rel);
    Real const d = (1 - row.kappa / (4 * a_opt * a_opt)) / row.width;
    jtj += d * d;
  }
  Real const dof = static_cast<Real>(table.size() - 1);
  fit.std_error = jtj > 0 ? std::sqrt(s_opt / dof / jtj) : std::numeric_limits<Real>::infinity();
  fit.decades = std::log10(kmax / kmin);
  fit.narrow_span = fit.decades < 2;
  return fit;
}

/// Residual xi - exp(a^2/2 - 4 pi xi^2) erfi(2 sqrt(pi) xi) / 4, written through Dawson's integral:
/// xi - exp(a^2/2) D(2 sqrt(pi) xi) / (2 sqrt(pi)).
template <typename Real>
Real xi_loc_residual(Real xi, Real a_loc)
{
  Real const sqrt_pi = std::sqrt(std::numbers::pi_v<Real>);
  return xi - std::exp(a_loc * a_loc / 2) * dawson(2 * sqrt_pi * xi) / (2 * sqrt_pi);
}

/// Positive root of the 3D localisation-scale equation by bisection on (1e-6, 1).
template <typename Real>
Real solve_xi_loc(Real a_loc)
{
  if (!(a_loc > 0) || !(a_loc < 2)) {
    throw DomainError("solve_xi_loc: a_loc must lie in (0, 2)");
  }
  Real lo = Real(1e-6), hi = Real(1);
  Real flo = xi_loc_residual(lo, a_loc);
  Real const fhi = xi_loc_residual(hi, a_loc);
  if ((flo < 0) == (fhi < 0)) {
    std::ostringstream msg;
    msg << "solve_xi_loc: no sign change on (1e-6, 1) for a_loc = " << a_loc << "; sweep:";
    for (int i = 0; i <= 10; ++i) {
      Real const xi = lo + (hi - lo) * Real(i) / 10;
      msg << " f(" << xi << ")=" << xi_loc_residual(xi, a_loc);
    }
    throw RootFindingError(msg.str());
  }
  for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<Real>::epsilon() * hi; ++it) {
    Real const mid = (lo + hi) / 2;
    Real const fm = xi_loc_residual(mid, a_loc);
    if (fm == 0) {
      return mid;
    }
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return (lo + hi) / 2;
}

template <typename Real>
struct BasicGasParams
{
  Real ell_free;
  Real lambda_th;
  Real a_loc;

  void validate() const
  {
    if (!(ell_free > 0) || !(lambda_th > 0) || !(a_loc > 0) || !(a_loc < 2)) {
      throw ConfigError("gas parameters need ell_free > 0, lambda_th > 0 and a_loc in (0, 2)");
    }
  }
};

using GasParams = BasicGasParams<double>;

/// sigma_pi = ell_free / (16 xi_loc) + xi_loc lambda_th.
template <typename Real>
Real pointer_width_3d(Real ell_free, Real lambda_th, Real xi_loc)
{
  return ell_free / (16 * xi_loc) + xi_loc * lambda_th;
}

template <typename Real>
Real pointer_width_3d(BasicGasParams<Real> const &gas)
{
  gas.validate();
  return pointer_width_3d(gas.ell_free, gas.lambda_th, solve_xi_loc(gas.a_loc));
}

/// 1/Lambda_coh^2 = 1/Lambda_th^2 + 1/(8 pi sigma_pi^2). Infinite sigma_pi gives Lambda_th.
template <typename Real>
Real coherence_length(Real sigma_pi, Real lambda_th)
{
  if (!(sigma_pi > 0) || !(lambda_th > 0)) {
    throw DomainError("coherence_length needs positive sigma_pi and lambda_th");
  }
  Real const inv = 1 / (lambda_th * lambda_th) + 1 / (8 * std::numbers::pi_v<Real> * sigma_pi * sigma_pi);
  return 1 / std::sqrt(inv);
}

} // namespace pointer
