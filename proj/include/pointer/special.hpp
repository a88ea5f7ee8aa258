#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace pointer {

/// Dawson's integral D(z) = exp(-z^2) int_0^z exp(t^2) dt.
///
/// |z| <= 6: D(z) = exp(-z^2) sum_n z^(2n+1) / (n! (2n+1)). Every term is positive, so the sum has
/// no cancellation and keeps full relative precision.
/// |z| > 6: asymptotic series 1/(2z) sum_k (2k-1)!! / (2z^2)^k, truncated at its smallest term.
template <typename Real>
Real dawson(Real z)
{
  if (z < 0) {
    return -dawson(-z);
  }
  Real const z2 = z * z;
  if (z <= Real(6)) {
    Real term = z; // z^(2n+1)/n!
    Real sum = z;
    for (int n = 1; n < 400; ++n) {
      term *= z2 / static_cast<Real>(n);
      Real const add = term / static_cast<Real>(2 * n + 1);
      sum += add;
      if (add < sum * std::numeric_limits<Real>::epsilon() / 4) {
        break;
      }
    }
    return std::exp(-z2) * sum;
  }
  Real const x = 1 / (2 * z2);
  Real term = 1;
  Real sum = 1;
  for (int k = 1; k < 200; ++k) {
    Real const next = term * static_cast<Real>(2 * k - 1) * x;
    if (next >= term) {
      break;
    }
    term = next;
    sum += term;
    if (term < sum * std::numeric_limits<Real>::epsilon() / 4) {
      break;
    }
  }
  return sum / (2 * z);
}

/// Imaginary error function erfi(z) = 2 exp(z^2) D(z) / sqrt(pi).
template <typename Real>
Real erfi(Real z)
{
  return 2 * std::exp(z * z) * dawson(z) / std::sqrt(std::numbers::pi_v<Real>);
}

} // namespace pointer
