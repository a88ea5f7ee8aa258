#pragma once

#include "errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>

namespace pointer {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Uniform periodic 1D grid: x_i = x0 + i*dx, i = 0..n-1, period n*dx.
template <typename Real>
struct BasicGrid
{
  Real x0 = 0;
  Real dx = 1;
  Eigen::Index n = 0;

  BasicGrid() = default;
  BasicGrid(Real left, Real spacing, Eigen::Index points)
    : x0(left)
    , dx(spacing)
    , n(points)
  {
    if (!(dx > 0)) {
      throw ConfigError("grid spacing must be positive");
    }
    if (n < 2 || (n & (n - 1)) != 0) {
      throw ConfigError("grid point count must be a power of two");
    }
  }

  /// Grid of n points covering [center - length/2, center + length/2).
  static BasicGrid centered(Real length, Eigen::Index points, Real center = 0)
  {
    return BasicGrid(center - length / 2, length / static_cast<Real>(points), points);
  }

  Real length() const { return dx * static_cast<Real>(n); }
  Real x(Eigen::Index i) const { return x0 + dx * static_cast<Real>(i); }
  Real center() const { return x0 + length() / 2; }

  VectorX<Real> positions() const
  {
    return VectorX<Real>::NullaryExpr(n, [this](Eigen::Index i) { return x(i); });
  }

  /// Angular wavenumbers in FFT order.
  VectorX<Real> wavenumbers() const
  {
    Real const dk = 2 * std::numbers::pi_v<Real> / length();
    return VectorX<Real>::NullaryExpr(n, [this, dk](Eigen::Index j) {
      return dk * static_cast<Real>(j < n / 2 ? j : j - n);
    });
  }

  /// Signed periodic offset of sample i from sample 0 (minimal image).
  Real periodic_offset(Eigen::Index i) const
  {
    return dx * static_cast<Real>(i <= n / 2 ? i : i - n);
  }

  bool matches(BasicGrid const &o, Real rtol = Real(1e-12)) const
  {
    return n == o.n && std::abs(dx - o.dx) <= rtol * dx && std::abs(x0 - o.x0) <= rtol * length();
  }
};

using Grid = BasicGrid<double>;

template <typename Real>
void require_same_grid(BasicGrid<Real> const &a, BasicGrid<Real> const &b, char const *where)
{
  if (!a.matches(b)) {
    throw DimensionError(std::string(where) + ": grid mismatch");
  }
}

/// Complex amplitudes on a uniform periodic grid, normalised so that sum |psi_i|^2 dx = 1.
template <typename Real>
class BasicWaveFunction
{
public:
  using Complex = std::complex<Real>;
  using Amplitudes = VectorX<Complex>;

  BasicWaveFunction() = default;
  BasicWaveFunction(BasicGrid<Real> const &grid, Amplitudes amplitudes, bool normalise = true)
    : grid_(grid)
    , psi_(std::move(amplitudes))
  {
    if (psi_.size() != grid_.n) {
      throw DimensionError("wave function size does not match grid");
    }
    if (normalise) {
      normalize();
    }
  }

  BasicGrid<Real> const &grid() const { return grid_; }
  Amplitudes const &amplitudes() const { return psi_; }
  Amplitudes &amplitudes() { return psi_; }
  Complex operator[](Eigen::Index i) const { return psi_[i]; }
  Eigen::Index size() const { return psi_.size(); }

  Real norm_squared() const { return psi_.squaredNorm() * grid_.dx; }

  /// Rescale to unit norm; returns the squared norm found before rescaling.
  Real normalize()
  {
    Real const n2 = norm_squared();
    if (!(n2 > 0) || !std::isfinite(n2)) {
      throw DomainError("cannot normalise a zero or non-finite wave function");
    }
    psi_ /= std::sqrt(n2);
    return n2;
  }

  VectorX<Real> density() const { return psi_.cwiseAbs2(); }
  VectorX<Real> envelope() const { return psi_.cwiseAbs(); }

  Complex inner(BasicWaveFunction const &other) const
  {
    require_same_grid(grid_, other.grid_, "inner product");
    return psi_.dot(other.psi_) * grid_.dx;
  }

  Real centroid() const
  {
    VectorX<Real> const rho = density();
    return rho.dot(grid_.positions()) * grid_.dx;
  }

  Real position_spread() const
  {
    VectorX<Real> const rho = density();
    Real const mean = centroid();
    VectorX<Real> const d = grid_.positions().array() - mean;
    return std::sqrt(rho.dot(d.cwiseAbs2()) * grid_.dx);
  }

private:
  BasicGrid<Real> grid_;
  Amplitudes psi_;
};

using WaveFunction = BasicWaveFunction<double>;
using Complex = std::complex<double>;

/// Gaussian packet with position spread sigma (of |psi|^2), centre x0 and mean momentum p0.
template <typename Real>
BasicWaveFunction<Real>
gaussian_packet(BasicGrid<Real> const &grid, Real x0, Real sigma, Real p0 = 0, Real hbar = 1)
{
  using C = std::complex<Real>;
  VectorX<C> psi(grid.n);
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    Real const d = grid.x(i) - x0;
    psi[i] = std::polar(std::exp(-d * d / (4 * sigma * sigma)), p0 * grid.x(i) / hbar);
  }
  return BasicWaveFunction<Real>(grid, std::move(psi));
}

} // namespace pointer
