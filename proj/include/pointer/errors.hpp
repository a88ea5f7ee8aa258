#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pointer {

struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (maps to CLI exit code 2).
struct ConfigError : Error
{
  using Error::Error;
};

/// Arrays or grids that do not match in shape or spacing.
struct DimensionError : Error
{
  using Error::Error;
};

struct DomainError : Error
{
  using Error::Error;
};

/// Per-step norm drift of the split-step integrator grew beyond its bound.
struct InstabilityError : Error
{
  using Error::Error;
};

/// A phase-space translation would push mass across the periodic boundary.
struct BoostError : Error
{
  using Error::Error;
};

/// A jump was requested for a momentum transfer whose rate vanishes.
struct DegenerateJumpError : Error
{
  using Error::Error;
};

struct BoundaryError : Error
{
  using Error::Error;
};

struct RootFindingError : Error
{
  using Error::Error;
};

struct ConvergenceError : Error
{
  ConvergenceError(std::string const &what, std::vector<double> history)
    : Error(what)
    , residual_history(std::move(history))
  {
  }
  std::vector<double> residual_history;
};

} // namespace pointer
