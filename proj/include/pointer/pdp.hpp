#pragma once

#include "kernels.hpp"
#include "reference.hpp"
#include "rng.hpp"
#include "soliton.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace pointer {

/// chi(q) = int exp(i q x / hbar) |psi(x)|^2 dx, summed exactly over the grid samples.
Complex characteristic_fn(WaveFunction const &psi, double q, double hbar = 1.0);

/// r_q = gamma G(q) (1 - |chi(q)|^2).
double jump_rate_density(WaveFunction const &psi, double q, ModelParams const &params, MomentumDistribution const &g);

/// r_tot = int g (g*F) dx; equals int r_q dq.
double total_jump_rate(WaveFunction const &psi, LocalizationRate const &rate);

/// Normalised (exp(i q x / hbar) - chi(q)) psi, orthogonal to psi. Throws DegenerateJumpError when
/// 1 - |chi(q)|^2 vanishes.
WaveFunction apply_jump(WaveFunction const &psi, double q, double hbar = 1.0);

struct JumpEvent
{
  double t = 0;
  double q = 0;
  double r_tot_at_jump = 0;
  bool accepted = true;
  double overlap = 0; // |<psi|psi'>| of an accepted jump
};

struct TrajectoryOptions
{
  double t_max = 1.0;
  double dt = 0.01;
  std::vector<double> snapshot_times;
  int burn_in = 50;
  bool record_rejected = false;
};

struct TrajectoryRecord
{
  std::uint64_t seed = 0;
  std::vector<JumpEvent> events;
  WaveFunction final_psi;
  std::vector<std::pair<double, WaveFunction>> snapshots;
  double wall_time = 0;
  std::size_t candidates = 0;
  double max_rate_ratio = 0; // max r_tot/gamma over candidate events

  std::size_t jumps() const;
};

/// Nonlinear flow interrupted by jumps. Candidate times come from a rate-gamma Poisson process and
/// are accepted with probability r_tot/gamma; accepted q are drawn by Metropolis-Hastings with
/// proposal G. Deterministic steps never straddle a candidate or snapshot time. `seed` seeds the engine
/// directly; callers derive it with stream_seed.
TrajectoryRecord simulate_trajectory(WaveFunction const &psi0, TrajectoryOptions const &opt, ModelParams const &params,
                                     LocalizationRate const &rate, std::uint64_t seed);

enum class WinnerRule
{
  Nearest,  // packet domain (Voronoi cell of the packet centres) containing the final centroid
  Majority, // packet domain holding more than 90% of the probability; -1 if none
};

int winner_index(WaveFunction const &psi, std::vector<double> const &centers, WinnerRule rule = WinnerRule::Nearest);

/// Keep every `factor`-th sample (the grid spacing grows accordingly) and renormalise.
WaveFunction downsample(WaveFunction const &psi, Eigen::Index factor);

struct EnsembleDensity
{
  DensityMatrix rho;
  Eigen::MatrixXd std_error; // per kernel element
  std::size_t members = 0;
};

/// (1/M) sum |psi_i><psi_i|, accumulated in the given order.
EnsembleDensity ensemble_density(std::vector<WaveFunction> const &states);

/// Binary snapshot layout (little endian):
///   char[8]  magic "PTRSNAP1"
///   uint32   kind (1 = wave function, 2 = density-matrix kernel)
///   uint32   reserved (0)
///   uint64   rows, uint64 cols (cols = 1 for wave functions)
///   float64  x0, dx, t
///   rows*cols pairs of float64 (re, im), row-major.
void write_snapshot(std::ostream &os, WaveFunction const &psi, double t);
void write_snapshot(std::ostream &os, DensityMatrix const &rho, double t);
std::pair<WaveFunction, double> read_wavefunction_snapshot(std::istream &is);

} // namespace pointer
