#pragma once

#include "fft.hpp"
#include "grid.hpp"
#include "kernels.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pointer {

/// Lambda[|psi|^2](x) = (g*F)(x) - int g (g*F), the norm-preserving nonlinear rate.
Eigen::VectorXd lambda_functional(WaveFunction const &psi, LocalizationRate const &rate);

/// Phase-space translation psi(x) -> exp(i u x / hbar) psi(x - s), with a band-limited shift.
WaveFunction galilei_boost(WaveFunction const &psi, double s, double u, double hbar = 1.0);

struct EvolveConfig
{
  double dt = 0.02;
  double t_max = 100.0;
  double potential_slope = 0.0;
  bool recenter = false;
  double convergence_tol = 1e-6;
  /// Interval between rows of the recorded time series (0: no series).
  double record_interval = 1.0;
  /// Times at which full wave functions are kept (lab frame unless recenter is set).
  std::vector<double> snapshot_times;

  void validate(Grid const &grid, ModelParams const &params) const;
};

/// Upper bound on dt for the spectral kinetic step to resolve the fastest phase.
double stability_dt_bound(Grid const &grid, ModelParams const &params);

struct TimeSample
{
  double t = 0;
  double norm_drift = 0;
  double centroid = 0;
  double sigma = 0;
  double shape_residual = -1; // negative: not measured at this row
};

/// One split-step propagator for the nonlinear pure-state equation on a fixed grid and dt.
/// Owns FFT plans; one instance per thread.
class NonlinearPropagator
{
public:
  NonlinearPropagator(Grid const &grid, ModelParams const &params, LocalizationRate const &rate, double dt,
                      double potential_slope = 0.0);

  Grid const &grid() const { return grid_; }
  double dt() const { return dt_; }
  void set_dt(double dt);

  /// One Strang step. Returns the pre-renormalisation norm drift |<psi|psi> - 1|.
  double step(WaveFunction &psi);

  /// Lambda on the current density.
  Eigen::VectorXd const &lambda(WaveFunction const &psi);

  /// int g (g*F) dx, which equals the total jump rate of the orthogonal unravelling.
  double mean_localization(WaveFunction const &psi);

  /// Mean momentum <p>.
  double mean_momentum(WaveFunction const &psi);

  Spectral &spectral() { return spectral_; }

private:
  void kinetic(WaveFunction &psi, Eigen::VectorXcd const &phase);
  void update_lambda(Eigen::VectorXd const &density);

  Grid grid_;
  ModelParams params_;
  double dt_;
  double slope_;
  Convolver conv_;
  Spectral spectral_;
  Eigen::VectorXd k_;
  Eigen::VectorXcd half_kinetic_;
  Eigen::VectorXcd potential_phase_;
  Eigen::VectorXd density_;
  Eigen::VectorXd gf_;
  Eigen::VectorXd lambda_;
};

/// Tracks the offset between the lab frame and a recentred co-moving frame:
/// psi_lab(x) = exp(i U x/hbar) psi_frame(x - S) up to a global phase, with dS/dt = U/m.
struct FrameOffset
{
  double shift = 0;
  double momentum = 0;
};

struct EvolveResult
{
  WaveFunction final_state;
  std::vector<TimeSample> series;
  std::vector<std::pair<double, WaveFunction>> snapshots;
  FrameOffset frame;
  double t_final = 0;
  double max_norm_drift = 0;
  /// Drift of the first step divided by dt^2.
  double drift_constant = 0;
};

/// Centroid and spread on the circle of the periodic domain, robust to packets straddling the edge.
struct PeriodicMoments
{
  double centroid = 0;
  double spread = 0;
};

PeriodicMoments periodic_moments(WaveFunction const &psi);

/// Moves the centroid of psi to the grid centre and removes its mean momentum, updating frame.
void recenter(WaveFunction &psi, FrameOffset &frame, NonlinearPropagator &prop, double hbar);

/// Propagate psi0 until cfg.t_max. Throws InstabilityError when the per-step norm drift exceeds
/// 100 dt^2 times the drift constant measured on the first step.
EvolveResult evolve_nonlinear(WaveFunction const &psi0, EvolveConfig const &cfg, ModelParams const &params,
                              LocalizationRate const &rate);

struct TailFit
{
  double k = 0;
  double r_squared = 0;
  std::size_t points = 0;
};

/// Linear fit of log|psi| against |x - x_peak| over samples with |psi| in [lo, hi] * peak.
TailFit fit_exponential_tail(Grid const &grid, Eigen::VectorXd const &envelope, double lo = 1e-8, double hi = 1e-3);

struct SolitonProfile
{
  WaveFunction state; // co-moving frame, centred, zero mean momentum
  Eigen::VectorXd envelope;
  double v0 = 0;
  double sigma_pi = 0;
  double tail_k = 0;
  double tail_r_squared = 0;
  bool converged = false;
  double residual = 0;
  std::vector<double> residual_history;
  double t_final = 0;
  std::vector<TimeSample> series;
};

/// Sliding-window envelope shape residual used for stationarity checks.
double envelope_residual(Eigen::VectorXd const &a, Eigen::VectorXd const &b, double dx);

struct SolitonSearch
{
  Grid grid;
  EvolveConfig evolve;
  /// Initial state; defaults to a centred Gaussian of spread hbar/sigma_G.
  std::optional<WaveFunction> initial;
  /// Transient before the residual is required to decrease (in units of the first dispersion time).
  int transient_checks = 3;
};

/// Evolve until the co-moving envelope changes by less than cfg.convergence_tol per dispersion time
/// m sigma^2 / hbar. Non-convergence at t_max is reported through the converged flag; a residual that
/// grows after the transient raises ConvergenceError carrying the history.
SolitonProfile find_soliton(ModelParams const &params, LocalizationRate const &rate, SolitonSearch const &search);

/// Default grid: n = 4096 over 80 hbar/sigma_G.
Grid default_soliton_grid(ModelParams const &params);

/// Rough soliton width sigma_pi sigma_G / hbar, used to size sweep grids and initial packets.
double expected_soliton_width(double kappa);

/// Grid used for width sweeps: at least 4 samples per expected width and 40 widths of domain.
Grid sweep_soliton_grid(ModelParams const &params);

/// dt = min(0.1 dx^2 m / hbar, 0.02 / gamma).
double default_dt(Grid const &grid, ModelParams const &params);

struct WidthRow
{
  double kappa = 0;
  double width = 0; // sigma_pi sigma_G / hbar
  bool converged = false;
  double residual = 0;
  double t_final = 0;
  Eigen::Index n = 0;
  double domain = 0;
  std::string error;
};

struct WidthSweepConfig
{
  double t_max = 4000.0;
  double convergence_tol = 1e-6;
  unsigned workers = 1;
};

/// find_soliton for each kappa in dimensionless units. Failures are recorded per row.
std::vector<WidthRow> width_curve(std::vector<double> const &kappas, WidthSweepConfig const &cfg);

} // namespace pointer
