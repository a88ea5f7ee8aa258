#include "pointer/soliton.hpp"
#include "pointer/io.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <future>
#include <numbers>

namespace pointer {

namespace {

constexpr double pi = std::numbers::pi;

Eigen::VectorXd lambda_from_density(Eigen::VectorXd const &g, Convolver &conv, double dx)
{
  Eigen::VectorXd gf = conv.apply(g);
  double const mean = g.dot(gf) * dx;
  return gf.array() - mean;
}

} // namespace

Eigen::VectorXd lambda_functional(WaveFunction const &psi, LocalizationRate const &rate)
{
  Convolver conv(psi.grid(), rate);
  return lambda_from_density(psi.density(), conv, psi.grid().dx);
}

WaveFunction galilei_boost(WaveFunction const &psi, double s, double u, double hbar)
{
  Grid const &grid = psi.grid();
  if (!(std::abs(s) < grid.length() / 4)) {
    throw BoostError("boost shift must stay below a quarter of the domain");
  }
  Eigen::VectorXcd out = psi.amplitudes();
  if (s != 0.0) {
    Spectral spectral;
    Eigen::VectorXd const k = grid.wavenumbers();
    Eigen::VectorXcd phase(grid.n);
    for (Eigen::Index j = 0; j < grid.n; ++j) {
      phase[j] = std::polar(1.0, -k[j] * s);
    }
    // The Nyquist mode has no signed frequency; keep it real so real envelopes stay real.
    phase[grid.n / 2] = std::cos(k[grid.n / 2] * s);
    spectral.multiply_in_fourier(out, phase);
  }
  if (u != 0.0) {
    for (Eigen::Index i = 0; i < grid.n; ++i) {
      out[i] *= std::polar(1.0, u * grid.x(i) / hbar);
    }
  }
  // Mass that a shift has carried into the outer sixteenth of the domain has wrapped around.
  Eigen::Index const edge = std::max<Eigen::Index>(1, grid.n / 32);
  double const before = (psi.amplitudes().head(edge).squaredNorm() + psi.amplitudes().tail(edge).squaredNorm()) * grid.dx;
  double const after = (out.head(edge).squaredNorm() + out.tail(edge).squaredNorm()) * grid.dx;
  if (after > 1e-10 && after > 10 * before) {
    throw BoostError("boost aliases mass across the periodic boundary");
  }
  return WaveFunction(grid, std::move(out));
}

void EvolveConfig::validate(Grid const &grid, ModelParams const &params) const
{
  if (!(dt > 0) || !std::isfinite(dt)) {
    throw ConfigError("dt must be positive");
  }
  if (!(t_max >= 0)) {
    throw ConfigError("t_max must be non-negative");
  }
  if (!(convergence_tol > 0)) {
    throw ConfigError("convergence_tol must be positive");
  }
  double const bound = stability_dt_bound(grid, params);
  if (dt > bound * (1 + 1e-12)) {
    throw ConfigError("dt = " + std::to_string(dt) + " exceeds the kinetic stability bound dx^2 m/(pi hbar) = " +
                      std::to_string(bound));
  }
}

double stability_dt_bound(Grid const &grid, ModelParams const &params)
{
  return grid.dx * grid.dx * params.mass / (pi * params.hbar);
}

double default_dt(Grid const &grid, ModelParams const &params)
{
  return std::min(0.1 * grid.dx * grid.dx * params.mass / params.hbar, 0.02 / params.gamma);
}

NonlinearPropagator::NonlinearPropagator(Grid const &grid, ModelParams const &params, LocalizationRate const &rate,
                                         double dt, double potential_slope)
  : grid_(grid)
  , params_(params)
  , dt_(dt)
  , slope_(potential_slope)
  , conv_(grid, rate)
  , k_(grid.wavenumbers())
{
  set_dt(dt);
}

void NonlinearPropagator::set_dt(double dt)
{
  dt_ = dt;
  half_kinetic_.resize(grid_.n);
  for (Eigen::Index j = 0; j < grid_.n; ++j) {
    half_kinetic_[j] = std::polar(1.0, -params_.hbar * k_[j] * k_[j] * dt_ / (4 * params_.mass));
  }
  potential_phase_.resize(0);
  if (slope_ != 0.0) {
    potential_phase_.resize(grid_.n);
    for (Eigen::Index i = 0; i < grid_.n; ++i) {
      potential_phase_[i] = std::polar(1.0, -slope_ * grid_.x(i) * dt_ / params_.hbar);
    }
  }
}

void NonlinearPropagator::kinetic(WaveFunction &psi, Eigen::VectorXcd const &phase)
{
  spectral_.multiply_in_fourier(psi.amplitudes(), phase);
}

void NonlinearPropagator::update_lambda(Eigen::VectorXd const &density)
{
  conv_.apply(density, gf_);
  double const mean = density.dot(gf_) * grid_.dx;
  lambda_ = gf_.array() - mean;
}

double NonlinearPropagator::step(WaveFunction &psi)
{
  require_same_grid(psi.grid(), grid_, "nonlinear step");
  kinetic(psi, half_kinetic_);

  // Midpoint rule for the density-dependent decay: predict the density half a step ahead.
  density_ = psi.amplitudes().cwiseAbs2();
  double const n0 = density_.sum() * grid_.dx;
  density_ /= n0;
  update_lambda(density_);
  density_.array() *= (-lambda_.array() * dt_).exp();
  density_ /= density_.sum() * grid_.dx;
  update_lambda(density_);

  Eigen::ArrayXd const decay = (-lambda_.array() * dt_).exp();
  psi.amplitudes().array() *= decay.cast<Complex>();
  if (potential_phase_.size() != 0) {
    psi.amplitudes().array() *= potential_phase_.array();
  }
  kinetic(psi, half_kinetic_);
  double const n2 = psi.normalize();
  return std::abs(n2 - n0);
}

Eigen::VectorXd const &NonlinearPropagator::lambda(WaveFunction const &psi)
{
  require_same_grid(psi.grid(), grid_, "lambda");
  density_ = psi.density();
  update_lambda(density_);
  return lambda_;
}

double NonlinearPropagator::mean_localization(WaveFunction const &psi)
{
  require_same_grid(psi.grid(), grid_, "mean localisation");
  density_ = psi.density();
  conv_.apply(density_, gf_);
  return density_.dot(gf_) * grid_.dx;
}

double NonlinearPropagator::mean_momentum(WaveFunction const &psi)
{
  Eigen::VectorXcd hat;
  spectral_.forward(hat, psi.amplitudes());
  double const total = hat.squaredNorm();
  return params_.hbar * hat.cwiseAbs2().dot(k_) / total;
}

PeriodicMoments periodic_moments(WaveFunction const &psi)
{
  Grid const &grid = psi.grid();
  Eigen::VectorXd const rho = psi.density();
  double const w = 2 * pi / grid.length();
  Complex z = 0;
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    z += rho[i] * std::polar(1.0, w * (grid.x(i) - grid.x0));
  }
  z *= grid.dx;
  double const r = std::min(std::abs(z), 1.0);
  PeriodicMoments m;
  m.centroid = grid.x0 + std::arg(z) / w;
  if (m.centroid < grid.x0) {
    m.centroid += grid.length();
  }
  m.spread = r > 0 ? std::sqrt(-2 * std::log(r)) / w : std::numeric_limits<double>::infinity();
  return m;
}

void recenter(WaveFunction &psi, FrameOffset &frame, NonlinearPropagator &prop, double hbar)
{
  double ds = periodic_moments(psi).centroid - psi.grid().center();
  double const dp = prop.mean_momentum(psi);
  // Shifts beyond a quarter of the domain are split in two.
  double const quarter = psi.grid().length() / 4 * (1 - 1e-9);
  if (std::abs(ds) >= quarter) {
    double const half = ds / 2;
    psi = galilei_boost(psi, -half, 0.0, hbar);
    frame.shift += half;
    ds -= half;
  }
  psi = galilei_boost(psi, -ds, -dp, hbar);
  frame.shift += ds;
  frame.momentum += dp;
}

EvolveResult evolve_nonlinear(WaveFunction const &psi0, EvolveConfig const &cfg, ModelParams const &params,
                              LocalizationRate const &rate)
{
  Grid const &grid = psi0.grid();
  cfg.validate(grid, params);
  if (std::abs(psi0.norm_squared() - 1) > 1e-10) {
    throw DomainError("evolve_nonlinear: initial state is not normalised");
  }

  auto const steps = static_cast<long>(std::ceil(cfg.t_max / cfg.dt - 1e-9));
  double const dt = steps > 0 ? cfg.t_max / static_cast<double>(steps) : cfg.dt;
  NonlinearPropagator prop(grid, params, rate, dt, cfg.potential_slope);

  EvolveResult res;
  res.final_state = psi0;
  WaveFunction &psi = res.final_state;

  auto record = [&](double t, double drift) {
    TimeSample s;
    s.t = t;
    s.norm_drift = drift;
    s.centroid = psi.centroid() + res.frame.shift;
    s.sigma = psi.position_spread();
    res.series.push_back(s);
  };

  std::vector<double> snaps = cfg.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;
  auto take_snapshots = [&](double t) {
    while (next_snap < snaps.size() && snaps[next_snap] <= t + 0.5 * dt) {
      res.snapshots.emplace_back(t, psi);
      ++next_snap;
    }
  };

  take_snapshots(0.0);
  if (cfg.record_interval > 0) {
    record(0.0, 0.0);
  }
  double next_record = cfg.record_interval;
  double threshold = 0;
  for (long i = 1; i <= steps; ++i) {
    double const drift = prop.step(psi);
    double const t = dt * static_cast<double>(i);
    res.frame.shift += res.frame.momentum / params.mass * dt;
    if (i == 1) {
      res.drift_constant = drift / (dt * dt);
      threshold = 100 * dt * dt * res.drift_constant + 1e-12;
    } else if (!(drift <= threshold)) { // also catches NaN
      throw InstabilityError("norm drift " + std::to_string(drift) + " at t = " + std::to_string(t) +
                             " exceeds 100 dt^2 times the initial drift constant; reduce dt");
    }
    res.max_norm_drift = std::max(res.max_norm_drift, drift);
    if (cfg.recenter && i % 256 == 0) {
      recenter(psi, res.frame, prop, params.hbar);
    }
    if (cfg.record_interval > 0 && t >= next_record - 0.5 * dt) {
      record(t, drift);
      next_record += cfg.record_interval;
    }
    take_snapshots(t);
  }
  res.t_final = dt * static_cast<double>(steps);
  return res;
}

TailFit fit_exponential_tail(Grid const &grid, Eigen::VectorXd const &envelope, double lo, double hi)
{
  Eigen::Index peak_index = 0;
  double const peak = envelope.maxCoeff(&peak_index);
  double const xp = grid.x(peak_index);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::size_t m = 0;
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    double const r = envelope[i] / peak;
    if (r < lo || r > hi) {
      continue;
    }
    double const x = std::abs(grid.x(i) - xp);
    double const y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++m;
  }
  TailFit fit;
  fit.points = m;
  if (m < 3) {
    return fit;
  }
  double const dm = static_cast<double>(m);
  double const cxx = sxx - sx * sx / dm;
  double const cxy = sxy - sx * sy / dm;
  double const cyy = syy - sy * sy / dm;
  fit.k = -cxy / cxx;
  fit.r_squared = cxy * cxy / (cxx * cyy);
  return fit;
}

double envelope_residual(Eigen::VectorXd const &a, Eigen::VectorXd const &b, double dx)
{
  return (a - b).norm() * std::sqrt(dx);
}

Grid default_soliton_grid(ModelParams const &params)
{
  return Grid::centered(80.0 * params.localization_length(), 4096);
}

double expected_soliton_width(double kappa)
{
  // Quadratic-core value (kappa/2)^(1/4) for small kappa; above kappa ~ 0.3 empirical fits to measured
  // widths (roughly 1.6 kappa once kappa >~ 1).
  return std::max({std::pow(kappa / 2, 0.25), 1.6 * std::pow(kappa, 0.7), 1.6 * kappa});
}

Grid sweep_soliton_grid(ModelParams const &params)
{
  double const est = expected_soliton_width(params.kappa());
  double const length = std::max(80.0, 40.0 * est);
  double const dx_max = est / 4;
  Eigen::Index n = 1024;
  while (length / static_cast<double>(n) > dx_max && n < (1 << 16)) {
    n *= 2;
  }
  return Grid::centered(length * params.localization_length(), n);
}

SolitonProfile find_soliton(ModelParams const &params, LocalizationRate const &rate, SolitonSearch const &search)
{
  Grid const &grid = search.grid;
  EvolveConfig const &cfg = search.evolve;
  cfg.validate(grid, params);

  WaveFunction psi = search.initial ? *search.initial
                                    : gaussian_packet(grid, grid.center(), params.localization_length(), 0.0, params.hbar);
  require_same_grid(psi.grid(), grid, "find_soliton");

  NonlinearPropagator prop(grid, params, rate, cfg.dt, cfg.potential_slope);
  SolitonProfile out;
  FrameOffset frame;

  // Recentre only once the state is localised on the scale of the domain.
  double const localized_spread = grid.length() / 8;
  auto maybe_recenter = [&] {
    if (periodic_moments(psi).spread < localized_spread) {
      recenter(psi, frame, prop, params.hbar);
      return true;
    }
    return false;
  };

  double t = 0;
  double next_record = cfg.record_interval;
  double threshold = 0;
  long step_index = 0;
  auto advance_to = [&](double t_target) {
    while (t < t_target - 0.5 * cfg.dt) {
      double const drift = prop.step(psi);
      t += cfg.dt;
      ++step_index;
      frame.shift += frame.momentum / params.mass * cfg.dt;
      if (step_index == 1) {
        // A near-stationary start can drift far below the scheme's O(dt^3) scale; floor the bound there.
        double const gdt = params.gamma * cfg.dt;
        threshold = std::max(100 * drift, gdt * gdt * gdt) + 1e-12;
      } else if (!(drift <= threshold)) { // also catches NaN
        throw InstabilityError("norm drift " + format_double(drift) + " at step " + std::to_string(step_index) +
                               " exceeds its bound " + format_double(threshold) + " during soliton search; reduce dt");
      }
      if (cfg.record_interval > 0 && t >= next_record - 0.5 * cfg.dt) {
        out.series.push_back({t, drift, psi.centroid() + frame.shift, psi.position_spread(), -1.0});
        next_record += cfg.record_interval;
      }
    }
  };

  // Envelopes kept so each check can compare against the state one dispersion time earlier.
  std::deque<std::pair<double, Eigen::VectorXd>> history;
  double running_min = std::numeric_limits<double>::infinity();
  double const max_check_interval = 10.0 / params.gamma;
  while (t < cfg.t_max - 0.5 * cfg.dt) {
    double sigma = psi.position_spread();
    double const t_disp = std::max(params.mass * sigma * sigma / params.hbar, 20 * cfg.dt);
    advance_to(std::min(t + std::min(t_disp, max_check_interval), cfg.t_max));
    if (!maybe_recenter()) {
      history.clear();
      continue;
    }
    sigma = psi.position_spread();
    double const window = params.mass * sigma * sigma / params.hbar;
    Eigen::VectorXd env = psi.envelope();
    while (history.size() > 1 && history[1].first <= t - window + 0.5 * cfg.dt) {
      history.pop_front();
    }
    if (!history.empty() && history.front().first <= t - window + 0.5 * cfg.dt) {
      double const r = envelope_residual(env, history.front().second, grid.dx);
      out.residual_history.push_back(r);
      if (!out.series.empty()) {
        out.series.back().shape_residual = r;
      }
      out.residual = r;
      if (r < cfg.convergence_tol) {
        out.converged = true;
        break;
      }
      if (static_cast<int>(out.residual_history.size()) > search.transient_checks) {
        if (r > 1e3 * running_min) {
          throw ConvergenceError("soliton search: shape residual grew after the transient", out.residual_history);
        }
        running_min = std::min(running_min, r);
      }
    }
    history.emplace_back(t, std::move(env));
  }

  out.t_final = t;
  out.state = psi;
  out.envelope = psi.envelope();
  out.v0 = frame.momentum / params.mass;
  out.sigma_pi = psi.position_spread();
  TailFit const tail = fit_exponential_tail(grid, out.envelope);
  out.tail_k = tail.k;
  out.tail_r_squared = tail.r_squared;
  return out;
}

std::vector<WidthRow> width_curve(std::vector<double> const &kappas, WidthSweepConfig const &cfg)
{
  auto run_row = [&cfg](double kappa) {
    WidthRow row;
    row.kappa = kappa;
    try {
      if (!(kappa > 0)) {
        throw ConfigError("kappa must be positive");
      }
      ModelParams const params{1.0, std::sqrt(kappa), 1.0, 1.0};
      LocalizationRate const rate(params);
      SolitonSearch search{sweep_soliton_grid(params), {}, std::nullopt, 3};
      search.evolve.dt = default_dt(search.grid, params);
      search.evolve.t_max = cfg.t_max;
      search.evolve.convergence_tol = cfg.convergence_tol;
      search.evolve.record_interval = 0;
      // Start near the expected width: a narrow start at large kappa spreads over the whole domain
      // before it re-localises, which takes far longer than the soliton itself needs to form.
      search.initial = gaussian_packet(search.grid, search.grid.center(),
                                       expected_soliton_width(kappa) * params.localization_length());
      row.n = search.grid.n;
      row.domain = search.grid.length();
      SolitonProfile const prof = find_soliton(params, rate, search);
      row.width = prof.sigma_pi * params.sigma_G / params.hbar;
      row.converged = prof.converged;
      row.residual = prof.residual;
      row.t_final = prof.t_final;
    } catch (std::exception const &e) {
      row.error = e.what();
    }
    return row;
  };

  std::vector<WidthRow> rows(kappas.size());
  unsigned const workers = std::max(1u, cfg.workers);
  for (std::size_t begin = 0; begin < kappas.size(); begin += workers) {
    std::vector<std::future<WidthRow>> batch;
    for (std::size_t i = begin; i < std::min(kappas.size(), begin + workers); ++i) {
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, run_row, kappas[i]));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      rows[begin + i] = batch[i].get();
    }
  }
  return rows;
}

} // namespace pointer
