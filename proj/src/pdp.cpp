#include "pointer/pdp.hpp"
#include "pointer/sampling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace pointer {

namespace {

Eigen::VectorXcd plane_wave(Grid const &grid, double q, double hbar)
{
  Eigen::VectorXcd e(grid.n);
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    e[i] = std::polar(1.0, q * grid.x(i) / hbar);
  }
  return e;
}

Complex weighted_mean(Eigen::VectorXd const &g, Eigen::VectorXcd const &e)
{
  // Dividing by the sampled mass keeps chi(0) = 1 and the jump output orthogonal to round-off.
  return g.cast<Complex>().dot(e) / g.sum();
}

} // namespace

Complex characteristic_fn(WaveFunction const &psi, double q, double hbar)
{
  Eigen::VectorXd const g = psi.density();
  return weighted_mean(g, plane_wave(psi.grid(), q, hbar));
}

double jump_rate_density(WaveFunction const &psi, double q, ModelParams const &params, MomentumDistribution const &g)
{
  double const c2 = std::norm(characteristic_fn(psi, q, params.hbar));
  return params.gamma * g.density(q) * std::max(0.0, 1 - c2);
}

double total_jump_rate(WaveFunction const &psi, LocalizationRate const &rate)
{
  Convolver conv(psi.grid(), rate);
  Eigen::VectorXd const g = psi.density();
  return g.dot(conv.apply(g)) * psi.grid().dx;
}

WaveFunction apply_jump(WaveFunction const &psi, double q, double hbar)
{
  Eigen::VectorXd const g = psi.density();
  Eigen::VectorXcd const e = plane_wave(psi.grid(), q, hbar);
  Complex const chi = weighted_mean(g, e);
  if (!(1 - std::norm(chi) > 1e-14)) {
    throw DegenerateJumpError("jump rate vanishes for q = " + std::to_string(q));
  }
  Eigen::VectorXcd out = ((e.array() - chi) * psi.amplitudes().array()).matrix();
  return WaveFunction(psi.grid(), std::move(out));
}

std::size_t TrajectoryRecord::jumps() const
{
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](JumpEvent const &e) { return e.accepted; }));
}

TrajectoryRecord simulate_trajectory(WaveFunction const &psi0, TrajectoryOptions const &opt, ModelParams const &params,
                                     LocalizationRate const &rate, std::uint64_t seed)
{
  auto const wall_start = std::chrono::steady_clock::now();
  Grid const &grid = psi0.grid();
  if (!(opt.dt > 0) || !(opt.t_max >= 0)) {
    throw ConfigError("trajectory needs dt > 0 and t_max >= 0");
  }
  if (opt.dt > stability_dt_bound(grid, params) * (1 + 1e-12)) {
    throw ConfigError("trajectory dt exceeds the kinetic stability bound");
  }
  if (std::abs(psi0.norm_squared() - 1) > 1e-10) {
    throw DomainError("simulate_trajectory: initial state is not normalised");
  }

  TrajectoryRecord rec;
  rec.seed = seed;
  rec.final_psi = psi0;
  WaveFunction &psi = rec.final_psi;

  Engine rng(seed);
  IndependenceSampler sampler(opt.burn_in);
  MomentumDistribution const &g = rate.distribution();
  double const bound = rate.gamma();
  std::exponential_distribution<double> waiting(bound > 0 ? bound : 1.0);
  double const inf = std::numeric_limits<double>::infinity();

  NonlinearPropagator full(grid, params, rate, opt.dt);
  NonlinearPropagator partial(grid, params, rate, opt.dt);

  std::vector<double> snaps = opt.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;
  auto take_snapshots = [&](double t) {
    while (next_snap < snaps.size() && snaps[next_snap] <= t + 1e-12 * std::max(1.0, t)) {
      rec.snapshots.emplace_back(snaps[next_snap], psi);
      ++next_snap;
    }
  };

  // The per-step drift is bounded by the full-step drift at t = 0 or, after jumps have sharpened the
  // state, by the scale dt^2 gamma^2 set by |Lambda| <= 2 gamma.
  double drift_scale = opt.dt * opt.dt * std::max(bound * bound, 1e-300);
  bool first_full = true;

  double t = 0;
  double next_candidate = bound > 0 ? waiting(rng) : inf;
  take_snapshots(0.0);
  while (t < opt.t_max) {
    double const snap_t = next_snap < snaps.size() ? snaps[next_snap] : inf;
    double const target = std::min({opt.t_max, next_candidate, snap_t});
    while (t < target) {
      double drift = 0;
      if (target - t >= opt.dt) {
        drift = full.step(psi);
        t += opt.dt;
        if (first_full) {
          drift_scale = std::max(drift_scale, drift);
          first_full = false;
        }
      } else {
        partial.set_dt(target - t);
        drift = partial.step(psi);
        t = target;
      }
      if (drift > 100 * drift_scale + 1e-12) {
        throw InstabilityError("trajectory norm drift " + std::to_string(drift) + " at t = " + std::to_string(t) +
                               "; reduce dt");
      }
      if (target - t < 1e-12 * std::max(1.0, target)) {
        t = target;
      }
    }
    take_snapshots(t);
    if (t == next_candidate && t < opt.t_max) {
      ++rec.candidates;
      double const r_tot = full.mean_localization(psi);
      double const ratio = r_tot / bound;
      rec.max_rate_ratio = std::max(rec.max_rate_ratio, ratio);
      if (ratio > 1 + 1e-12) {
        throw Error("total jump rate exceeds the thinning bound gamma");
      }
      JumpEvent ev;
      ev.t = t;
      ev.r_tot_at_jump = r_tot;
      ev.accepted = uniform01(rng) < ratio;
      if (ev.accepted) {
        auto weight = [&psi, &params](double q) { return std::max(0.0, 1 - std::norm(characteristic_fn(psi, q, params.hbar))); };
        ev.q = sampler.draw(weight, g, rng);
        WaveFunction jumped = apply_jump(psi, ev.q, params.hbar);
        ev.overlap = std::abs(psi.inner(jumped));
        psi = std::move(jumped);
      }
      if (ev.accepted || opt.record_rejected) {
        rec.events.push_back(ev);
      }
      next_candidate = t + waiting(rng);
    }
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return rec;
}

int winner_index(WaveFunction const &psi, std::vector<double> const &centers, WinnerRule rule)
{
  if (centers.empty()) {
    throw ConfigError("winner_index needs at least one packet centre");
  }
  auto nearest = [&centers](double x) {
    int best = 0;
    for (std::size_t k = 1; k < centers.size(); ++k) {
      if (std::abs(x - centers[k]) < std::abs(x - centers[static_cast<std::size_t>(best)])) {
        best = static_cast<int>(k);
      }
    }
    return best;
  };
  if (rule == WinnerRule::Nearest) {
    return nearest(psi.centroid());
  }
  std::vector<double> mass(centers.size(), 0.0);
  Eigen::VectorXd const rho = psi.density();
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    mass[static_cast<std::size_t>(nearest(psi.grid().x(i)))] += rho[i] * psi.grid().dx;
  }
  for (std::size_t k = 0; k < mass.size(); ++k) {
    if (mass[k] > 0.9) {
      return static_cast<int>(k);
    }
  }
  return -1;
}

WaveFunction downsample(WaveFunction const &psi, Eigen::Index factor)
{
  Grid const &g = psi.grid();
  if (factor < 1 || g.n % factor != 0) {
    throw DimensionError("downsampling factor must divide the grid size");
  }
  Grid const coarse(g.x0, g.dx * static_cast<double>(factor), g.n / factor);
  Eigen::VectorXcd a(coarse.n);
  for (Eigen::Index i = 0; i < coarse.n; ++i) {
    a[i] = psi[i * factor];
  }
  return WaveFunction(coarse, std::move(a));
}

EnsembleDensity ensemble_density(std::vector<WaveFunction> const &states)
{
  if (states.empty()) {
    throw ConfigError("ensemble_density: empty ensemble");
  }
  Grid const &grid = states.front().grid();
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(grid.n, grid.n);
  Eigen::MatrixXd sum_abs2 = Eigen::MatrixXd::Zero(grid.n, grid.n);
  for (auto const &psi : states) {
    require_same_grid(psi.grid(), grid, "ensemble density");
    sum.noalias() += psi.amplitudes() * psi.amplitudes().adjoint();
    Eigen::VectorXd const g = psi.density();
    sum_abs2.noalias() += g * g.transpose();
  }
  double const m = static_cast<double>(states.size());
  EnsembleDensity out;
  out.members = states.size();
  Eigen::MatrixXcd mean = sum / m;
  out.std_error = Eigen::MatrixXd::Zero(grid.n, grid.n);
  if (states.size() > 1) {
    Eigen::MatrixXd const var = ((sum_abs2 - m * mean.cwiseAbs2()) / (m - 1)).cwiseMax(0.0);
    out.std_error = (var / m).cwiseSqrt();
  }
  out.rho = DensityMatrix(grid, std::move(mean));
  return out;
}

namespace {

constexpr char snapshot_magic[8] = {'P', 'T', 'R', 'S', 'N', 'A', 'P', '1'};

template <typename T>
void put(std::ostream &os, T v)
{
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream &is)
{
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) {
    throw DomainError("truncated snapshot");
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void write_header(std::ostream &os, std::uint32_t kind, Grid const &grid, std::uint64_t rows, std::uint64_t cols, double t)
{
  os.write(snapshot_magic, sizeof snapshot_magic);
  put<std::uint32_t>(os, kind);
  put<std::uint32_t>(os, 0);
  put<std::uint64_t>(os, rows);
  put<std::uint64_t>(os, cols);
  put<double>(os, grid.x0);
  put<double>(os, grid.dx);
  put<double>(os, t);
}

} // namespace

void write_snapshot(std::ostream &os, WaveFunction const &psi, double t)
{
  auto const n = static_cast<std::uint64_t>(psi.size());
  write_header(os, 1, psi.grid(), n, 1, t);
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    put<double>(os, psi[i].real());
    put<double>(os, psi[i].imag());
  }
}

void write_snapshot(std::ostream &os, DensityMatrix const &rho, double t)
{
  auto const n = static_cast<std::uint64_t>(rho.grid().n);
  write_header(os, 2, rho.grid(), n, n, t);
  for (Eigen::Index i = 0; i < rho.grid().n; ++i) {
    for (Eigen::Index j = 0; j < rho.grid().n; ++j) {
      put<double>(os, rho.kernel()(i, j).real());
      put<double>(os, rho.kernel()(i, j).imag());
    }
  }
}

std::pair<WaveFunction, double> read_wavefunction_snapshot(std::istream &is)
{
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, snapshot_magic, sizeof magic) != 0) {
    throw DomainError("not a snapshot file");
  }
  if (get<std::uint32_t>(is) != 1) {
    throw DomainError("snapshot does not hold a wave function");
  }
  get<std::uint32_t>(is);
  auto const rows = get<std::uint64_t>(is);
  get<std::uint64_t>(is);
  double const x0 = get<double>(is);
  double const dx = get<double>(is);
  double const t = get<double>(is);
  Grid const grid(x0, dx, static_cast<Eigen::Index>(rows));
  Eigen::VectorXcd a(grid.n);
  for (Eigen::Index i = 0; i < grid.n; ++i) {
    double const re = get<double>(is);
    double const im = get<double>(is);
    a[i] = {re, im};
  }
  return {WaveFunction(grid, std::move(a), false), t};
}

} // namespace pointer
