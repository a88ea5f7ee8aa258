#include "pointer/packets.hpp"
#include "pointer/sampling.hpp"
#include "pointer/soliton.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>

namespace pointer {

PacketEnsembleState::PacketEnsembleState(Eigen::VectorXcd coefficients, Eigen::VectorXd positions)
  : c(std::move(coefficients))
  , x(std::move(positions))
{
  if (c.size() != x.size() || c.size() == 0) {
    throw DimensionError("packet state needs one position per coefficient");
  }
  double const n2 = c.squaredNorm();
  if (!(n2 > 0) || !std::isfinite(n2)) {
    throw DomainError("packet coefficients must not all vanish");
  }
  c /= std::sqrt(n2);
}

void PacketEnsembleState::check_separation(LocalizationRate const &rate) const
{
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (Eigen::Index j = i + 1; j < x.size(); ++j) {
      if (rate(x[i] - x[j]) < 0.99 * rate.gamma()) {
        throw ConfigError("packets " + std::to_string(i) + " and " + std::to_string(j) +
                          " are too close: F(x_i - x_j) < 0.99 gamma");
      }
    }
  }
}

Eigen::VectorXd packet_positions(Eigen::Index n, double separation)
{
  return Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index i) {
    return separation * (static_cast<double>(i) - static_cast<double>(n - 1) / 2);
  });
}

Eigen::VectorXcd simplex_coefficients(Eigen::Index n, Engine &rng)
{
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = e(rng);
  }
  w /= w.sum();
  Eigen::VectorXcd c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c[i] = std::polar(std::sqrt(w[i]), 2 * std::numbers::pi * uniform01(rng));
  }
  return c;
}

Eigen::VectorXd weight_derivative(Eigen::VectorXd const &p, double gamma)
{
  double const s = p.squaredNorm();
  return (-2 * gamma * (s - p.array()) * p.array()).matrix();
}

PacketEnsembleState coefficient_flow(PacketEnsembleState const &s, double dt, double gamma)
{
  static std::atomic<bool> warned{false};
  if (gamma * dt > 0.1 && !warned.exchange(true)) {
    std::clog << "warning: coefficient flow step gamma*dt = " << gamma * dt << " > 0.1 loses accuracy\n";
  }
  Eigen::VectorXd const p = s.weights();
  Eigen::VectorXd const k1 = weight_derivative(p, gamma);
  Eigen::VectorXd const k2 = weight_derivative(p + 0.5 * dt * k1, gamma);
  Eigen::VectorXd const k3 = weight_derivative(p + 0.5 * dt * k2, gamma);
  Eigen::VectorXd const k4 = weight_derivative(p + dt * k3, gamma);
  Eigen::VectorXd pn = (p + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)).cwiseMax(0.0);
  pn /= pn.sum();

  PacketEnsembleState out = s;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out.c[i] = p[i] > 0 ? s.c[i] * std::sqrt(pn[i] / p[i]) : Complex{};
  }
  out.c /= out.c.norm();
  return out;
}

Complex packet_characteristic(PacketEnsembleState const &s, double q, double hbar)
{
  Complex chi = 0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    chi += std::norm(s.c[j]) * std::polar(1.0, q * s.x[j] / hbar);
  }
  return chi;
}

PacketEnsembleState jump_map(PacketEnsembleState const &s, double q, double hbar)
{
  Complex const chi = packet_characteristic(s, q, hbar) / s.c.squaredNorm();
  if (!(1 - std::norm(chi) > 1e-14)) {
    throw DegenerateJumpError("packet jump rate vanishes for q = " + std::to_string(q));
  }
  PacketEnsembleState out = s;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    out.c[k] = (std::polar(1.0, q * s.x[k] / hbar) - chi) * s.c[k];
  }
  out.c /= out.c.norm();
  return out;
}

double jump_rate_density_packets(PacketEnsembleState const &s, double q, ModelParams const &params,
                                 MomentumDistribution const &g)
{
  return params.gamma * g.density(q) * std::max(0.0, 1 - std::norm(packet_characteristic(s, q, params.hbar)));
}

double total_rate_packets(PacketEnsembleState const &s, LocalizationRate const &rate)
{
  Eigen::VectorXd const p = s.weights();
  double r = 0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      r += 2 * p[j] * p[k] * rate(s.x[j] - s.x[k]);
    }
  }
  return r;
}

PacketTrajectory simulate_packet_trajectory(PacketEnsembleState const &s0, ModelParams const &params,
                                            LocalizationRate const &rate, PacketOptions const &opt,
                                            std::uint64_t seed)
{
  if (!(opt.dt > 0) || !(opt.epsilon_win > 0) || !(opt.epsilon_win < 0.5)) {
    throw ConfigError("packet trajectory needs dt > 0 and 0 < epsilon_win < 1/2");
  }
  PacketTrajectory out;
  PacketEnsembleState s = s0;
  Engine rng(seed);
  IndependenceSampler sampler(opt.burn_in);
  double const gamma = params.gamma;
  double const bound = rate.gamma();
  double const t_timeout = opt.t_timeout / gamma;
  double const h = opt.dt / gamma;
  std::exponential_distribution<double> waiting(bound > 0 ? bound : 1.0);
  double const inf = std::numeric_limits<double>::infinity();

  auto finished = [&] {
    Eigen::Index imax = 0;
    double const pmax = s.weights().maxCoeff(&imax);
    if (pmax > 1 - opt.epsilon_win) {
      out.winner = static_cast<int>(imax);
      return true;
    }
    return false;
  };

  double t = 0;
  bool const jumps = !opt.suppress_jumps && bound > 0;
  double next_candidate = jumps ? waiting(rng) : inf;
  while (!finished()) {
    if (t >= t_timeout) {
      out.timed_out = true;
      Eigen::Index imax = 0;
      s.weights().maxCoeff(&imax);
      out.winner = static_cast<int>(imax);
      break;
    }
    double const target = std::min(next_candidate, t_timeout);
    bool done = false;
    while (t < target) {
      bool const last = target - t <= h;
      s = coefficient_flow(s, last ? target - t : h, gamma);
      t = last ? target : t + h;
      if (finished()) {
        done = true;
        break;
      }
    }
    if (done) {
      break;
    }
    if (t == next_candidate) {
      double const r_tot = total_rate_packets(s, rate);
      if (r_tot > bound * (1 + 1e-12)) {
        throw Error("packet jump rate exceeds the thinning bound gamma");
      }
      if (uniform01(rng) * bound < r_tot) {
        auto weight = [&s, &params](double q) {
          return std::max(0.0, 1 - std::norm(packet_characteristic(s, q, params.hbar)));
        };
        double const q = sampler.draw(weight, rate.distribution(), rng);
        PacketEnsembleState const next = jump_map(s, q, params.hbar);
        double const overlap = std::abs(s.c.dot(next.c));
        out.max_overlap = std::max(out.max_overlap, overlap);
        if (opt.record_events) {
          out.events.push_back({t, q, overlap});
        }
        s = next;
        ++out.jumps;
      }
      next_candidate = t + waiting(rng);
    }
  }
  out.t_end = t;
  return out;
}

N2Analytics n2_analytics(double p0)
{
  if (!(p0 >= 0) || !(p0 < 0.5)) {
    throw DomainError("n2_analytics needs 0 <= p0 < 1/2 (use the symmetry p0 -> 1 - p0)");
  }
  N2Analytics a;
  a.mu_infinity = -std::log1p(-2 * p0) / 2;
  a.p_win1 = -std::expm1(-2 * a.mu_infinity) / 2;
  return a;
}

double n2_weight(double p0, double gamma, double t)
{
  if (!(p0 >= 0) || !(p0 <= 0.5)) {
    throw DomainError("n2_weight needs 0 <= p0 <= 1/2");
  }
  if (p0 == 0 || p0 == 0.5) {
    return p0;
  }
  // (1 - 2p)^2 / (p (1 - p)) grows as exp(2 gamma t).
  double const y = (1 - 2 * p0) * (1 - 2 * p0) / (p0 * (1 - p0)) * std::exp(2 * gamma * t);
  double const root = std::sqrt(y / (4 + y));
  return 2 / ((4 + y) * (1 + root));
}

ChiSquare chi_square_test(std::vector<std::size_t> const &counts, std::vector<double> const &probabilities)
{
  if (counts.size() != probabilities.size() || counts.empty()) {
    throw DimensionError("chi-square test needs one probability per cell");
  }
  double const total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  double const psum = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probabilities[a] < probabilities[b]; });

  struct Group
  {
    double expected = 0;
    double observed = 0;
    int cells = 0;
  };
  std::vector<Group> groups;
  Group cur;
  for (std::size_t idx : order) {
    cur.expected += total * probabilities[idx] / psum;
    cur.observed += static_cast<double>(counts[idx]);
    ++cur.cells;
    if (cur.expected >= 5) {
      groups.push_back(cur);
      cur = Group{};
    }
  }
  if (cur.cells > 0) {
    if (groups.empty()) {
      groups.push_back(cur);
    } else {
      groups.back().expected += cur.expected;
      groups.back().observed += cur.observed;
      groups.back().cells += cur.cells;
    }
  }

  ChiSquare out;
  out.groups = static_cast<int>(groups.size());
  for (auto const &g : groups) {
    if (g.cells > 1) {
      out.pooled_cells += g.cells;
    }
    if (g.expected > 0) {
      out.chi2 += (g.observed - g.expected) * (g.observed - g.expected) / g.expected;
    } else if (g.observed > 0) {
      out.chi2 = std::numeric_limits<double>::infinity();
    }
  }
  out.dof = out.groups - 1;
  if (out.dof < 1) {
    out.p_value = 1.0;
  } else if (!std::isfinite(out.chi2)) {
    out.p_value = 0.0;
  } else {
    boost::math::chi_squared_distribution<double> dist(out.dof);
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.chi2));
  }
  return out;
}

WinnerStatistics born_weight_test(BornTestConfig const &cfg, ModelParams const &params)
{
  params.validate();
  if (cfg.n_packets < 2 || cfg.n_packets > 100) {
    throw ConfigError("Born weight test needs 2 <= N <= 100");
  }
  if (cfg.n_trials < 20 * static_cast<std::size_t>(cfg.n_packets)) {
    throw ConfigError("n_trials = " + std::to_string(cfg.n_trials) + " is too small for a chi-square test with N = " +
                      std::to_string(cfg.n_packets) + " (need at least 20 N)");
  }
  LocalizationRate const rate(params);
  Engine setup = make_engine(cfg.seed, setup_stream);
  Eigen::VectorXcd c = simplex_coefficients(cfg.n_packets, setup);
  if (!cfg.weights.empty()) {
    if (static_cast<Eigen::Index>(cfg.weights.size()) != cfg.n_packets) {
      throw ConfigError("initial weights must have N entries");
    }
    for (Eigen::Index i = 0; i < cfg.n_packets; ++i) {
      if (!(cfg.weights[static_cast<std::size_t>(i)] >= 0)) {
        throw ConfigError("initial weights must be non-negative");
      }
      c[i] = std::polar(std::sqrt(cfg.weights[static_cast<std::size_t>(i)]), std::arg(c[i]));
    }
  }
  WinnerStatistics stats;
  stats.initial = PacketEnsembleState(c, packet_positions(cfg.n_packets, cfg.separation * params.localization_length()));
  stats.initial.check_separation(rate);
  Eigen::VectorXd const w = stats.initial.weights();
  stats.expected.assign(w.data(), w.data() + w.size());

  stats.trials.resize(cfg.n_trials);
  unsigned const workers = std::max(1u, cfg.workers);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      stats.trials[i] = simulate_packet_trajectory(stats.initial, params, rate, cfg.packet, stream_seed(cfg.seed, i));
    }
  };
  if (workers == 1) {
    run_range(0, cfg.n_trials);
  } else {
    std::vector<std::future<void>> jobs;
    std::size_t const chunk = (cfg.n_trials + workers - 1) / workers;
    for (std::size_t b = 0; b < cfg.n_trials; b += chunk) {
      jobs.push_back(std::async(std::launch::async, run_range, b, std::min(cfg.n_trials, b + chunk)));
    }
    for (auto &j : jobs) {
      j.get();
    }
  }

  stats.counts.assign(static_cast<std::size_t>(cfg.n_packets), 0);
  for (auto const &tr : stats.trials) {
    if (tr.timed_out) {
      ++stats.timeouts;
      continue;
    }
    ++stats.counts[static_cast<std::size_t>(tr.winner)];
    ++stats.n_trials;
  }
  stats.test = chi_square_test(stats.counts, stats.expected);
  stats.control = chi_square_test(stats.counts, std::vector<double>(stats.counts.size(), 1.0));
  return stats;
}

namespace {

// exp(-i hbar k^2 tau / 2m) for a kinetic sub-step of length tau.
Eigen::VectorXcd kinetic_phase(Grid const &grid, ModelParams const &params, double tau)
{
  Eigen::VectorXd const k = grid.wavenumbers();
  Eigen::VectorXcd ph(grid.n);
  for (Eigen::Index j = 0; j < grid.n; ++j) {
    ph[j] = std::polar(1.0, -params.hbar * k[j] * k[j] * tau / (2 * params.mass));
  }
  return ph;
}

// Real growth rates of the packet equation: -Lambda[|phi_i|^2] + sum_{j != i} p_j gt_ij.
std::vector<Eigen::VectorXd> packet_rates(std::vector<Eigen::VectorXd> const &dens, Eigen::VectorXd const &p,
                                          Convolver &conv, double gamma, double dx)
{
  std::size_t const n = dens.size();
  std::vector<Eigen::VectorXd> gf(n);
  for (std::size_t i = 0; i < n; ++i) {
    gf[i] = conv.apply(dens[i]);
  }
  std::vector<Eigen::VectorXd> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double const mass = dens[i].sum() * dx;
    double const self = dens[i].dot(gf[i]) * dx / mass;
    Eigen::ArrayXd r = -(gf[i].array() - self);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) {
        r += p[static_cast<Eigen::Index>(j)] * (gf[i].array() - gf[j].array() + gamma);
      }
    }
    out[i] = r.matrix();
  }
  return out;
}

Eigen::VectorXd rk4_weights(Eigen::VectorXd const &p, double gamma, double dt)
{
  Eigen::VectorXd const k1 = weight_derivative(p, gamma);
  Eigen::VectorXd const k2 = weight_derivative(p + 0.5 * dt * k1, gamma);
  Eigen::VectorXd const k3 = weight_derivative(p + 0.5 * dt * k2, gamma);
  Eigen::VectorXd const k4 = weight_derivative(p + dt * k3, gamma);
  return p + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

} // namespace

ShapeConsistency packet_shape_consistency(std::vector<WaveFunction> const &phi, Eigen::VectorXcd const &c,
                                          ModelParams const &params, LocalizationRate const &rate, double dt)
{
  if (phi.empty() || static_cast<Eigen::Index>(phi.size()) != c.size()) {
    throw DimensionError("packet_shape_consistency needs one coefficient per packet");
  }
  Grid const &grid = phi.front().grid();
  std::size_t const n = phi.size();
  for (std::size_t i = 0; i < n; ++i) {
    require_same_grid(phi[i].grid(), grid, "packet_shape_consistency");
    for (std::size_t j = i + 1; j < n; ++j) {
      double const ov = phi[i].envelope().dot(phi[j].envelope()) * grid.dx;
      if (ov > 1e-8) {
        throw DomainError("packets " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }

  ShapeConsistency out;
  Convolver conv(grid, rate);
  std::vector<Eigen::VectorXd> dens(n);
  for (std::size_t i = 0; i < n; ++i) {
    dens[i] = phi[i].density();
  }
  out.overlap_integrals.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    Eigen::VectorXd const gf = conv.apply(dens[j]);
    for (std::size_t i = 0; i < n; ++i) {
      double const m = dens[i].dot(gf) * grid.dx;
      out.overlap_integrals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m;
      if (i != j) {
        out.max_offdiagonal_error = std::max(out.max_offdiagonal_error, std::abs(m / rate.gamma() - 1));
      }
    }
  }

  Eigen::VectorXcd const cn = c / c.norm();
  Eigen::VectorXd const p = cn.cwiseAbs2();

  // Route 1: the nonlinear equation for the assembled state.
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(grid.n);
  for (std::size_t i = 0; i < n; ++i) {
    sum += cn[static_cast<Eigen::Index>(i)] * phi[i].amplitudes();
  }
  WaveFunction whole(grid, sum);
  NonlinearPropagator prop(grid, params, rate, dt);
  prop.step(whole);

  // Route 2: weights by the reduced flow, packets by their coupled equation, same splitting.
  Spectral spectral;
  Eigen::VectorXcd const half = kinetic_phase(grid, params, dt / 2);
  std::vector<Eigen::VectorXcd> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = phi[i].amplitudes();
    spectral.multiply_in_fourier(a[i], half);
    dens[i] = a[i].cwiseAbs2();
  }
  // Midpoint predictor for the density-dependent rates, as in the full propagator.
  auto rates = packet_rates(dens, p, conv, params.gamma, grid.dx);
  Eigen::VectorXd const p_mid = rk4_weights(p, params.gamma, dt / 2);
  std::vector<Eigen::VectorXd> dens_mid(n);
  for (std::size_t i = 0; i < n; ++i) {
    dens_mid[i] = (dens[i].array() * (2 * rates[i].array() * (dt / 2)).exp()).matrix();
  }
  rates = packet_rates(dens_mid, p_mid, conv, params.gamma, grid.dx);
  Eigen::VectorXd const p_end = rk4_weights(p, params.gamma, dt);

  Eigen::VectorXcd assembled = Eigen::VectorXcd::Zero(grid.n);
  for (std::size_t i = 0; i < n; ++i) {
    auto const ii = static_cast<Eigen::Index>(i);
    a[i].array() *= (rates[i].array() * dt).exp().cast<Complex>();
    spectral.multiply_in_fourier(a[i], half);
    Complex const ci = p[ii] > 0 ? cn[ii] * std::sqrt(p_end[ii] / p[ii]) : Complex{};
    assembled += ci * a[i];
  }
  WaveFunction decomposed(grid, assembled);
  out.residual = (whole.amplitudes() - decomposed.amplitudes()).norm() * std::sqrt(grid.dx);
  return out;
}

} // namespace pointer
