#pragma once

#include "kernels.hpp"
#include "rng.hpp"

#include <cstdint>
#include <vector>

namespace pointer {

/// N packet coefficients c_i on non-overlapping packets centred at x_i.
struct PacketEnsembleState
{
  Eigen::VectorXcd c;
  Eigen::VectorXd x;

  PacketEnsembleState() = default;
  PacketEnsembleState(Eigen::VectorXcd coefficients, Eigen::VectorXd positions);

  Eigen::Index size() const { return c.size(); }
  Eigen::VectorXd weights() const { return c.cwiseAbs2(); }
  double norm_error() const { return std::abs(c.squaredNorm() - 1); }

  /// Throws ConfigError unless F(x_i - x_j) >= 0.99 gamma for all i != j.
  void check_separation(LocalizationRate const &rate) const;
};

/// Packets equally spaced by `separation`, centred on zero.
Eigen::VectorXd packet_positions(Eigen::Index n, double separation);

/// Uniform point on the probability simplex (normalised exponential spacings) with uniform phases.
Eigen::VectorXcd simplex_coefficients(Eigen::Index n, Engine &rng);

/// Right-hand side of d p_i/dt = -2 gamma (sum_j p_j^2 - p_i) p_i.
Eigen::VectorXd weight_derivative(Eigen::VectorXd const &p, double gamma);

/// One RK4 step of the weight flow; phases are kept, the result is renormalised.
/// Warns on std::clog once per process when gamma dt > 0.1.
PacketEnsembleState coefficient_flow(PacketEnsembleState const &s, double dt, double gamma);

/// sum_j p_j exp(i q x_j / hbar).
Complex packet_characteristic(PacketEnsembleState const &s, double q, double hbar = 1.0);

/// c'_k proportional to (exp(i q x_k/hbar) - sum_j p_j exp(i q x_j/hbar)) c_k, normalised.
PacketEnsembleState jump_map(PacketEnsembleState const &s, double q, double hbar = 1.0);

/// gamma G(q) (1 - |sum_j p_j exp(i q x_j / hbar)|^2).
double jump_rate_density_packets(PacketEnsembleState const &s, double q, ModelParams const &params,
                                 MomentumDistribution const &g);

/// Closed form of int r_q dq: gamma sum_{j,k} p_j p_k (1 - Re Gtilde(x_j - x_k)) = sum_{j != k} p_j p_k F(x_j - x_k).
double total_rate_packets(PacketEnsembleState const &s, LocalizationRate const &rate);

struct PacketOptions
{
  double epsilon_win = 1e-6;
  double dt = 0.01;         // RK4 step in units of 1/gamma
  double t_timeout = 1000.0; // in units of 1/gamma
  int burn_in = 50;
  bool suppress_jumps = false;
  bool record_events = false;
};

struct PacketJump
{
  double t = 0;
  double q = 0;
  double overlap = 0; // |sum conj(c_k) c'_k|
};

struct PacketTrajectory
{
  int winner = -1;
  std::size_t jumps = 0;
  double t_end = 0;
  bool timed_out = false;
  double max_overlap = 0;
  std::vector<PacketJump> events;
};

/// Reduced stochastic process: RK4 flow of the weights, thinning with bound gamma, MH draws of q with
/// proposal G. Stops when max p_i > 1 - epsilon_win and returns that index.
PacketTrajectory simulate_packet_trajectory(PacketEnsembleState const &s0, ModelParams const &params,
                                            LocalizationRate const &rate, PacketOptions const &opt,
                                            std::uint64_t seed);

struct N2Analytics
{
  double mu_infinity = 0; // expected number of jumps
  double p_win1 = 0;      // probability of an odd number of jumps
};

/// For p0 = |c_1(0)|^2 < 1/2.
N2Analytics n2_analytics(double p0);

/// Closed-form solution of dp/dt = 2 gamma p (1 - p)(2p - 1) for the smaller weight, p(0) = p0.
double n2_weight(double p0, double gamma, double t);

struct ChiSquare
{
  double chi2 = 0;
  double p_value = 1;
  int dof = 0;
  int groups = 0;
  int pooled_cells = 0; // original cells merged into a pooled group
};

/// Pearson chi-square of observed counts against probabilities. Cells with expected count below 5
/// are pooled (smallest first) until every group reaches 5.
ChiSquare chi_square_test(std::vector<std::size_t> const &counts, std::vector<double> const &probabilities);

struct WinnerStatistics
{
  std::vector<std::size_t> counts;
  std::size_t n_trials = 0;
  std::size_t timeouts = 0; // excluded from counts
  std::vector<double> expected; // |c_i(0)|^2
  ChiSquare test;
  ChiSquare control; // same counts against uniform weights
  std::vector<PacketTrajectory> trials;
  PacketEnsembleState initial;
};

struct BornTestConfig
{
  Eigen::Index n_packets = 2;
  std::size_t n_trials = 10000;
  std::uint64_t seed = 1;
  double separation = 20.0; // in units of hbar/sigma_G
  PacketOptions packet;
  unsigned workers = 1;
  /// Optional fixed initial weights (otherwise simplex picking from the set-up stream).
  std::vector<double> weights;
};

WinnerStatistics born_weight_test(BornTestConfig const &cfg, ModelParams const &params);

struct ShapeConsistency
{
  Eigen::MatrixXd overlap_integrals; // int |phi_i|^2 (|phi_j|^2 * F)
  double max_offdiagonal_error = 0;  // max |M_ij / gamma - 1|, i != j
  double residual = 0;               // L2 distance of the two one-step results
};

/// Compares one step dt of the nonlinear equation for psi = sum c_i phi_i with the decomposed
/// evolution: weights by the reduced flow, packets by their coupled equation
///   d phi_i/dt = (i hbar/2m) phi_i'' - phi_i Lambda[|phi_i|^2] + phi_i sum_{j != i} |c_j|^2 gt_ij,
///   gt_ij(x) = (|phi_i|^2 * F)(x) - (|phi_j|^2 * F)(x) + gamma.
/// Both results are normalised before comparison.
ShapeConsistency packet_shape_consistency(std::vector<WaveFunction> const &phi, Eigen::VectorXcd const &c,
                                          ModelParams const &params, LocalizationRate const &rate, double dt);

} // namespace pointer
