#pragma once

#include "kernels.hpp"
#include "rng.hpp"

#include <cstddef>

namespace pointer {

/// Metropolis-Hastings chain with independence proposal G(q) for a target proportional to G(q) w(q).
/// The acceptance ratio reduces to w(q')/w(q). The chain state is kept between calls so that
/// successive jumps of one trajectory continue the same chain; the weight of the current state is
/// re-evaluated on each call because the target changes between jumps.
class IndependenceSampler
{
public:
  explicit IndependenceSampler(int burn_in = 50)
    : burn_in_(burn_in)
  {
  }

  /// Draw q after burn_in steps. w must be non-negative with some positive mass under G.
  template <typename Weight>
  double draw(Weight &&w, MomentumDistribution const &g, Engine &rng)
  {
    double wq = has_state_ ? w(q_) : 0.0;
    // A fresh chain (or one whose state now has zero weight) starts from the first proposal with w > 0.
    for (int tries = 0; !(wq > 0); ++tries) {
      if (tries > 100000) {
        throw DegenerateJumpError("jump-rate density vanishes on all proposed momentum transfers");
      }
      q_ = g.sample(rng);
      wq = w(q_);
    }
    has_state_ = true;
    for (int i = 0; i < burn_in_; ++i) {
      double const qp = g.sample(rng);
      double const wp = w(qp);
      ++proposed_;
      if (uniform01(rng) * wq < wp) {
        q_ = qp;
        wq = wp;
        ++accepted_;
      }
    }
    return q_;
  }

  double state() const { return q_; }
  std::size_t proposed() const { return proposed_; }
  std::size_t accepted() const { return accepted_; }

private:
  int burn_in_;
  bool has_state_ = false;
  double q_ = 0;
  std::size_t proposed_ = 0;
  std::size_t accepted_ = 0;
};

} // namespace pointer
