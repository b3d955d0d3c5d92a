#pragma once

#include "tdforge/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tdforge {

/// Finite discounted MDP. transition[a](s, s') = P(s'|s,a), reward[a](s, s') = r(s,a,s').
struct Mdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<Matrix> transition;
  std::vector<Matrix> reward;
  double gamma = 0.0;
};

/// Stationary randomized policy, probs(s, a) = mu(s, a).
struct Policy {
  Matrix probs;
};

/// State-to-state chain obtained by marginalizing actions under a policy.
struct InducedChain {
  Matrix p_mu;
  Matrix reward_mu;
  double r_inf = 0.0;
  std::optional<Vector> pi;
  double gamma = 0.0;

  std::size_t n_states() const { return static_cast<std::size_t>(p_mu.rows()); }
  /// Stationary distribution; throws InvalidInput if it has not been computed.
  const Vector& stationary() const;
};

struct ErgodicityReport {
  bool irreducible = false;
  bool aperiodic = false;
  std::size_t period = 0;
  std::string diagnostic;

  bool ergodic() const { return irreducible && aperiodic; }
};

/// Geometric envelope max_s ||P^t(s,.) - pi||_TV <= c_const * alpha^t.
struct MixingFit {
  double c_const = 1.0;
  double alpha = 0.5;
  std::size_t horizon_used = 0;
  double max_residual = 0.0;
  /// Set when the chain reaches stationarity (below 1e-12) within one step;
  /// alpha is then the smallest normalized double so log(1/alpha) stays finite.
  bool exact_mixing = false;
};

void validate(const Mdp& mdp);
void validate(const Policy& policy, std::size_t n_states, std::size_t n_actions);

InducedChain induce_chain(const Mdp& mdp, const Policy& policy);

/// Builds a chain directly from a row-stochastic matrix and reward table.
InducedChain make_chain(Matrix p_mu, Matrix reward_mu, double gamma);

ErgodicityReport check_ergodic(const InducedChain& chain);

/// Solves pi (P - I) = 0, sum(pi) = 1 directly. Throws NumericalFailure if the
/// residual ||pi P - pi||_inf exceeds tol.
Vector stationary_distribution(const InducedChain& chain, double tol = 1e-10);

/// Returns a copy of the chain with pi filled in; rejects non-ergodic chains.
InducedChain with_stationary(InducedChain chain, double tol = 1e-10);

double tv_distance(const Vector& p, const Vector& q);

/// m_t = max_s TV((P^t)(s,.), pi) for t = 0..horizon.
std::vector<double> tv_decay_profile(const InducedChain& chain, std::size_t horizon);

MixingFit estimate_mixing(const InducedChain& chain, std::size_t horizon = 200);

/// Row-wise cumulative sums used for inverse-CDF sampling.
class TransitionSampler {
 public:
  explicit TransitionSampler(const InducedChain& chain);
  /// Maps a uniform draw in [0,1) to the next state.
  StateIndex next(StateIndex s, double u) const;
  /// Draws from the stationary distribution.
  StateIndex initial(double u) const;

 private:
  Matrix cumulative_;
  Vector pi_cumulative_;
};

/// Deterministic uniform double in [0,1) from 53 high bits of a 64-bit word.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

std::vector<Transition> sample_trajectory(const InducedChain& chain, StateIndex s0,
                                          std::size_t steps, std::uint64_t seed);

}  // namespace tdforge
