#pragma once

#include "tdforge/learner.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tdforge {

/// One TD update g split into martingale noise, Markovian bias and mean-path gradient.
/// xi = g - E[g | F_{t-1}], b = E[g | F_{t-1}] - gbar(theta), gbar = b_vec - A theta.
/// The conditioning state s is the known current state s_t.
struct StepDecomposition {
  Vector g;
  Vector xi;
  Vector bias;
  Vector gbar;
  StateIndex state = 0;
};

/// lhs <= bound comparison for one inequality instance.
struct LemmaReport {
  std::string lemma_id;
  std::string params;
  double lhs = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool pass = false;
};

/// Builds a report with slack = bound - lhs and pass iff slack >= -1e-12.
LemmaReport make_report(std::string lemma_id, std::string params, double lhs, double bound);

/// Per-outcome TD update g(theta, (s, s')).
Vector update_direction(const Vector& theta, StateIndex s, StateIndex s_next,
                        const InducedChain& chain, const FeatureMap& features);

/// sum_{s'} P(s,s') g(theta, (s,s')), exact.
Vector conditional_update_mean(const Vector& theta, StateIndex s, const InducedChain& chain,
                               const FeatureMap& features);

StepDecomposition decompose_step(const Vector& theta, StateIndex s, const Transition& transition,
                                 const InducedChain& chain, const FeatureMap& features,
                                 const TdOracle& oracle);

/// ||g(theta,O)|| <= r_inf phi_inf + 2 phi_inf^2 ||theta||.
LemmaReport gradient_bound_check(const Vector& theta, const Transition& transition,
                                 const FeatureMap& features, double gamma, double r_inf);

struct LipschitzReports {
  LemmaReport per_outcome;
  LemmaReport stationary;
};

/// Both 2 phi_inf^2-Lipschitz statements, for g(., O) and for gbar.
LipschitzReports lipschitz_check(const Vector& theta_a, const Vector& theta_b,
                                 const Transition& transition, const InducedChain& chain,
                                 const FeatureMap& features, const TdOracle& oracle);

/// Xi(theta, O) = <g(theta,O) - gbar(theta), theta - theta*>.
double xi_value(const Vector& theta, const Transition& transition, const InducedChain& chain,
                const FeatureMap& features, const TdOracle& oracle);

/// max over all support outcomes o of ||g(theta, o)||.
double max_update_norm(const Vector& theta, const InducedChain& chain, const FeatureMap& features);

/// |Xi(a,O) - Xi(b,O)| <= (2G + 4 phi_inf^2 d_b) ||a - b||. G must bound ||g(theta_a, o)||
/// over every outcome o (not only the sampled one), since the bound also covers gbar(theta_a).
LemmaReport xi_lipschitz_check(const Vector& theta_a, const Vector& theta_b,
                               const Transition& transition, double g_bound, double d_b,
                               const InducedChain& chain, const FeatureMap& features,
                               const TdOracle& oracle);

/// Same inequality for the conditional form <E[g|s] - gbar(theta), theta - theta*>.
LemmaReport xi_lipschitz_conditional_check(const Vector& theta_a, const Vector& theta_b,
                                           StateIndex s, double g_bound, double d_b,
                                           const InducedChain& chain, const FeatureMap& features,
                                           const TdOracle& oracle);

/// ||sum_{s,s'} (rho(s) - pi(s)) P(s,s') g(theta,(s,s'))|| <= 8 ell(theta) C alpha^k',
/// rho = row `start_state` of P^k'.
LemmaReport tv_bias_check(const Vector& theta, StateIndex start_state, std::size_t k_prime,
                          const InducedChain& chain, const FeatureMap& features,
                          const TdOracle& oracle, const MixingFit& mixing);

/// Summary of the martingale sums M = sum_k eta_k <xi_k, theta_k - theta*> across replications.
struct MartingaleStatistic {
  std::vector<double> sums;
  double mean = 0.0;
  double stderr_ = 0.0;
  double z_score = 0.0;
  std::string warning;
};

MartingaleStatistic martingale_sum_check(const std::vector<double>& per_replication_sums);

/// Runs one TD(0) replication and returns its martingale sum.
double martingale_sum(const InducedChain& chain, const FeatureMap& features,
                      const TdOracle& oracle, const TdConfig& config);

LemmaReport lemma_sum_a1(std::size_t u, std::size_t t);
LemmaReport lemma_sum_a2(std::size_t u, std::size_t t);
LemmaReport lemma_sum_a3(std::size_t t);

/// Empirical sums against the bias and variance lemma right-hand sides.
struct BiasBudgetReport {
  std::vector<LemmaReport> terms;
  /// Empirical analogues (replication means).
  double bias_sum = 0.0;
  double xi_sq_sum = 0.0;
  double b_sq_sum = 0.0;
  double gbar_sq_sum = 0.0;
  double b_bound = 0.0;
  double variance_base = 0.0;
  double u_t = 0.0;
  std::size_t switch_index = 0;
  bool mixing_used = false;
};

/// Runs `replications` TD(0) runs (derived seeds from config.seed) and evaluates the
/// lemmas at t = T. Without a mixing fit only the variance comparisons are reported.
BiasBudgetReport bias_budget_probe(const InducedChain& chain, const FeatureMap& features,
                                   const TdOracle& oracle, const std::optional<MixingFit>& mixing,
                                   const TdConfig& config, std::size_t replications);

}  // namespace tdforge
