#pragma once

#include "tdforge/features.hpp"
#include "tdforge/mdp.hpp"
#include "tdforge/oracle.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tdforge {

/// Smallest admissible algorithm constant: c must exceed 30 + sqrt(1302).
inline const double kMinAlgorithmConstant = 30.0 + std::sqrt(1302.0);

struct TdConfig {
  double c_const = 100.0;
  std::size_t total_steps = 1024;
  std::uint64_t seed = 0;
  /// Fixed start state; empty means a draw from the stationary distribution.
  std::optional<StateIndex> initial_state;
  std::size_t record_stride = 1;

  /// delta = c * phi_inf^2.
  double delta(double phi_inf) const { return c_const * phi_inf * phi_inf; }
};

/// Validating constructor: c > 30 + sqrt(1302), T >= 4, stride >= 1.
TdConfig make_td_config(double c_const, std::size_t total_steps, std::uint64_t seed,
                        std::optional<StateIndex> initial_state = std::nullopt,
                        std::size_t record_stride = 1);

struct RecordedStep {
  std::size_t t = 0;
  double eta = 0.0;
  double theta_norm = 0.0;
  /// NaN when the run had no oracle.
  double dist_to_star = std::nan("");
  double f_value = std::nan("");
  double grad_norm = 0.0;
  double ell = 0.0;
};

struct RunRecord {
  std::vector<RecordedStep> steps;
  Vector theta_bar;
  Vector theta_bar_unweighted;
  Vector theta_final;
  double sum_eta = 0.0;
  /// f(theta_bar), NaN without an oracle.
  double f_bar = std::nan("");
  double f_bar_unweighted = std::nan("");
  bool has_oracle = false;
  TdConfig config;
};

/// eta_t = 1 / (c phi_inf^2 ln T ln(t+3) sqrt(t+1)), natural logarithms.
double step_size(std::size_t t, const TdConfig& config, double phi_inf);

struct TdUpdate {
  Vector theta;
  Vector g;
  double td_error = 0.0;
};

/// g = (r + gamma phi(s')^T theta - phi(s)^T theta) phi(s); returns theta + eta g.
TdUpdate td_update(const Vector& theta, const Transition& transition, double gamma, double eta,
                   const FeatureMap& features);

/// Read-only view of one TD(0) step, handed to step observers before the update is applied.
struct StepView {
  std::size_t t;
  double eta;
  const Vector& theta;
  const Transition& transition;
  double td_error;
};

using StepObserver = std::function<void(const StepView&)>;

/// Projection-free TD(0): theta_0 = 0, exactly T updates, eta-weighted iterate average.
RunRecord run_td0(const InducedChain& chain, const FeatureMap& features, const TdOracle* oracle,
                  const TdConfig& config, const StepObserver& observer = {});

/// Constant bounding E||theta_t||^2 relative to max{r_inf^2/phi_inf^2, ||theta*||^2}.
double omega_c(double c);

struct MinTCondition {
  bool holds = false;
  double margin = 0.0;
  double u = 0.0;
};

/// ln T >= max{C sqrt(u+1), (u+1)^{3/4}} with u = ln(C sqrt T)/ln(1/alpha).
MinTCondition min_T_condition(double c_mix, double alpha, std::size_t total_steps);

struct IterateBoundReport {
  double bound = 0.0;
  double worst_ratio = 0.0;
  std::size_t worst_t = 0;
  /// Largest across-replication mean of ||theta_t||^2 over recorded steps and t = T.
  double max_mean_theta_sq = 0.0;
  std::size_t replications = 0;
  /// Empty when fewer than 30 replications were supplied.
  std::optional<bool> pass;
  std::string warning;
};

IterateBoundReport iterate_bound_check(const std::vector<RunRecord>& records,
                                       const TdOracle& oracle, const InducedChain& chain,
                                       const FeatureMap& features, const TdConfig& config);

/// Seed for replication `rep` of sweep cell `cell`: splitmix64 applied to the base seed,
/// then mixed with the cell and replication indices.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t cell, std::uint64_t rep);

}  // namespace tdforge
