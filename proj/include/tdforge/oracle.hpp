#pragma once

#include "tdforge/features.hpp"
#include "tdforge/mdp.hpp"

namespace tdforge {

/// Exact small-instance ground truth for TD(0) with linear features.
///
/// A = Phi^T D (I - gamma P) Phi and b = Phi^T D rbar with rbar(s) = sum_s' P(s,s') r(s,s').
/// The TD fixed point solves A theta* = b; W = (D P + P^T D)/2 and L = D - W give the
/// Hessian 2 Phi^T [(1-gamma) D + gamma L] Phi of the potential f.
struct TdOracle {
  Matrix a_matrix;
  Vector b_vec;
  Vector theta_star;
  Vector d_diag;
  Matrix w_matrix;
  Matrix laplacian;
  Matrix hessian;
  Vector expected_reward;
  double gamma = 0.0;
  double cond_a = 0.0;
};

/// Builds A, b and solves for theta*. Verifies A theta* = b and the projected
/// Bellman fixed point Pi_D T(Phi theta*) = Phi theta*; throws NumericalFailure otherwise.
TdOracle solve_fixed_point(const InducedChain& chain, const FeatureMap& features);

/// (T v)(s) = sum_s' P(s,s') (r(s,s') + gamma v(s')).
Vector bellman_apply(const InducedChain& chain, const Vector& v);

/// D-weighted least-squares projection onto span(Phi).
Vector project_d(const InducedChain& chain, const FeatureMap& features, const Vector& v);

/// Mean-path update b - A theta.
Vector stationary_gradient(const TdOracle& oracle, const Vector& theta);

/// f(theta) = (1-gamma)||V_theta - V*||_D^2 + gamma ||V_theta - V*||_Dir^2.
double potential(const TdOracle& oracle, const InducedChain& chain, const FeatureMap& features,
                 const Vector& theta);

/// <-gbar(theta), theta - theta*> - (f(theta) - f(theta*)).
double gradient_splitting_residual(const TdOracle& oracle, const InducedChain& chain,
                                   const FeatureMap& features, const Vector& theta);

double hessian_min_eigenvalue(const TdOracle& oracle);

}  // namespace tdforge
