#pragma once

#include "tdforge/mdp.hpp"
#include "tdforge/types.hpp"

namespace tdforge {

/// Feature matrix Phi (row s is phi(s)^T) with its row-norm bound and rank certificate.
struct FeatureMap {
  Matrix phi;
  double phi_inf = 0.0;
  bool rank_ok = false;
  /// sigma_min / sigma_max of Phi.
  double rank_ratio = 0.0;

  std::size_t n_states() const { return static_cast<std::size_t>(phi.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(phi.cols()); }
  auto row(StateIndex s) const { return phi.row(static_cast<Eigen::Index>(s)).transpose(); }
};

/// Relative singular-value threshold used to certify full column rank.
inline constexpr double kRankTolerance = 1e-10;

/// Validates full column rank and computes phi_inf. Rank-deficient input is
/// rejected with the smallest singular value in the message.
FeatureMap build_feature_map(Matrix phi);

Vector value_of(const FeatureMap& features, const Vector& theta);

double weighted_norm_sq(const Vector& v, const Vector& pi);

/// (1/2) sum_{s,s'} pi(s) P(s,s') (v(s') - v(s))^2.
double dirichlet_seminorm_sq(const Vector& v, const InducedChain& chain);

/// Block feature matrix whose Hessian curvature scales as eps^2:
/// row 0 = (phi_inf/sqrt 2)(e_1 - e_2), rows 1..d-1 = eps * e_2..e_d, remaining rows zero.
FeatureMap adversarial_features(std::size_t n, std::size_t d, double eps, double phi_inf);

}  // namespace tdforge
