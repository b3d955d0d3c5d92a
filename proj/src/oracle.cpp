#include "tdforge/oracle.hpp"

#include <cmath>
#include <limits>

namespace tdforge {

namespace {

void require_matching(const InducedChain& chain, const FeatureMap& features) {
  if (features.n_states() != chain.n_states()) {
    throw InvalidInput("feature map has " + std::to_string(features.n_states()) +
                       " rows but the chain has " + std::to_string(chain.n_states()) +
                       " states");
  }
}

}  // namespace

TdOracle solve_fixed_point(const InducedChain& chain, const FeatureMap& features) {
  require_matching(chain, features);
  const Vector& pi = chain.stationary();
  const Matrix& phi = features.phi;
  const Matrix& p = chain.p_mu;

  TdOracle oracle;
  oracle.gamma = chain.gamma;
  oracle.d_diag = pi;
  oracle.expected_reward = p.cwiseProduct(chain.reward_mu).rowwise().sum();
  const Matrix dphi = pi.asDiagonal() * phi;
  oracle.a_matrix = dphi.transpose() * (phi - chain.gamma * (p * phi));
  oracle.b_vec = dphi.transpose() * oracle.expected_reward;

  const Matrix dp = pi.asDiagonal() * p;
  oracle.w_matrix = 0.5 * (dp + dp.transpose());
  oracle.laplacian = Matrix(pi.asDiagonal()) - oracle.w_matrix;
  const Matrix energy =
      (1.0 - chain.gamma) * Matrix(pi.asDiagonal()) + chain.gamma * oracle.laplacian;
  oracle.hessian = 2.0 * phi.transpose() * energy * phi;
  oracle.hessian = 0.5 * (oracle.hessian + oracle.hessian.transpose());

  Eigen::JacobiSVD<Matrix> svd(oracle.a_matrix);
  const Vector& sigma = svd.singularValues();
  oracle.cond_a = sigma(sigma.size() - 1) > 0.0 ? sigma(0) / sigma(sigma.size() - 1)
                                                 : std::numeric_limits<double>::infinity();
  if (!std::isfinite(oracle.cond_a) || oracle.cond_a > 1e14) {
    throw NumericalFailure("A is numerically singular (condition number " +
                               std::to_string(oracle.cond_a) + ")",
                           oracle.cond_a);
  }
  oracle.theta_star = oracle.a_matrix.partialPivLu().solve(oracle.b_vec);
  // One step of iterative refinement.
  const Vector correction =
      oracle.a_matrix.partialPivLu().solve(oracle.b_vec - oracle.a_matrix * oracle.theta_star);
  oracle.theta_star += correction;

  const double scale = std::max(1.0, oracle.b_vec.cwiseAbs().maxCoeff());
  const double residual =
      (oracle.a_matrix * oracle.theta_star - oracle.b_vec).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * scale) {
    throw NumericalFailure("A theta* = b residual above tolerance", residual);
  }

  const Vector v_star = phi * oracle.theta_star;
  const Vector projected = project_d(chain, features, bellman_apply(chain, v_star));
  const double bellman_gap = (projected - v_star).cwiseAbs().maxCoeff();
  const double v_scale = std::max(1.0, v_star.cwiseAbs().maxCoeff());
  if (bellman_gap > 1e-8 * v_scale) {
    throw NumericalFailure("projected Bellman fixed point check failed", bellman_gap);
  }
  return oracle;
}

Vector bellman_apply(const InducedChain& chain, const Vector& v) {
  if (v.size() != static_cast<Eigen::Index>(chain.n_states())) {
    throw InvalidInput("bellman_apply: value vector length mismatch");
  }
  const Vector expected_reward = chain.p_mu.cwiseProduct(chain.reward_mu).rowwise().sum();
  return expected_reward + chain.gamma * (chain.p_mu * v);
}

Vector project_d(const InducedChain& chain, const FeatureMap& features, const Vector& v) {
  require_matching(chain, features);
  const Vector& pi = chain.stationary();
  const Matrix& phi = features.phi;
  const Matrix gram = phi.transpose() * pi.asDiagonal() * phi;
  const Vector coeffs = gram.ldlt().solve(phi.transpose() * pi.asDiagonal() * v);
  return phi * coeffs;
}

Vector stationary_gradient(const TdOracle& oracle, const Vector& theta) {
  if (theta.size() != oracle.b_vec.size()) {
    throw InvalidInput("stationary_gradient: theta dimension mismatch");
  }
  return oracle.b_vec - oracle.a_matrix * theta;
}

double potential(const TdOracle& oracle, const InducedChain& chain, const FeatureMap& features,
                 const Vector& theta) {
  const Vector diff = value_of(features, theta - oracle.theta_star);
  return (1.0 - chain.gamma) * weighted_norm_sq(diff, chain.stationary()) +
         chain.gamma * dirichlet_seminorm_sq(diff, chain);
}

double gradient_splitting_residual(const TdOracle& oracle, const InducedChain& chain,
                                   const FeatureMap& features, const Vector& theta) {
  const double inner = -stationary_gradient(oracle, theta).dot(theta - oracle.theta_star);
  const double gap = potential(oracle, chain, features, theta) -
                     potential(oracle, chain, features, oracle.theta_star);
  return inner - gap;
}

double hessian_min_eigenvalue(const TdOracle& oracle) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(oracle.hessian, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

}  // namespace tdforge
