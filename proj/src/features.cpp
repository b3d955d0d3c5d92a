#include "tdforge/features.hpp"

#include <cmath>
#include <sstream>

namespace tdforge {

FeatureMap build_feature_map(Matrix phi) {
  if (phi.cols() < 1 || phi.rows() < phi.cols()) {
    throw InvalidInput("feature matrix must satisfy n >= d >= 1");
  }
  if (!phi.allFinite()) {
    throw InvalidInput("feature matrix has non-finite entries");
  }
  Eigen::JacobiSVD<Matrix> svd(phi);
  const Vector& sigma = svd.singularValues();
  const double largest = sigma(0);
  const double smallest = sigma(sigma.size() - 1);
  FeatureMap map;
  map.rank_ratio = largest > 0.0 ? smallest / largest : 0.0;
  map.rank_ok = largest > 0.0 && smallest > kRankTolerance * largest;
  if (!map.rank_ok) {
    std::ostringstream os;
    os.precision(6);
    os << "feature matrix is rank deficient: smallest singular value " << smallest
       << " (largest " << largest << ")";
    throw InvalidInput(os.str());
  }
  map.phi_inf = phi.rowwise().norm().maxCoeff();
  map.phi = std::move(phi);
  return map;
}

Vector value_of(const FeatureMap& features, const Vector& theta) {
  if (theta.size() != features.phi.cols()) {
    throw InvalidInput("value_of: theta has " + std::to_string(theta.size()) +
                       " entries, expected " + std::to_string(features.phi.cols()));
  }
  return features.phi * theta;
}

double weighted_norm_sq(const Vector& v, const Vector& pi) {
  if (v.size() != pi.size()) {
    throw InvalidInput("weighted_norm_sq: length mismatch");
  }
  return (pi.array() * v.array().square()).sum();
}

double dirichlet_seminorm_sq(const Vector& v, const InducedChain& chain) {
  const Vector& pi = chain.stationary();
  if (v.size() != pi.size()) {
    throw InvalidInput("dirichlet_seminorm_sq: length mismatch");
  }
  double total = 0.0;
  const Eigen::Index n = v.size();
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index t = 0; t < n; ++t) {
      const double diff = v(t) - v(s);
      total += pi(s) * chain.p_mu(s, t) * diff * diff;
    }
  }
  return 0.5 * total;
}

FeatureMap adversarial_features(std::size_t n, std::size_t d, double eps, double phi_inf) {
  if (d < 2 || n <= d) {
    throw InvalidInput("adversarial_features requires n > d >= 2");
  }
  if (!(eps >= 0.0) || !(eps < phi_inf)) {
    throw InvalidInput("adversarial_features requires 0 < eps < phi_inf");
  }
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d);
  Matrix phi = Matrix::Zero(rows, cols);
  const double scale = phi_inf / std::sqrt(2.0);
  phi(0, 0) = scale;
  phi(0, 1) = -scale;
  for (Eigen::Index k = 1; k < cols; ++k) {
    phi(k, k) = eps;
  }
  return build_feature_map(std::move(phi));
}

}  // namespace tdforge
