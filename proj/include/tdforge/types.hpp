#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tdforge {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using StateIndex = std::size_t;

/// Raised when caller-supplied data violates a documented invariant.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical routine cannot meet its accuracy contract.
/// `residual` carries the achieved residual (or condition number) for diagnostics.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// One observed transition O_t = (s_t, s_{t+1}) together with its reward.
struct Transition {
  StateIndex from = 0;
  StateIndex to = 0;
  double reward = 0.0;
};

}  // namespace tdforge
