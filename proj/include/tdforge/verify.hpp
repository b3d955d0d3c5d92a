#pragma once

#include "tdforge/experiment.hpp"

#include <string>
#include <vector>

namespace tdforge {

enum class VerifyLevel { Fast, Full };

VerifyLevel parse_verify_level(const std::string& text);

struct InstanceVerification {
  std::string instance;
  std::vector<LemmaReport> reports;
  /// Present at the full level.
  std::optional<MartingaleStatistic> martingale;
};

struct VerifyResult {
  std::vector<InstanceVerification> instances;
  /// Instance-free checks (sum lemmas, constants).
  std::vector<LemmaReport> global;

  bool all_pass() const;
  std::vector<LemmaReport> all_reports() const;
};

/// Oracle identities, Hessian finite differences, Bellman contraction and lemma fuzzing
/// for one instance. The full level adds larger campaigns, the bias budget and a
/// martingale z-test.
InstanceVerification verify_instance(const Instance& instance, VerifyLevel level,
                                     std::uint64_t seed, std::size_t threads);

VerifyResult run_verify(const std::vector<Instance>& instances, VerifyLevel level,
                        std::uint64_t seed, std::size_t threads);

/// Central finite-difference Hessian of the potential, step h.
Matrix finite_difference_hessian(const TdOracle& oracle, const InducedChain& chain,
                                 const FeatureMap& features, const Vector& theta, double h);

}  // namespace tdforge
