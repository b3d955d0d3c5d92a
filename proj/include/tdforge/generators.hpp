#pragma once

#include "tdforge/io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tdforge {

enum class ChainScheme { RandomDirichlet, TwoState, PermutationMix };
enum class FeatureScheme { RandomGaussian, Tabular, Adversarial };

struct GeneratorSpec {
  std::string name = "generated";
  std::size_t n_states = 10;
  std::size_t dim = 3;
  std::size_t n_actions = 2;
  double gamma = 0.9;
  ChainScheme chain = ChainScheme::RandomDirichlet;
  double concentration = 1.0;
  /// two-state switching probabilities: P = [[1-a, a], [b, 1-b]].
  double a = 0.1;
  double b = 0.1;
  /// permutation-mix weight: P = (1 - lambda) * cyclic shift + lambda * uniform.
  double lambda = 0.5;
  FeatureScheme features = FeatureScheme::RandomGaussian;
  double eps = 1e-2;
  double phi_inf = 1.0;
  /// Rewards are drawn uniformly from [0, reward_scale]; 0 gives r == 0.
  double reward_scale = 1.0;
  std::uint64_t seed = 0;
};

ChainScheme parse_chain_scheme(const std::string& text);
FeatureScheme parse_feature_scheme(const std::string& text);
std::string to_string(ChainScheme scheme);
std::string to_string(FeatureScheme scheme);

/// Checks ranges and fixes the dimensions forced by a scheme (two-state has n = 2,
/// tabular has d = n). Throws InvalidInput.
GeneratorSpec normalized(GeneratorSpec spec);

/// Draws an ergodic instance; retries with fresh draws up to 100 times.
Instance generate_instance(const GeneratorSpec& spec);

/// n = 10, d = 3, gamma = 0.9 random-dirichlet instance used by the experiments.
GeneratorSpec standard_spec();

/// Built-in corpus: slow two-state chain, tabular, adversarial eps family and
/// random-dirichlet family.
std::vector<GeneratorSpec> builtin_corpus();

}  // namespace tdforge
