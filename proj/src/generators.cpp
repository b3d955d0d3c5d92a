#include "tdforge/generators.hpp"

#include <random>

namespace tdforge {

namespace {

constexpr int kMaxAttempts = 100;

Vector dirichlet_row(std::size_t n, double concentration, std::mt19937_64& rng) {
  std::gamma_distribution<double> draw(concentration, 1.0);
  Vector row(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    row(i) = draw(rng);
  }
  const double total = row.sum();
  if (!(total > 0.0)) {
    row.setConstant(1.0 / static_cast<double>(n));
    return row;
  }
  return row / total;
}

Matrix reward_table(std::size_t n, double scale, std::mt19937_64& rng) {
  const auto nn = static_cast<Eigen::Index>(n);
  Matrix r = Matrix::Zero(nn, nn);
  if (scale == 0.0) {
    return r;
  }
  std::uniform_real_distribution<double> draw(0.0, scale);
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = 0; j < nn; ++j) {
      r(i, j) = draw(rng);
    }
  }
  return r;
}

Matrix feature_matrix(const GeneratorSpec& spec, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(spec.n_states);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  switch (spec.features) {
    case FeatureScheme::Tabular:
      return Matrix::Identity(n, n);
    case FeatureScheme::Adversarial:
      return adversarial_features(spec.n_states, spec.dim, spec.eps, spec.phi_inf).phi;
    case FeatureScheme::RandomGaussian:
      break;
  }
  std::normal_distribution<double> draw(0.0, 1.0);
  Matrix phi(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      phi(i, j) = draw(rng);
    }
  }
  return phi;
}

Instance draw_instance(const GeneratorSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = spec.n_states;
  const auto nn = static_cast<Eigen::Index>(n);
  Mdp mdp;
  mdp.n_states = n;
  mdp.gamma = spec.gamma;
  Policy policy;
  if (spec.chain == ChainScheme::RandomDirichlet) {
    mdp.n_actions = spec.n_actions;
    for (std::size_t a = 0; a < spec.n_actions; ++a) {
      Matrix p(nn, nn);
      for (Eigen::Index s = 0; s < nn; ++s) {
        p.row(s) = dirichlet_row(n, spec.concentration, rng).transpose();
      }
      mdp.transition.push_back(std::move(p));
      mdp.reward.push_back(reward_table(n, spec.reward_scale, rng));
    }
    policy.probs.resize(nn, static_cast<Eigen::Index>(spec.n_actions));
    for (Eigen::Index s = 0; s < nn; ++s) {
      policy.probs.row(s) = dirichlet_row(spec.n_actions, 1.0, rng).transpose();
    }
  } else {
    mdp.n_actions = 1;
    Matrix p(nn, nn);
    if (spec.chain == ChainScheme::TwoState) {
      p << 1.0 - spec.a, spec.a, spec.b, 1.0 - spec.b;
    } else {
      p.setConstant(spec.lambda / static_cast<double>(n));
      for (Eigen::Index s = 0; s < nn; ++s) {
        p(s, (s + 1) % nn) += 1.0 - spec.lambda;
      }
    }
    mdp.transition.push_back(std::move(p));
    mdp.reward.push_back(reward_table(n, spec.reward_scale, rng));
    policy.probs = Matrix::Ones(nn, 1);
  }
  Matrix phi = feature_matrix(spec, rng);
  return assemble_instance(spec.name, std::move(mdp), std::move(policy), std::move(phi));
}

}  // namespace

ChainScheme parse_chain_scheme(const std::string& text) {
  if (text == "random-dirichlet") return ChainScheme::RandomDirichlet;
  if (text == "two-state") return ChainScheme::TwoState;
  if (text == "permutation-mix") return ChainScheme::PermutationMix;
  throw InvalidInput("unknown chain scheme '" + text +
                     "' (expected random-dirichlet, two-state or permutation-mix)");
}

FeatureScheme parse_feature_scheme(const std::string& text) {
  if (text == "random-gaussian") return FeatureScheme::RandomGaussian;
  if (text == "tabular") return FeatureScheme::Tabular;
  if (text == "adversarial") return FeatureScheme::Adversarial;
  throw InvalidInput("unknown feature scheme '" + text +
                     "' (expected random-gaussian, tabular or adversarial)");
}

std::string to_string(ChainScheme scheme) {
  switch (scheme) {
    case ChainScheme::RandomDirichlet:
      return "random-dirichlet";
    case ChainScheme::TwoState:
      return "two-state";
    case ChainScheme::PermutationMix:
      return "permutation-mix";
  }
  return "unknown";
}

std::string to_string(FeatureScheme scheme) {
  switch (scheme) {
    case FeatureScheme::RandomGaussian:
      return "random-gaussian";
    case FeatureScheme::Tabular:
      return "tabular";
    case FeatureScheme::Adversarial:
      return "adversarial";
  }
  return "unknown";
}

GeneratorSpec normalized(GeneratorSpec spec) {
  if (spec.chain == ChainScheme::TwoState) {
    spec.n_states = 2;
    if (!(spec.a > 0.0 && spec.a <= 1.0 && spec.b > 0.0 && spec.b <= 1.0) ||
        (spec.a == 1.0 && spec.b == 1.0)) {
      throw InvalidInput("two-state(a,b) needs a, b in (0,1] and not both equal to 1");
    }
  }
  if (spec.n_states < 1) {
    throw InvalidInput("generator needs n >= 1");
  }
  if (spec.features == FeatureScheme::Tabular) {
    spec.dim = spec.n_states;
  }
  if (spec.dim < 1 || spec.dim > spec.n_states) {
    throw InvalidInput("generator needs 1 <= d <= n");
  }
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0)) {
    throw InvalidInput("gamma must lie in (0,1)");
  }
  if (spec.chain == ChainScheme::RandomDirichlet &&
      (!(spec.concentration > 0.0) || spec.n_actions < 1)) {
    throw InvalidInput("random-dirichlet needs concentration > 0 and at least one action");
  }
  if (spec.chain == ChainScheme::PermutationMix && !(spec.lambda > 0.0 && spec.lambda <= 1.0)) {
    throw InvalidInput("permutation-mix needs lambda in (0,1]");
  }
  if (spec.features == FeatureScheme::Adversarial &&
      (spec.dim < 2 || spec.n_states <= spec.dim || !(spec.eps > 0.0) ||
       !(spec.eps < spec.phi_inf))) {
    throw InvalidInput("adversarial features need n > d >= 2 and 0 < eps < phi_inf");
  }
  if (!(spec.reward_scale >= 0.0)) {
    throw InvalidInput("reward scale must be nonnegative");
  }
  return spec;
}

Instance generate_instance(const GeneratorSpec& raw) {
  const GeneratorSpec spec = normalized(raw);
  std::mt19937_64 rng(spec.seed);
  std::string last_error;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    try {
      return draw_instance(spec, rng);
    } catch (const InvalidInput& e) {
      last_error = e.what();
    } catch (const NumericalFailure& e) {
      last_error = e.what();
    }
  }
  throw InvalidInput("generator failed to produce a valid ergodic instance after " +
                     std::to_string(kMaxAttempts) + " attempts: " + last_error);
}

GeneratorSpec standard_spec() {
  GeneratorSpec spec;
  spec.name = "standard";
  spec.n_states = 10;
  spec.dim = 3;
  spec.gamma = 0.9;
  spec.seed = 20240917;
  return spec;
}

std::vector<GeneratorSpec> builtin_corpus() {
  std::vector<GeneratorSpec> corpus;

  GeneratorSpec slow;
  slow.name = "two_state_slow";
  slow.chain = ChainScheme::TwoState;
  slow.a = 0.05;
  slow.b = 0.05;
  slow.dim = 1;
  slow.seed = 101;
  corpus.push_back(slow);

  GeneratorSpec tabular;
  tabular.name = "tabular";
  tabular.n_states = 6;
  tabular.features = FeatureScheme::Tabular;
  tabular.seed = 202;
  corpus.push_back(tabular);

  const double eps_values[] = {1e-1, 1e-2, 1e-3};
  for (double eps : eps_values) {
    GeneratorSpec adversarial;
    adversarial.name = "adversarial_eps_" + format_double(eps);
    adversarial.n_states = 6;
    adversarial.dim = 3;
    adversarial.features = FeatureScheme::Adversarial;
    adversarial.eps = eps;
    adversarial.seed = 303;
    corpus.push_back(adversarial);
  }

  const double gammas[] = {0.5, 0.9, 0.99};
  const double concentrations[] = {0.5, 1.0, 5.0};
  for (int i = 0; i < 3; ++i) {
    GeneratorSpec dirichlet;
    dirichlet.name = "random_dirichlet_" + std::to_string(i);
    dirichlet.n_states = 8 + 2 * static_cast<std::size_t>(i);
    dirichlet.dim = 3;
    dirichlet.n_actions = 3;
    dirichlet.gamma = gammas[i];
    dirichlet.concentration = concentrations[i];
    dirichlet.seed = 404 + static_cast<std::uint64_t>(i);
    corpus.push_back(dirichlet);
  }

  GeneratorSpec standard = standard_spec();
  corpus.push_back(standard);
  return corpus;
}

}  // namespace tdforge
