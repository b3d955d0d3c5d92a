#include "oracles.hpp"
#include "tdforge/mdp.hpp"

#include <doctest.h>

#include <random>

using namespace tdforge;

namespace {

InducedChain chain_of(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix p(n, n);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) {
      p(i, j++) = v;
    }
    ++i;
  }
  return make_chain(p, Matrix::Zero(n, n), 0.9);
}

Mdp random_mdp(std::size_t n, std::size_t na, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Mdp mdp;
  mdp.n_states = n;
  mdp.n_actions = na;
  mdp.gamma = 0.9;
  for (std::size_t a = 0; a < na; ++a) {
    Matrix p(n, n), r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        p(i, j) = u(rng);
        r(i, j) = u(rng);
      }
      p.row(i) /= p.row(i).sum();
    }
    mdp.transition.push_back(p);
    mdp.reward.push_back(r);
  }
  return mdp;
}

}  // namespace

TEST_CASE("induce_chain with one action returns that transition matrix") {
  Mdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 1;
  mdp.gamma = 0.5;
  Matrix p(2, 2);
  p << 0.3, 0.7, 0.6, 0.4;
  mdp.transition = {p};
  mdp.reward = {Matrix::Ones(2, 2)};
  Policy mu{Matrix::Ones(2, 1)};
  const auto chain = induce_chain(mdp, mu);
  CHECK(chain.p_mu == p);
  CHECK(chain.r_inf == 1.0);
  CHECK_FALSE(chain.pi.has_value());
}

TEST_CASE("induce_chain averages rows under a uniform two-action policy") {
  Mdp mdp;
  mdp.n_states = 3;
  mdp.n_actions = 2;
  mdp.gamma = 0.9;
  const Matrix shift0 = Matrix::Identity(3, 3);
  Matrix shift1(3, 3);
  shift1 << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  mdp.transition = {shift0, shift1};
  mdp.reward = {Matrix::Zero(3, 3), Matrix::Constant(3, 3, 2.0)};
  Policy mu{Matrix::Constant(3, 2, 0.5)};
  const auto chain = induce_chain(mdp, mu);
  CHECK((chain.p_mu - 0.5 * (shift0 + shift1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(chain.reward_mu(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("induce_chain matches Monte Carlo action sampling") {
  std::mt19937_64 rng(7);
  const Mdp mdp = random_mdp(5, 3, rng);
  Matrix probs(5, 3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int s = 0; s < 5; ++s) {
    for (int a = 0; a < 3; ++a) probs(s, a) = u(rng);
    probs.row(s) /= probs.row(s).sum();
  }
  const auto chain = induce_chain(mdp, Policy{probs});
  const int samples = 1000000;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < 5; ++s) {
    std::vector<double> counts(5, 0.0);
    for (int k = 0; k < samples / 5; ++k) {
      double x = unit(rng);
      int a = 0;
      while (a < 2 && x >= probs(s, a)) x -= probs(s, a++);
      double y = unit(rng);
      int t = 0;
      while (t < 4 && y >= mdp.transition[a](s, t)) y -= mdp.transition[a](s, t++);
      counts[t] += 1.0;
    }
    for (int t = 0; t < 5; ++t) {
      CHECK(oracle::within_binomial(counts[t], samples / 5, chain.p_mu(s, t)));
    }
  }
}

TEST_CASE("induce_chain rejects mismatched shapes") {
  std::mt19937_64 rng(1);
  const Mdp mdp = random_mdp(3, 2, rng);
  CHECK_THROWS_AS(induce_chain(mdp, Policy{Matrix::Constant(3, 3, 1.0 / 3)}), InvalidInput);
  Mdp bad = mdp;
  bad.transition[0](0, 0) += 0.1;
  CHECK_THROWS_AS(validate(bad), InvalidInput);
  Mdp negative = mdp;
  negative.reward[1](2, 2) = -1.0;
  CHECK_THROWS_AS(validate(negative), InvalidInput);
  Mdp discount = mdp;
  discount.gamma = 1.0;
  CHECK_THROWS_AS(validate(discount), InvalidInput);
}

TEST_CASE("check_ergodic examples") {
  const auto flip = check_ergodic(chain_of({{0, 1}, {1, 0}}));
  CHECK_FALSE(flip.ergodic());
  CHECK(flip.irreducible);
  CHECK(flip.period == 2);
  CHECK(flip.diagnostic.find("period 2") != std::string::npos);

  CHECK(check_ergodic(chain_of({{0.5, 0.5}, {0.5, 0.5}})).ergodic());

  const auto absorbing = check_ergodic(chain_of({{0.5, 0.5, 0}, {0, 0.5, 0.5}, {0, 0, 1}}));
  CHECK_FALSE(absorbing.irreducible);
  CHECK(absorbing.diagnostic.find("unreachable") != std::string::npos);

  const auto cycle3 = check_ergodic(chain_of({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}));
  CHECK(cycle3.period == 3);
}

TEST_CASE("stationary_distribution examples") {
  const Vector a = stationary_distribution(chain_of({{0.5, 0.5}, {0.5, 0.5}}));
  CHECK(a(0) == doctest::Approx(0.5).epsilon(1e-14));
  const Vector b = stationary_distribution(chain_of({{0.9, 0.1}, {0.1, 0.9}}));
  CHECK(b(1) == doctest::Approx(0.5).epsilon(1e-14));
  const Vector c = stationary_distribution(chain_of({{0.9, 0.1}, {0.5, 0.5}}));
  CHECK(std::abs(c(0) - 5.0 / 6.0) < 1e-14);
  CHECK(std::abs(c(1) - 1.0 / 6.0) < 1e-14);
}

TEST_CASE("stationary residual and power-iteration agreement on random chains") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 15;
    const Mdp mdp = random_mdp(n, 1, rng);
    auto chain = with_stationary(induce_chain(mdp, Policy{Matrix::Ones(n, 1)}));
    const Vector& pi = chain.stationary();
    CHECK((pi.transpose() * chain.p_mu - pi.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((pi - oracle::power_stationary(chain.p_mu)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(pi.minCoeff() > 0.0);
  }
}

TEST_CASE("with_stationary rejects a periodic chain") {
  CHECK_THROWS_AS(with_stationary(chain_of({{0, 1}, {1, 0}})), InvalidInput);
}

TEST_CASE("tv_distance examples and metric properties") {
  Vector p(2), q(2);
  p << 1, 0;
  q << 0, 1;
  CHECK(tv_distance(p, p) == 0.0);
  CHECK(tv_distance(p, q) == 1.0);
  Vector r(2), s(2);
  r << 0.7, 0.3;
  s << 0.5, 0.5;
  CHECK(tv_distance(r, s) == doctest::Approx(0.2));
  CHECK_THROWS_AS(tv_distance(p, Vector::Ones(3) / 3), InvalidInput);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector x(6), y(6), z(6);
    for (int i = 0; i < 6; ++i) {
      x(i) = u(rng);
      y(i) = u(rng);
      z(i) = u(rng);
    }
    x /= x.sum();
    y /= y.sum();
    z /= z.sum();
    const double xy = tv_distance(x, y);
    CHECK(xy == doctest::Approx(tv_distance(y, x)));
    CHECK(xy <= tv_distance(x, z) + tv_distance(z, y) + 1e-15);
    CHECK(xy >= 0.0);
    CHECK(xy <= 1.0);
  }
}

TEST_CASE("estimate_mixing on two-state chains recovers the second eigenvalue") {
  for (double a : {0.05, 0.1, 0.3}) {
    for (double b : {0.05, 0.2}) {
      auto chain = with_stationary(chain_of({{1 - a, a}, {b, 1 - b}}));
      const auto fit = estimate_mixing(chain, 200);
      CHECK(std::abs(fit.alpha - std::abs(1 - a - b)) < 1e-3);
      const auto profile = tv_decay_profile(chain, 200);
      for (std::size_t t = 0; t < profile.size(); ++t) {
        CHECK(profile[t] <= fit.c_const * std::pow(fit.alpha, double(t)) + 1e-9);
      }
    }
  }
}

TEST_CASE("estimate_mixing envelope holds on random chains") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Mdp mdp = random_mdp(6, 1, rng);
    auto chain = with_stationary(induce_chain(mdp, Policy{Matrix::Ones(6, 1)}));
    const auto fit = estimate_mixing(chain, 50);
    CHECK(fit.alpha > 0.0);
    CHECK(fit.alpha < 1.0);
    const auto profile = tv_decay_profile(chain, 50);
    for (std::size_t t = 0; t < profile.size(); ++t) {
      CHECK(profile[t] <= fit.c_const * std::pow(fit.alpha, double(t)) + 1e-9);
    }
  }
}

TEST_CASE("rank-one chain yields the exact-mixing sentinel") {
  auto chain = with_stationary(chain_of({{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}}));
  const auto fit = estimate_mixing(chain, 20);
  CHECK(fit.exact_mixing);
  CHECK(fit.alpha == std::numeric_limits<double>::min());
  CHECK(std::isfinite(std::log(1.0 / fit.alpha)));
  CHECK_THROWS_AS(estimate_mixing(chain, 5), InvalidInput);
}

TEST_CASE("sample_trajectory on a permutation follows the orbit") {
  const auto chain = chain_of({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
  for (std::uint64_t seed : {1ULL, 99ULL}) {
    const auto path = sample_trajectory(chain, 1, 7, seed);
    REQUIRE(path.size() == 7);
    StateIndex s = 1;
    for (const auto& step : path) {
      CHECK(step.from == s);
      CHECK(step.to == (s + 1) % 3);
      s = step.to;
    }
  }
}

TEST_CASE("sample_trajectory is deterministic and matches transition frequencies") {
  std::mt19937_64 rng(9);
  const Mdp mdp = random_mdp(4, 1, rng);
  const auto chain = with_stationary(induce_chain(mdp, Policy{Matrix::Ones(4, 1)}));
  const auto a = sample_trajectory(chain, 0, 1000, 42);
  const auto b = sample_trajectory(chain, 0, 1000, 42);
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].from == b[i].from && a[i].to == b[i].to && a[i].reward == b[i].reward;
  }
  CHECK(same);

  const auto path = sample_trajectory(chain, 0, 1000000, 2024);
  Matrix counts = Matrix::Zero(4, 4);
  Vector visits = Vector::Zero(4);
  for (const auto& step : path) {
    counts(step.from, step.to) += 1.0;
    visits(step.from) += 1.0;
  }
  for (int s = 0; s < 4; ++s) {
    for (int t = 0; t < 4; ++t) {
      CHECK(oracle::within_binomial(counts(s, t), visits(s), chain.p_mu(s, t)));
    }
  }
  CHECK_THROWS_AS(sample_trajectory(chain, 4, 10, 1), InvalidInput);
}

TEST_CASE("sampler never selects zero-mass states") {
  const auto chain = chain_of({{0.0, 1.0, 0.0}, {0.5, 0.0, 0.5}, {0.0, 1.0, 0.0}});
  TransitionSampler sampler(chain);
  for (double u : {0.0, 0.25, 0.5, 0.999999, 1.0 - 1e-16}) {
    CHECK(sampler.next(0, u) == 1);
    CHECK(sampler.next(1, u) != 1);
  }
}
