#include "tdforge/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

namespace tdforge {

namespace {

constexpr double kRowSumTol = 1e-12;

void check_stochastic_rows(const Matrix& m, const std::string& what, double tol) {
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    if ((m.row(s).array() < 0.0).any()) {
      std::ostringstream os;
      os << what << ": row " << s << " has a negative entry";
      throw InvalidInput(os.str());
    }
    const double sum = m.row(s).sum();
    if (std::abs(sum - 1.0) > tol) {
      std::ostringstream os;
      os.precision(17);
      os << what << ": row " << s << " sums to " << sum << ", not 1";
      throw InvalidInput(os.str());
    }
  }
}

std::vector<std::vector<StateIndex>> support_graph(const Matrix& p, bool reversed) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<std::vector<StateIndex>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (p(i, j) > 0.0) {
        if (reversed) {
          adj[j].push_back(i);
        } else {
          adj[i].push_back(j);
        }
      }
    }
  }
  return adj;
}

// BFS levels from state 0; unreachable states keep -1.
std::vector<long> bfs_levels(const std::vector<std::vector<StateIndex>>& adj) {
  std::vector<long> level(adj.size(), -1);
  std::queue<StateIndex> frontier;
  level[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const StateIndex u = frontier.front();
    frontier.pop();
    for (StateIndex v : adj[u]) {
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        frontier.push(v);
      }
    }
  }
  return level;
}

}  // namespace

const Vector& InducedChain::stationary() const {
  if (!pi) {
    throw InvalidInput("stationary distribution has not been computed for this chain");
  }
  return *pi;
}

void validate(const Mdp& mdp) {
  if (mdp.n_states == 0 || mdp.n_actions == 0) {
    throw InvalidInput("MDP needs at least one state and one action");
  }
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
    throw InvalidInput("discount gamma must lie in (0,1)");
  }
  if (mdp.transition.size() != mdp.n_actions || mdp.reward.size() != mdp.n_actions) {
    throw InvalidInput("MDP transition/reward tensors must have one slice per action");
  }
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  for (std::size_t a = 0; a < mdp.n_actions; ++a) {
    if (mdp.transition[a].rows() != n || mdp.transition[a].cols() != n ||
        mdp.reward[a].rows() != n || mdp.reward[a].cols() != n) {
      throw InvalidInput("MDP slice for action " + std::to_string(a) + " is not n x n");
    }
    check_stochastic_rows(mdp.transition[a], "transition[action " + std::to_string(a) + "]",
                          kRowSumTol);
    if ((mdp.reward[a].array() < 0.0).any() || !mdp.reward[a].allFinite()) {
      throw InvalidInput("rewards must be finite and nonnegative");
    }
  }
}

void validate(const Policy& policy, std::size_t n_states, std::size_t n_actions) {
  if (policy.probs.rows() != static_cast<Eigen::Index>(n_states) ||
      policy.probs.cols() != static_cast<Eigen::Index>(n_actions)) {
    throw InvalidInput("policy shape does not match MDP (expected " +
                       std::to_string(n_states) + " x " + std::to_string(n_actions) + ")");
  }
  if ((policy.probs.array() > 1.0).any()) {
    throw InvalidInput("policy: entries must lie in [0,1]");
  }
  check_stochastic_rows(policy.probs, "policy", kRowSumTol);
}

InducedChain induce_chain(const Mdp& mdp, const Policy& policy) {
  validate(mdp);
  validate(policy, mdp.n_states, mdp.n_actions);
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  Matrix p = Matrix::Zero(n, n);
  Matrix r = Matrix::Zero(n, n);
  for (std::size_t a = 0; a < mdp.n_actions; ++a) {
    const Vector weight = policy.probs.col(static_cast<Eigen::Index>(a));
    p.noalias() += weight.asDiagonal() * mdp.transition[a];
    r.noalias() += weight.asDiagonal() * mdp.reward[a];
  }
  return make_chain(std::move(p), std::move(r), mdp.gamma);
}

InducedChain make_chain(Matrix p_mu, Matrix reward_mu, double gamma) {
  if (p_mu.rows() == 0 || p_mu.rows() != p_mu.cols()) {
    throw InvalidInput("transition matrix must be square and non-empty");
  }
  if (reward_mu.rows() != p_mu.rows() || reward_mu.cols() != p_mu.cols()) {
    throw InvalidInput("reward table must match the transition matrix shape");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw InvalidInput("discount gamma must lie in [0,1)");
  }
  check_stochastic_rows(p_mu, "induced transition matrix", kRowSumTol);
  if ((reward_mu.array() < 0.0).any() || !reward_mu.allFinite()) {
    throw InvalidInput("rewards must be finite and nonnegative");
  }
  InducedChain chain;
  chain.r_inf = reward_mu.maxCoeff();
  chain.p_mu = std::move(p_mu);
  chain.reward_mu = std::move(reward_mu);
  chain.gamma = gamma;
  return chain;
}

ErgodicityReport check_ergodic(const InducedChain& chain) {
  ErgodicityReport report;
  const std::size_t n = chain.n_states();
  const auto forward = support_graph(chain.p_mu, false);
  const auto level = bfs_levels(forward);
  const auto back_level = bfs_levels(support_graph(chain.p_mu, true));

  for (std::size_t s = 0; s < n; ++s) {
    if (level[s] < 0) {
      report.diagnostic = "not irreducible: state " + std::to_string(s) +
                          " is unreachable from state 0";
      return report;
    }
    if (back_level[s] < 0) {
      report.diagnostic = "not irreducible: state 0 is unreachable from state " +
                          std::to_string(s);
      return report;
    }
  }
  report.irreducible = true;

  // Period of an irreducible chain: gcd over support edges (u,v) of level(u)+1-level(v).
  long period = 0;
  for (std::size_t u = 0; u < n; ++u) {
    for (StateIndex v : forward[u]) {
      period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
    }
  }
  report.period = static_cast<std::size_t>(period);
  report.aperiodic = period == 1;
  if (!report.aperiodic) {
    report.diagnostic = "not aperiodic: period " + std::to_string(period);
  }
  return report;
}

Vector stationary_distribution(const InducedChain& chain, double tol) {
  const auto n = static_cast<Eigen::Index>(chain.n_states());
  Matrix system(n + 1, n);
  system.topRows(n) = chain.p_mu.transpose() - Matrix::Identity(n, n);
  system.row(n).setOnes();
  Vector rhs = Vector::Zero(n + 1);
  rhs(n) = 1.0;
  Vector pi = system.colPivHouseholderQr().solve(rhs);
  const double residual = (chain.p_mu.transpose() * pi - pi).cwiseAbs().maxCoeff();
  const double mass_error = std::abs(pi.sum() - 1.0);
  if (!pi.allFinite() || residual > tol || mass_error > tol) {
    throw NumericalFailure("stationary solve did not reach tolerance", residual);
  }
  return pi;
}

InducedChain with_stationary(InducedChain chain, double tol) {
  const auto report = check_ergodic(chain);
  if (!report.ergodic()) {
    throw InvalidInput("chain is not ergodic: " + report.diagnostic);
  }
  chain.pi = stationary_distribution(chain, tol);
  return chain;
}

double tv_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) {
    throw InvalidInput("tv_distance: length mismatch");
  }
  return 0.5 * (p - q).cwiseAbs().sum();
}

std::vector<double> tv_decay_profile(const InducedChain& chain, std::size_t horizon) {
  const Vector& pi = chain.stationary();
  const auto n = static_cast<Eigen::Index>(chain.n_states());
  Matrix power = Matrix::Identity(n, n);
  std::vector<double> profile;
  profile.reserve(horizon + 1);
  for (std::size_t t = 0; t <= horizon; ++t) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < n; ++s) {
      worst = std::max(worst, tv_distance(power.row(s).transpose(), pi));
    }
    profile.push_back(worst);
    power = power * chain.p_mu;
  }
  return profile;
}

MixingFit estimate_mixing(const InducedChain& chain, std::size_t horizon) {
  if (horizon < 10) {
    throw InvalidInput("estimate_mixing: horizon must be at least 10");
  }
  const auto report = check_ergodic(chain);
  if (!report.ergodic()) {
    throw InvalidInput("estimate_mixing: " + report.diagnostic);
  }
  const auto profile = tv_decay_profile(chain, horizon);
  constexpr double kFloor = 1e-12;

  MixingFit fit;
  fit.horizon_used = horizon;
  if (profile[1] <= kFloor) {
    fit.exact_mixing = true;
    fit.c_const = 1.0;
    fit.alpha = std::numeric_limits<double>::min();
    return fit;
  }

  std::vector<double> ts;
  std::vector<double> logs;
  for (std::size_t t = 0; t <= horizon; ++t) {
    if (profile[t] > kFloor) {
      ts.push_back(static_cast<double>(t));
      logs.push_back(std::log(profile[t]));
    }
  }
  const double count = static_cast<double>(ts.size());
  const double t_mean = std::accumulate(ts.begin(), ts.end(), 0.0) / count;
  const double l_mean = std::accumulate(logs.begin(), logs.end(), 0.0) / count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - t_mean) * (ts[i] - t_mean);
    sxy += (ts[i] - t_mean) * (logs[i] - l_mean);
  }
  double slope = sxy / sxx;
  constexpr double kMaxLogAlpha = -1e-12;
  slope = std::min(slope, kMaxLogAlpha);
  const double intercept = l_mean - slope * t_mean;

  double lift = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double predicted = intercept + slope * ts[i];
    fit.max_residual = std::max(fit.max_residual, std::abs(logs[i] - predicted));
    lift = std::max(lift, logs[i] - predicted);
  }
  fit.alpha = std::exp(slope);
  // Envelope: shift the log-intercept up by the largest violation, plus one ulp-scale margin.
  fit.c_const = std::exp(intercept + lift) * (1.0 + 1e-12);
  return fit;
}

TransitionSampler::TransitionSampler(const InducedChain& chain)
    : cumulative_(chain.p_mu.rows(), chain.p_mu.cols()) {
  for (Eigen::Index s = 0; s < chain.p_mu.rows(); ++s) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < chain.p_mu.cols(); ++j) {
      acc += chain.p_mu(s, j);
      cumulative_(s, j) = acc;
    }
  }
  if (chain.pi) {
    pi_cumulative_.resize(chain.pi->size());
    double acc = 0.0;
    for (Eigen::Index j = 0; j < chain.pi->size(); ++j) {
      acc += (*chain.pi)(j);
      pi_cumulative_(j) = acc;
    }
  }
}

namespace {

StateIndex invert_cdf(const double* cdf, Eigen::Index n, Eigen::Index stride, double u) {
  // First index whose cumulative mass exceeds u; zero-mass entries are never selected.
  Eigen::Index last_positive = 0;
  double prev = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double c = cdf[j * stride];
    if (c > prev) {
      last_positive = j;
      if (u < c) {
        return static_cast<StateIndex>(j);
      }
    }
    prev = c;
  }
  return static_cast<StateIndex>(last_positive);
}

}  // namespace

StateIndex TransitionSampler::next(StateIndex s, double u) const {
  const auto row = static_cast<Eigen::Index>(s);
  // Column-major storage: consecutive entries of a row are `rows()` apart.
  return invert_cdf(cumulative_.data() + row, cumulative_.cols(), cumulative_.rows(), u);
}

StateIndex TransitionSampler::initial(double u) const {
  if (pi_cumulative_.size() == 0) {
    throw InvalidInput("stationary start requested but pi is not computed");
  }
  return invert_cdf(pi_cumulative_.data(), pi_cumulative_.size(), 1, u);
}

std::vector<Transition> sample_trajectory(const InducedChain& chain, StateIndex s0,
                                          std::size_t steps, std::uint64_t seed) {
  if (s0 >= chain.n_states()) {
    throw InvalidInput("sample_trajectory: start state out of range");
  }
  const TransitionSampler sampler(chain);
  std::mt19937_64 rng(seed);
  std::vector<Transition> path;
  path.reserve(steps);
  StateIndex s = s0;
  for (std::size_t t = 0; t < steps; ++t) {
    const StateIndex next = sampler.next(s, to_unit(rng()));
    path.push_back({s, next, chain.reward_mu(static_cast<Eigen::Index>(s),
                                             static_cast<Eigen::Index>(next))});
    s = next;
  }
  return path;
}

}  // namespace tdforge
