#include "tdforge/probe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tdforge {

namespace {

constexpr double kSlackTolerance = 1e-12;

// Neumaier compensated accumulator for the long appendix sums.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

std::string params_of(std::initializer_list<std::pair<const char*, double>> items) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [key, value] : items) {
    if (!first) {
      os << ';';
    }
    first = false;
    os << key << '=' << value;
  }
  return os.str();
}

double ell_of(const Vector& theta, double r_inf, double phi_inf) {
  return r_inf * phi_inf + 2.0 * phi_inf * phi_inf * theta.norm();
}

}  // namespace

LemmaReport make_report(std::string lemma_id, std::string params, double lhs, double bound) {
  LemmaReport report;
  report.lemma_id = std::move(lemma_id);
  report.params = std::move(params);
  report.lhs = lhs;
  report.bound = bound;
  report.slack = bound - lhs;
  report.pass = report.slack >= -kSlackTolerance;
  return report;
}

Vector update_direction(const Vector& theta, StateIndex s, StateIndex s_next,
                        const InducedChain& chain, const FeatureMap& features) {
  const double reward =
      chain.reward_mu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s_next));
  const auto phi_s = features.row(s);
  const double td_error = reward + chain.gamma * features.row(s_next).dot(theta) - phi_s.dot(theta);
  return td_error * phi_s;
}

Vector conditional_update_mean(const Vector& theta, StateIndex s, const InducedChain& chain,
                               const FeatureMap& features) {
  const auto row = static_cast<Eigen::Index>(s);
  const auto phi_s = features.row(s);
  // E[r + gamma phi(s')^T theta | s] computed in one pass over the row.
  const double mean_reward = chain.p_mu.row(row).dot(chain.reward_mu.row(row));
  const double mean_next_value = chain.p_mu.row(row).dot(features.phi * theta);
  return (mean_reward + chain.gamma * mean_next_value - phi_s.dot(theta)) * phi_s;
}

StepDecomposition decompose_step(const Vector& theta, StateIndex s, const Transition& transition,
                                 const InducedChain& chain, const FeatureMap& features,
                                 const TdOracle& oracle) {
  if (transition.from != s) {
    throw InvalidInput("decompose_step: transition starts at state " +
                       std::to_string(transition.from) + ", expected " + std::to_string(s));
  }
  StepDecomposition out;
  out.state = s;
  out.g = update_direction(theta, transition.from, transition.to, chain, features);
  const Vector conditional = conditional_update_mean(theta, s, chain, features);
  out.gbar = stationary_gradient(oracle, theta);
  out.xi = out.g - conditional;
  out.bias = conditional - out.gbar;
  return out;
}

LemmaReport gradient_bound_check(const Vector& theta, const Transition& transition,
                                 const FeatureMap& features, double gamma, double r_inf) {
  const auto phi_s = features.row(transition.from);
  const double td_error =
      transition.reward + gamma * features.row(transition.to).dot(theta) - phi_s.dot(theta);
  const double lhs = std::abs(td_error) * phi_s.norm();
  return make_report("gradient_bound",
                     params_of({{"s", double(transition.from)}, {"s_next", double(transition.to)}}),
                     lhs, ell_of(theta, r_inf, features.phi_inf));
}

LipschitzReports lipschitz_check(const Vector& theta_a, const Vector& theta_b,
                                 const Transition& transition, const InducedChain& chain,
                                 const FeatureMap& features, const TdOracle& oracle) {
  const double constant = 2.0 * features.phi_inf * features.phi_inf;
  const double gap = (theta_a - theta_b).norm();
  const Vector g_a = update_direction(theta_a, transition.from, transition.to, chain, features);
  const Vector g_b = update_direction(theta_b, transition.from, transition.to, chain, features);
  const std::string params =
      params_of({{"s", double(transition.from)}, {"s_next", double(transition.to)}});
  LipschitzReports out;
  out.per_outcome = make_report("lipschitz_g", params, (g_a - g_b).norm(), constant * gap);
  out.stationary = make_report(
      "lipschitz_gbar", params,
      (stationary_gradient(oracle, theta_a) - stationary_gradient(oracle, theta_b)).norm(),
      constant * gap);
  return out;
}

double xi_value(const Vector& theta, const Transition& transition, const InducedChain& chain,
                const FeatureMap& features, const TdOracle& oracle) {
  const Vector g = update_direction(theta, transition.from, transition.to, chain, features);
  return (g - stationary_gradient(oracle, theta)).dot(theta - oracle.theta_star);
}

double max_update_norm(const Vector& theta, const InducedChain& chain,
                       const FeatureMap& features) {
  double worst = 0.0;
  const std::size_t n = chain.n_states();
  for (StateIndex s = 0; s < n; ++s) {
    for (StateIndex s2 = 0; s2 < n; ++s2) {
      if (chain.p_mu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) > 0.0) {
        worst = std::max(worst, update_direction(theta, s, s2, chain, features).norm());
      }
    }
  }
  return worst;
}

LemmaReport xi_lipschitz_check(const Vector& theta_a, const Vector& theta_b,
                               const Transition& transition, double g_bound, double d_b,
                               const InducedChain& chain, const FeatureMap& features,
                               const TdOracle& oracle) {
  const double lhs = std::abs(xi_value(theta_a, transition, chain, features, oracle) -
                              xi_value(theta_b, transition, chain, features, oracle));
  const double bound = (2.0 * g_bound + 4.0 * features.phi_inf * features.phi_inf * d_b) *
                       (theta_a - theta_b).norm();
  return make_report("xi_lipschitz",
                     params_of({{"s", double(transition.from)},
                                {"s_next", double(transition.to)},
                                {"G", g_bound},
                                {"d_b", d_b}}),
                     lhs, bound);
}

LemmaReport xi_lipschitz_conditional_check(const Vector& theta_a, const Vector& theta_b,
                                           StateIndex s, double g_bound, double d_b,
                                           const InducedChain& chain, const FeatureMap& features,
                                           const TdOracle& oracle) {
  auto xi_conditional = [&](const Vector& theta) {
    return (conditional_update_mean(theta, s, chain, features) -
            stationary_gradient(oracle, theta))
        .dot(theta - oracle.theta_star);
  };
  const double lhs = std::abs(xi_conditional(theta_a) - xi_conditional(theta_b));
  const double bound = (2.0 * g_bound + 4.0 * features.phi_inf * features.phi_inf * d_b) *
                       (theta_a - theta_b).norm();
  return make_report("xi_lipschitz_conditional",
                     params_of({{"s", double(s)}, {"G", g_bound}, {"d_b", d_b}}), lhs, bound);
}

LemmaReport tv_bias_check(const Vector& theta, StateIndex start_state, std::size_t k_prime,
                          const InducedChain& chain, const FeatureMap& features,
                          const TdOracle& /*oracle*/, const MixingFit& mixing) {
  const Vector& pi = chain.stationary();
  const auto n = static_cast<Eigen::Index>(chain.n_states());
  if (static_cast<Eigen::Index>(start_state) >= n) {
    throw InvalidInput("tv_bias_check: start state out of range");
  }
  Eigen::RowVectorXd rho = Eigen::RowVectorXd::Zero(n);
  rho(static_cast<Eigen::Index>(start_state)) = 1.0;
  for (std::size_t k = 0; k < k_prime; ++k) {
    rho = rho * chain.p_mu;
  }
  Vector accumulated = Vector::Zero(features.phi.cols());
  for (Eigen::Index s = 0; s < n; ++s) {
    const double weight = rho(s) - pi(s);
    if (weight != 0.0) {
      accumulated += weight * conditional_update_mean(theta, static_cast<StateIndex>(s), chain,
                                                      features);
    }
  }
  const double envelope =
      mixing.c_const * std::pow(mixing.alpha, static_cast<double>(k_prime));
  const double bound = 8.0 * ell_of(theta, chain.r_inf, features.phi_inf) * envelope;
  return make_report("tv_bias",
                     params_of({{"start", double(start_state)}, {"k_prime", double(k_prime)}}),
                     accumulated.norm(), bound);
}

MartingaleStatistic martingale_sum_check(const std::vector<double>& per_replication_sums) {
  MartingaleStatistic stat;
  stat.sums = per_replication_sums;
  const double m = static_cast<double>(per_replication_sums.size());
  if (per_replication_sums.size() < 30) {
    stat.warning = "fewer than 30 replications: z-score has low power";
  }
  if (per_replication_sums.empty()) {
    return stat;
  }
  double mean = 0.0;
  for (double v : per_replication_sums) {
    mean += v;
  }
  mean /= m;
  double var = 0.0;
  for (double v : per_replication_sums) {
    var += (v - mean) * (v - mean);
  }
  var = m > 1.0 ? var / (m - 1.0) : 0.0;
  stat.mean = mean;
  stat.stderr_ = std::sqrt(var / m);
  stat.z_score = stat.stderr_ > 0.0 ? mean / stat.stderr_ : 0.0;
  return stat;
}

double martingale_sum(const InducedChain& chain, const FeatureMap& features,
                      const TdOracle& oracle, const TdConfig& config) {
  TdConfig quiet = config;
  quiet.record_stride = config.total_steps;
  double total = 0.0;
  run_td0(chain, features, &oracle, quiet, [&](const StepView& step) {
    const Vector g = step.td_error * features.row(step.transition.from);
    const Vector xi =
        g - conditional_update_mean(step.theta, step.transition.from, chain, features);
    total += step.eta * xi.dot(step.theta - oracle.theta_star);
  });
  return total;
}

LemmaReport lemma_sum_a1(std::size_t u, std::size_t t) {
  if (u >= t) {
    throw InvalidInput("lemma_sum_a1 requires 0 <= u < t");
  }
  CompensatedSum sum;
  for (std::size_t k = u + 1; k < t; ++k) {
    const double kd = static_cast<double>(k);
    const double lag = static_cast<double>(k - u);
    sum.add(1.0 / (std::log(kd + 3.0) * std::log(lag + 3.0) * std::sqrt(kd + 1.0) *
                   std::sqrt(lag + 1.0)));
  }
  return make_report("sum_a1", params_of({{"u", double(u)}, {"t", double(t)}}), sum.value(),
                     2.0 / std::log(3.0));
}

LemmaReport lemma_sum_a2(std::size_t u, std::size_t t) {
  if (u >= t) {
    throw InvalidInput("lemma_sum_a2 requires 0 <= u < t");
  }
  CompensatedSum sum;
  const double root_t = std::sqrt(static_cast<double>(t));
  for (std::size_t k = u + 1; k < t; ++k) {
    const double kd = static_cast<double>(k);
    sum.add(1.0 / (std::log(kd + 3.0) * std::sqrt(kd + 1.0) * root_t));
  }
  return make_report("sum_a2", params_of({{"u", double(u)}, {"t", double(t)}}), sum.value(),
                     2.0 / std::log(static_cast<double>(u) + 4.0));
}

LemmaReport lemma_sum_a3(std::size_t t) {
  if (t < 1) {
    throw InvalidInput("lemma_sum_a3 requires t >= 1");
  }
  CompensatedSum sum;
  for (std::size_t k = 0; k < t; ++k) {
    const double kd = static_cast<double>(k);
    const double l = std::log(kd + 3.0);
    sum.add(1.0 / (l * l * (kd + 1.0)));
  }
  const double log3 = std::log(3.0);
  return make_report("sum_a3", params_of({{"t", double(t)}}), sum.value(),
                     1.0 / (log3 * log3) + 2.0 / log3);
}

namespace {

struct ReplicationBudget {
  double bias_sum = 0.0;
  double xi_sq = 0.0;
  double b_sq = 0.0;
  double gbar_sq = 0.0;
  double last_theta_norm = 0.0;
  double bias_rhs[4] = {0.0, 0.0, 0.0, 0.0};
};

ReplicationBudget run_budget_replication(const InducedChain& chain, const FeatureMap& features,
                                         const TdOracle& oracle, const TdConfig& config,
                                         std::size_t switch_index, bool with_mixing,
                                         double c_mix) {
  const std::size_t total = config.total_steps;
  std::vector<double> dist(total);
  std::vector<double> ell(total);
  ReplicationBudget out;

  TdConfig quiet = config;
  quiet.record_stride = total;
  run_td0(chain, features, &oracle, quiet, [&](const StepView& step) {
    const Vector g = step.td_error * features.row(step.transition.from);
    const Vector conditional =
        conditional_update_mean(step.theta, step.transition.from, chain, features);
    const Vector gbar = stationary_gradient(oracle, step.theta);
    const Vector xi = g - conditional;
    const Vector bias = conditional - gbar;
    const Vector offset = step.theta - oracle.theta_star;
    const double eta_sq = step.eta * step.eta;
    out.bias_sum += step.eta * bias.dot(offset);
    out.xi_sq += eta_sq * xi.squaredNorm();
    out.b_sq += eta_sq * bias.squaredNorm();
    out.gbar_sq += eta_sq * gbar.squaredNorm();
    dist[step.t] = offset.norm();
    ell[step.t] = ell_of(step.theta, chain.r_inf, features.phi_inf);
    if (step.t + 1 == total) {
      out.last_theta_norm = step.theta.norm();
    }
  });
  if (!with_mixing) {
    return out;
  }

  const double phi_inf = features.phi_inf;
  const double phi_sq = phi_inf * phi_inf;
  const double delta = config.delta(phi_inf);
  const double log_total = std::log(static_cast<double>(total));
  const double t_root = std::sqrt(static_cast<double>(total));
  const std::size_t big_u = switch_index;
  auto base = [&](std::size_t k) {
    const double kd = static_cast<double>(k);
    return std::log(kd + 3.0) * std::sqrt(kd + 1.0);
  };

  // Prefix sums for the inner sums: early[i] = sum_{j=1}^{i} ell_{j-1}/(ln(j+2) sqrt j),
  // late[i] = sum_{j=1}^{i} ell_{j-1}/sqrt j.
  std::vector<double> early(total + 1, 0.0);
  std::vector<double> late(total + 1, 0.0);
  for (std::size_t i = 1; i <= total; ++i) {
    const double id = static_cast<double>(i);
    early[i] = early[i - 1] + ell[i - 1] / (std::log(id + 2.0) * std::sqrt(id));
    late[i] = late[i - 1] + ell[i - 1] / std::sqrt(id);
  }

  CompensatedSum first;
  CompensatedSum second;
  CompensatedSum third;
  CompensatedSum fourth;
  for (std::size_t k = 0; k <= big_u && k < total; ++k) {
    first.add(1.0 / (delta * log_total * base(k)));
    third.add((ell[k] + 2.0 * phi_sq * dist[0]) / base(k) * early[k]);
  }
  for (std::size_t k = big_u + 1; k < total; ++k) {
    const std::size_t lagged = k - big_u;
    second.add(dist[lagged] * ell[lagged] / (delta * log_total * base(k) * t_root));
    const double kd = static_cast<double>(k);
    const double window = late[k] - late[lagged];
    fourth.add((ell[k] + 2.0 * phi_sq * dist[lagged]) /
               (std::log(kd + 3.0) * std::log(static_cast<double>(lagged) + 3.0) *
                std::sqrt(kd + 1.0)) *
               window);
  }
  const double scale = 2.0 / (delta * delta * log_total * log_total);
  out.bias_rhs[0] = 8.0 * c_mix * dist[0] * ell[0] * first.value();
  out.bias_rhs[1] = 8.0 * second.value();
  out.bias_rhs[2] = scale * third.value();
  out.bias_rhs[3] = scale * fourth.value();
  return out;
}

}  // namespace

BiasBudgetReport bias_budget_probe(const InducedChain& chain, const FeatureMap& features,
                                   const TdOracle& oracle, const std::optional<MixingFit>& mixing,
                                   const TdConfig& config, std::size_t replications) {
  if (replications == 0) {
    throw InvalidInput("bias_budget_probe needs at least one replication");
  }
  const std::size_t total = config.total_steps;
  BiasBudgetReport report;
  report.mixing_used = mixing.has_value();
  double c_mix = 1.0;
  if (mixing) {
    c_mix = mixing->c_const;
    report.u_t = std::log(mixing->c_const * std::sqrt(static_cast<double>(total))) /
                 std::log(1.0 / mixing->alpha);
    const double clamped = std::ceil(std::max(0.0, report.u_t));
    report.switch_index =
        static_cast<std::size_t>(std::min(clamped, static_cast<double>(total - 1)));
  }

  double bias_rhs = 0.0;
  double mean_norm = 0.0;
  double mean_norm_sq = 0.0;
  const double m = static_cast<double>(replications);
  for (std::size_t rep = 0; rep < replications; ++rep) {
    TdConfig rep_config = config;
    rep_config.seed = derive_seed(config.seed, 0, rep);
    const auto r = run_budget_replication(chain, features, oracle, rep_config,
                                          report.switch_index, report.mixing_used, c_mix);
    report.bias_sum += r.bias_sum / m;
    report.xi_sq_sum += r.xi_sq / m;
    report.b_sq_sum += r.b_sq / m;
    report.gbar_sq_sum += r.gbar_sq / m;
    bias_rhs += (r.bias_rhs[0] + r.bias_rhs[1] + r.bias_rhs[2] + r.bias_rhs[3]) / m;
    mean_norm += r.last_theta_norm / m;
    mean_norm_sq += r.last_theta_norm * r.last_theta_norm / m;
  }

  const double phi_inf = features.phi_inf;
  const double r_inf = chain.r_inf;
  const double delta = config.delta(phi_inf);
  const double log_total = std::log(static_cast<double>(total));
  const double numerator = r_inf * r_inf * phi_inf * phi_inf +
                           4.0 * r_inf * std::pow(phi_inf, 3) * mean_norm +
                           4.0 * std::pow(phi_inf, 4) * mean_norm_sq;
  CompensatedSum weights;
  for (std::size_t k = 0; k < total; ++k) {
    const double l = std::log(static_cast<double>(k) + 3.0);
    weights.add(1.0 / (l * l * (static_cast<double>(k) + 1.0)));
  }
  report.variance_base = numerator * weights.value() / (delta * delta * log_total * log_total);
  report.b_bound = bias_rhs;

  const std::string params = params_of({{"T", double(total)}, {"reps", m}});
  if (mixing) {
    report.terms.push_back(make_report("bias_sum", params, report.bias_sum, bias_rhs));
  }
  report.terms.push_back(
      make_report("variance_xi", params, report.xi_sq_sum, 4.0 * report.variance_base));
  report.terms.push_back(
      make_report("variance_b", params, report.b_sq_sum, 4.0 * report.variance_base));
  report.terms.push_back(
      make_report("variance_gbar", params, report.gbar_sq_sum, report.variance_base));
  return report;
}

}  // namespace tdforge
