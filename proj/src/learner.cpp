#include "tdforge/learner.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

namespace tdforge {

TdConfig make_td_config(double c_const, std::size_t total_steps, std::uint64_t seed,
                        std::optional<StateIndex> initial_state, std::size_t record_stride) {
  if (!(c_const > kMinAlgorithmConstant)) {
    std::ostringstream os;
    os.precision(10);
    os << "algorithm constant c = " << c_const << " must exceed 30 + sqrt(1302) ~ "
       << kMinAlgorithmConstant << "; the bounded-iterate and rate guarantees are void below it";
    throw InvalidInput(os.str());
  }
  if (total_steps < 4) {
    throw InvalidInput("T must be at least 4 so that ln T > 1");
  }
  if (record_stride < 1) {
    throw InvalidInput("record_stride must be at least 1");
  }
  TdConfig config;
  config.c_const = c_const;
  config.total_steps = total_steps;
  config.seed = seed;
  config.initial_state = initial_state;
  config.record_stride = record_stride;
  return config;
}

double step_size(std::size_t t, const TdConfig& config, double phi_inf) {
  const double td = static_cast<double>(t);
  return 1.0 / (config.c_const * phi_inf * phi_inf *
                std::log(static_cast<double>(config.total_steps)) * std::log(td + 3.0) *
                std::sqrt(td + 1.0));
}

TdUpdate td_update(const Vector& theta, const Transition& transition, double gamma, double eta,
                   const FeatureMap& features) {
  if (theta.size() != features.phi.cols()) {
    throw InvalidInput("td_update: theta dimension mismatch");
  }
  const auto phi_s = features.row(transition.from);
  const auto phi_next = features.row(transition.to);
  TdUpdate out;
  out.td_error = transition.reward + gamma * phi_next.dot(theta) - phi_s.dot(theta);
  out.g = out.td_error * phi_s;
  out.theta = theta + eta * out.g;
  return out;
}

RunRecord run_td0(const InducedChain& chain, const FeatureMap& features, const TdOracle* oracle,
                  const TdConfig& config, const StepObserver& observer) {
  if (features.n_states() != chain.n_states()) {
    throw InvalidInput("run_td0: feature rows do not match the number of states");
  }
  const auto ergodicity = check_ergodic(chain);
  if (!ergodicity.ergodic()) {
    throw InvalidInput("run_td0: chain is not ergodic: " + ergodicity.diagnostic);
  }
  // Hand-built configs go through the same validation.
  make_td_config(config.c_const, config.total_steps, config.seed, config.initial_state,
                 config.record_stride);
  if (config.initial_state && *config.initial_state >= chain.n_states()) {
    throw InvalidInput("run_td0: initial state out of range");
  }

  const TransitionSampler sampler(chain);
  std::mt19937_64 rng(config.seed);
  StateIndex s = config.initial_state ? *config.initial_state : sampler.initial(to_unit(rng()));

  const auto d = features.phi.cols();
  const double phi_inf = features.phi_inf;
  const double gamma = chain.gamma;
  const std::size_t total = config.total_steps;

  RunRecord record;
  record.config = config;
  record.has_oracle = oracle != nullptr;
  record.steps.reserve(total / config.record_stride + 1);

  Vector theta = Vector::Zero(d);
  Vector weighted_sum = Vector::Zero(d);
  Vector plain_sum = Vector::Zero(d);
  double sum_eta = 0.0;

  for (std::size_t t = 0; t < total; ++t) {
    const double eta = step_size(t, config, phi_inf);
    const StateIndex next = sampler.next(s, to_unit(rng()));
    const Transition transition{
        s, next,
        chain.reward_mu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next))};
    const auto phi_s = features.row(s);
    const double td_error =
        transition.reward + gamma * features.row(next).dot(theta) - phi_s.dot(theta);

    if (t % config.record_stride == 0) {
      RecordedStep step;
      step.t = t;
      step.eta = eta;
      step.theta_norm = theta.norm();
      step.grad_norm = std::abs(td_error) * phi_s.norm();
      step.ell = chain.r_inf * phi_inf + 2.0 * phi_inf * phi_inf * step.theta_norm;
      if (oracle) {
        step.dist_to_star = (theta - oracle->theta_star).norm();
        step.f_value = potential(*oracle, chain, features, theta);
      }
      record.steps.push_back(step);
    }
    if (observer) {
      observer(StepView{t, eta, theta, transition, td_error});
    }

    weighted_sum.noalias() += eta * theta;
    plain_sum += theta;
    sum_eta += eta;
    theta.noalias() += (eta * td_error) * phi_s;
    s = next;
  }

  record.theta_bar = weighted_sum / sum_eta;
  record.theta_bar_unweighted = plain_sum / static_cast<double>(total);
  record.theta_final = theta;
  record.sum_eta = sum_eta;
  if (oracle) {
    record.f_bar = potential(*oracle, chain, features, record.theta_bar);
    record.f_bar_unweighted = potential(*oracle, chain, features, record.theta_bar_unweighted);
  }
  return record;
}

double omega_c(double c) {
  if (!(c > kMinAlgorithmConstant)) {
    throw InvalidInput("omega_c is only defined for c > 30 + sqrt(1302)");
  }
  const double c2 = c * c;
  const double shifted = c2 - 60.0 * c - 402.0;
  const double head = (2.0 * c2 + 72.0 * c + 417.0) / (2.0 * shifted);
  const double numerator = 4.0 * c2 * c2 + 504.0 * c2 * c - 5668.0 * c2 - 53184.0 * c - 2991.0;
  return head + std::sqrt(numerator / (4.0 * shifted * shifted));
}

MinTCondition min_T_condition(double c_mix, double alpha, std::size_t total_steps) {
  if (!(c_mix > 0.0) || !(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidInput("min_T_condition requires C > 0 and 0 < alpha < 1");
  }
  const double log_t = std::log(static_cast<double>(total_steps));
  MinTCondition out;
  if (alpha <= std::numeric_limits<double>::min()) {
    out.holds = true;
    out.margin = log_t;
    return out;
  }
  const double raw_u =
      std::log(c_mix * std::sqrt(static_cast<double>(total_steps))) / std::log(1.0 / alpha);
  out.u = std::max(0.0, raw_u);
  const double requirement =
      std::max(c_mix * std::sqrt(out.u + 1.0), std::pow(out.u + 1.0, 0.75));
  out.margin = log_t - requirement;
  out.holds = out.margin >= 0.0;
  return out;
}

IterateBoundReport iterate_bound_check(const std::vector<RunRecord>& records,
                                       const TdOracle& oracle, const InducedChain& chain,
                                       const FeatureMap& features, const TdConfig& config) {
  IterateBoundReport report;
  report.replications = records.size();
  const double phi_inf = features.phi_inf;
  report.bound = std::pow(omega_c(config.c_const), 2) *
                 std::max(chain.r_inf * chain.r_inf / (phi_inf * phi_inf),
                          oracle.theta_star.squaredNorm());
  if (records.empty()) {
    report.warning = "no replications supplied";
    return report;
  }
  const std::size_t points = records.front().steps.size();
  for (const auto& r : records) {
    if (r.steps.size() != points || r.config.total_steps != config.total_steps ||
        r.config.record_stride != config.record_stride || r.config.c_const != config.c_const) {
      throw InvalidInput("iterate_bound_check: records do not share one configuration");
    }
  }

  const double m = static_cast<double>(records.size());
  bool all_ok = true;
  auto consider = [&](std::size_t t, auto&& squared_norm_of) {
    double mean = 0.0;
    double second = 0.0;
    for (const auto& r : records) {
      const double v = squared_norm_of(r);
      mean += v;
      second += v * v;
    }
    mean /= m;
    const double variance = m > 1.0 ? std::max(0.0, (second - m * mean * mean) / (m - 1.0)) : 0.0;
    const double stderr_ = std::sqrt(variance / m);
    report.max_mean_theta_sq = std::max(report.max_mean_theta_sq, mean);
    const double ratio = report.bound > 0.0 ? mean / report.bound : (mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (ratio > report.worst_ratio) {
      report.worst_ratio = ratio;
      report.worst_t = t;
    }
    if (mean + 2.0 * stderr_ > report.bound) {
      all_ok = false;
    }
  };

  for (std::size_t i = 0; i < points; ++i) {
    consider(records.front().steps[i].t,
             [i](const RunRecord& r) { return r.steps[i].theta_norm * r.steps[i].theta_norm; });
  }
  consider(config.total_steps, [](const RunRecord& r) { return r.theta_final.squaredNorm(); });

  if (records.size() < 30) {
    report.warning = "fewer than 30 replications: no pass/fail verdict";
  } else {
    report.pass = all_ok;
  }
  return report;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t cell, std::uint64_t rep) {
  return splitmix64(splitmix64(splitmix64(base_seed) ^ cell) ^ rep);
}

}  // namespace tdforge
