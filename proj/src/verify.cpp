#include "tdforge/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tdforge {

namespace {

struct Campaigns {
  std::size_t splitting;
  std::size_t gradient;
  std::size_t lipschitz;
  std::size_t xi;
  std::size_t contraction;
  std::size_t tv_thetas;
  std::size_t tv_horizon;
};

Campaigns campaign_sizes(VerifyLevel level) {
  if (level == VerifyLevel::Full) {
    return {100, 100000, 100000, 10000, 1000, 5, 100};
  }
  return {20, 2000, 2000, 500, 100, 2, 30};
}

// Keeps the tightest case of a campaign and records how many cases ran.
class Campaign {
 public:
  Campaign(std::string id) : id_(std::move(id)) {}

  void add(const LemmaReport& report) {
    ++cases_;
    failures_ += report.pass ? 0 : 1;
    if (cases_ == 1 || report.slack < worst_.slack) {
      worst_ = report;
    }
  }

  LemmaReport result() const {
    LemmaReport out = worst_;
    out.lemma_id = id_;
    out.params = "cases=" + std::to_string(cases_) + ";failures=" + std::to_string(failures_) +
                 (worst_.params.empty() ? "" : ";worst:" + worst_.params);
    out.pass = failures_ == 0 && cases_ > 0;
    return out;
  }

 private:
  std::string id_;
  LemmaReport worst_;
  std::size_t cases_ = 0;
  std::size_t failures_ = 0;
};

class Fuzzer {
 public:
  Fuzzer(std::uint64_t seed, const Instance& instance, const TdOracle& oracle)
      : rng_(seed), instance_(instance), oracle_(oracle), sampler_(instance.chain) {}

  double uniform() { return to_unit(rng_()); }

  Vector random_vector(Eigen::Index size, double scale) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
      v(i) = scale * normal(rng_);
    }
    return v;
  }

  // Scales spread over four decades; half the draws are centred at theta*.
  Vector random_theta() {
    const double scale = std::pow(10.0, -2.0 + 4.0 * uniform());
    Vector theta = random_vector(oracle_.theta_star.size(), scale);
    if (uniform() < 0.5) {
      theta += oracle_.theta_star;
    }
    return theta;
  }

  Transition random_transition() {
    const std::size_t n = instance_.chain.n_states();
    const auto s = std::min<StateIndex>(n - 1, static_cast<StateIndex>(uniform() * double(n)));
    const StateIndex next = sampler_.next(s, uniform());
    return Transition{
        s, next,
        instance_.chain.reward_mu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next))};
  }

 private:
  std::mt19937_64 rng_;
  const Instance& instance_;
  const TdOracle& oracle_;
  TransitionSampler sampler_;
};

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

VerifyLevel parse_verify_level(const std::string& text) {
  if (text == "fast") return VerifyLevel::Fast;
  if (text == "full") return VerifyLevel::Full;
  throw InvalidInput("unknown verify level '" + text + "' (expected fast or full)");
}

bool VerifyResult::all_pass() const {
  for (const auto& r : all_reports()) {
    if (!r.pass) {
      return false;
    }
  }
  return true;
}

std::vector<LemmaReport> VerifyResult::all_reports() const {
  std::vector<LemmaReport> out;
  for (const auto& inst : instances) {
    for (auto r : inst.reports) {
      r.params = "instance=" + inst.instance + (r.params.empty() ? "" : ";" + r.params);
      out.push_back(std::move(r));
    }
  }
  out.insert(out.end(), global.begin(), global.end());
  return out;
}

Matrix finite_difference_hessian(const TdOracle& oracle, const InducedChain& chain,
                                 const FeatureMap& features, const Vector& theta, double h) {
  const Eigen::Index d = theta.size();
  Matrix out(d, d);
  auto f = [&](const Vector& x) { return potential(oracle, chain, features, x); };
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector pp = theta, pm = theta, mp = theta, mm = theta;
      pp(i) += h;
      pp(j) += h;
      pm(i) += h;
      pm(j) -= h;
      mp(i) -= h;
      mp(j) += h;
      mm(i) -= h;
      mm(j) -= h;
      out(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return out;
}

InstanceVerification verify_instance(const Instance& instance, VerifyLevel level,
                                     std::uint64_t seed, std::size_t threads) {
  const InducedChain& chain = instance.chain;
  const FeatureMap& features = instance.features;
  const Campaigns sizes = campaign_sizes(level);

  InstanceVerification out;
  out.instance = instance.name;
  auto& reports = out.reports;

  const TdOracle oracle = solve_fixed_point(chain, features);
  const MixingFit mixing = estimate_mixing(chain, 200);
  const double phi_sq = features.phi_inf * features.phi_inf;

  const double b_scale = std::max(1.0, inf_norm(oracle.b_vec));
  reports.push_back(make_report("fixed_point_residual", "",
                                inf_norm(oracle.a_matrix * oracle.theta_star - oracle.b_vec),
                                1e-10 * b_scale));
  const Vector v_star = value_of(features, oracle.theta_star);
  reports.push_back(make_report(
      "projected_bellman", "",
      inf_norm(project_d(chain, features, bellman_apply(chain, v_star)) - v_star),
      1e-8 * std::max(1.0, inf_norm(v_star))));
  reports.push_back(make_report("gbar_at_theta_star", "",
                                inf_norm(stationary_gradient(oracle, oracle.theta_star)),
                                1e-10 * b_scale));
  reports.push_back(make_report("hessian_psd", "", -hessian_min_eigenvalue(oracle), 1e-10));
  {
    Eigen::JacobiSVD<Matrix> svd(oracle.a_matrix);
    reports.push_back(
        make_report("a_operator_norm", "", svd.singularValues()(0), 2.0 * phi_sq));
  }

  const Matrix fd = finite_difference_hessian(oracle, chain, features, oracle.theta_star, 1e-4);
  {
    const double floor = 1e-6 * oracle.hessian.cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < fd.rows(); ++i) {
      for (Eigen::Index j = 0; j < fd.cols(); ++j) {
        const double denom = std::max(std::abs(oracle.hessian(i, j)), floor);
        worst = std::max(worst, std::abs(fd(i, j) - oracle.hessian(i, j)) / denom);
      }
    }
    reports.push_back(make_report("hessian_finite_difference", "h=1e-4", worst, 1e-5));
  }

  const Vector& pi = chain.stationary();
  const Matrix flow = pi.asDiagonal() * chain.p_mu;
  const bool reversible =
      (flow - flow.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, flow.maxCoeff());
  const Matrix a_sym = oracle.a_matrix + oracle.a_matrix.transpose();

  Fuzzer fuzz(derive_seed(seed, 1, 0), instance, oracle);
  {
    Campaign splitting("gradient_splitting");
    Campaign gradient_identity("potential_gradient");
    Campaign reversible_identity("potential_gradient_reversible");
    Campaign quadratic("potential_quadratic_form");
    Campaign tower("tower_property");
    Campaign reconstruction("decomposition_reconstruction");
    for (std::size_t i = 0; i < sizes.splitting; ++i) {
      const Vector theta = fuzz.random_theta();
      const double f = potential(oracle, chain, features, theta);
      splitting.add(make_report("", "", std::abs(gradient_splitting_residual(oracle, chain,
                                                                             features, theta)),
                                1e-9 * (1.0 + std::abs(f))));
      const Vector grad = oracle.hessian * (theta - oracle.theta_star);
      const Vector gbar = stationary_gradient(oracle, theta);
      const Vector diff = theta - oracle.theta_star;
      gradient_identity.add(make_report("", "", inf_norm(grad - a_sym * diff),
                                        1e-9 * (1.0 + inf_norm(grad))));
      if (reversible) {
        reversible_identity.add(make_report("", "", inf_norm(grad + 2.0 * gbar),
                                            1e-9 * (1.0 + inf_norm(grad))));
      }
      quadratic.add(make_report("", "", std::abs(f - 0.5 * diff.dot(oracle.hessian * diff)),
                                1e-10 * (1.0 + std::abs(f))));
      Vector mean = Vector::Zero(theta.size());
      for (StateIndex s = 0; s < chain.n_states(); ++s) {
        mean += pi(static_cast<Eigen::Index>(s)) *
                conditional_update_mean(theta, s, chain, features);
      }
      tower.add(make_report("", "", inf_norm(mean - gbar), 1e-10 * (1.0 + inf_norm(gbar))));
      const Transition tr = fuzz.random_transition();
      const auto parts = decompose_step(theta, tr.from, tr, chain, features, oracle);
      reconstruction.add(make_report("", "", inf_norm(parts.xi + parts.bias + parts.gbar - parts.g),
                                     1e-12 * (1.0 + inf_norm(parts.g))));
    }
    for (const auto* c : {&splitting, &gradient_identity, &quadratic, &tower, &reconstruction}) {
      reports.push_back(c->result());
    }
    if (reversible) reports.push_back(reversible_identity.result());
  }

  {
    Campaign contraction("bellman_contraction");
    const auto n = static_cast<Eigen::Index>(chain.n_states());
    for (std::size_t i = 0; i < sizes.contraction; ++i) {
      const double scale = std::pow(10.0, -1.0 + 3.0 * fuzz.uniform());
      const Vector u = fuzz.random_vector(n, scale);
      const Vector v = fuzz.random_vector(n, scale);
      contraction.add(make_report("", "",
                                  inf_norm(bellman_apply(chain, u) - bellman_apply(chain, v)),
                                  chain.gamma * inf_norm(u - v) * (1.0 + 1e-12)));
    }
    reports.push_back(contraction.result());
  }

  {
    Campaign gradient("gradient_bound");
    for (std::size_t i = 0; i < sizes.gradient; ++i) {
      gradient.add(gradient_bound_check(fuzz.random_theta(), fuzz.random_transition(), features,
                                        chain.gamma, chain.r_inf));
    }
    reports.push_back(gradient.result());

    Campaign per_outcome("lipschitz_g");
    Campaign stationary("lipschitz_gbar");
    for (std::size_t i = 0; i < sizes.lipschitz; ++i) {
      const auto pair = lipschitz_check(fuzz.random_theta(), fuzz.random_theta(),
                                        fuzz.random_transition(), chain, features, oracle);
      per_outcome.add(pair.per_outcome);
      stationary.add(pair.stationary);
    }
    reports.push_back(per_outcome.result());
    reports.push_back(stationary.result());

    Campaign xi("xi_lipschitz");
    Campaign xi_conditional("xi_lipschitz_conditional");
    for (std::size_t i = 0; i < sizes.xi; ++i) {
      const Vector a = fuzz.random_theta();
      const Vector b = fuzz.uniform() < 0.1 ? Vector(oracle.theta_star) : fuzz.random_theta();
      const double g_bound = max_update_norm(a, chain, features);
      const double d_b = (b - oracle.theta_star).norm();
      const Transition tr = fuzz.random_transition();
      xi.add(xi_lipschitz_check(a, b, tr, g_bound, d_b, chain, features, oracle));
      xi_conditional.add(
          xi_lipschitz_conditional_check(a, b, tr.from, g_bound, d_b, chain, features, oracle));
    }
    reports.push_back(xi.result());
    reports.push_back(xi_conditional.result());
  }

  {
    Campaign tv("tv_bias");
    for (std::size_t i = 0; i < sizes.tv_thetas; ++i) {
      const Vector theta = fuzz.random_theta();
      for (StateIndex s = 0; s < chain.n_states(); ++s) {
        for (std::size_t k = 0; k <= sizes.tv_horizon; ++k) {
          tv.add(tv_bias_check(theta, s, k, chain, features, oracle, mixing));
        }
      }
    }
    reports.push_back(tv.result());
  }

  if (level == VerifyLevel::Full) {
    const TdConfig config = make_td_config(100.0, 1024, derive_seed(seed, 2, 0));
    const auto budget = bias_budget_probe(chain, features, oracle, mixing, config, 20);
    for (const auto& term : budget.terms) {
      reports.push_back(term);
    }
    constexpr std::size_t kMartingaleReps = 100;
    std::vector<double> sums(kMartingaleReps);
    parallel_for(kMartingaleReps, threads, [&](std::size_t rep) {
      TdConfig rep_config = config;
      rep_config.seed = derive_seed(seed, 3, rep);
      sums[rep] = martingale_sum(chain, features, oracle, rep_config);
    });
    out.martingale = martingale_sum_check(sums);
    reports.push_back(make_report("martingale_z", "reps=" + std::to_string(kMartingaleReps),
                                  std::abs(out.martingale->z_score), 3.0));
  }
  return out;
}

VerifyResult run_verify(const std::vector<Instance>& instances, VerifyLevel level,
                        std::uint64_t seed, std::size_t threads) {
  VerifyResult result;
  result.instances.resize(instances.size());
  parallel_for(instances.size(), threads, [&](std::size_t i) {
    result.instances[i] = verify_instance(instances[i], level, derive_seed(seed, 100 + i, 0), 1);
  });

  const std::vector<std::size_t> lags{0, 1, 10, 100, 1000};
  const std::vector<std::size_t> horizons =
      level == VerifyLevel::Full ? std::vector<std::size_t>{1000, 100000}
                                 : std::vector<std::size_t>{1000};
  for (std::size_t t : horizons) {
    for (std::size_t u : lags) {
      if (u < t) {
        result.global.push_back(lemma_sum_a1(u, t));
        result.global.push_back(lemma_sum_a2(u, t));
      }
    }
  }
  const std::vector<std::size_t> a3_horizons =
      level == VerifyLevel::Full ? std::vector<std::size_t>{1000, 100000, 10000000}
                                 : std::vector<std::size_t>{1000, 100000};
  for (std::size_t t : a3_horizons) {
    result.global.push_back(lemma_sum_a3(t));
  }

  const double large = omega_c(1e6);
  result.global.push_back(make_report("omega_limit_upper", "c=1e6", large, 2.001));
  result.global.push_back(make_report("omega_limit_lower", "c=1e6", 2.0, large));
  result.global.push_back(make_report("omega_blowup", "c=66.09", 1e3, omega_c(66.09)));
  const double grid[] = {67.0, 70.0, 100.0, 1e3, 1e6};
  for (std::size_t i = 0; i + 1 < std::size(grid); ++i) {
    result.global.push_back(make_report(
        "omega_decreasing", "c=" + format_double(grid[i]) + "->" + format_double(grid[i + 1]),
        omega_c(grid[i + 1]), omega_c(grid[i])));
  }
  return result;
}

}  // namespace tdforge
