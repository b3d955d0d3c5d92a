#include "tdforge/experiment.hpp"
#include "tdforge/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace tdforge;

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailed = 1;
constexpr int kExitInvalidInput = 2;

struct GeneratorFlags {
  std::size_t n = 0, d = 0, actions = 0;
  double gamma = 0, concentration = 0, a = 0, b = 0, lambda = 0, eps = 0, phi_inf = 0,
         reward_scale = 0;
  std::string chain, features, name;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> options;

  void attach(CLI::App* cmd) {
    options = {
        cmd->add_option("--n", n, "number of states"),
        cmd->add_option("--d", d, "feature dimension"),
        cmd->add_option("--actions", actions, "number of actions (random-dirichlet)"),
        cmd->add_option("--gamma", gamma, "discount factor in (0,1)"),
        cmd->add_option("--chain", chain, "random-dirichlet | two-state | permutation-mix"),
        cmd->add_option("--concentration", concentration, "Dirichlet concentration"),
        cmd->add_option("--a", a, "two-state: probability of leaving state 0"),
        cmd->add_option("--b", b, "two-state: probability of leaving state 1"),
        cmd->add_option("--lambda", lambda, "permutation-mix weight of the uniform kernel"),
        cmd->add_option("--features", features, "random-gaussian | tabular | adversarial"),
        cmd->add_option("--eps", eps, "adversarial feature scale"),
        cmd->add_option("--phi-inf", phi_inf, "adversarial feature bound"),
        cmd->add_option("--reward-scale", reward_scale, "rewards uniform on [0, scale]"),
        cmd->add_option("--gen-seed", seed, "generator seed"),
        cmd->add_option("--name", name, "instance name"),
    };
  }

  bool any() const {
    for (const auto* opt : options) {
      if (opt->count() > 0) return true;
    }
    return false;
  }

  GeneratorSpec apply(GeneratorSpec spec) const {
    auto given = [this](std::size_t i) { return options[i]->count() > 0; };
    if (given(0)) spec.n_states = n;
    if (given(1)) spec.dim = d;
    if (given(2)) spec.n_actions = actions;
    if (given(3)) spec.gamma = gamma;
    if (given(4)) spec.chain = parse_chain_scheme(chain);
    if (given(5)) spec.concentration = concentration;
    if (given(6)) spec.a = a;
    if (given(7)) spec.b = b;
    if (given(8)) spec.lambda = lambda;
    if (given(9)) spec.features = parse_feature_scheme(features);
    if (given(10)) spec.eps = eps;
    if (given(11)) spec.phi_inf = phi_inf;
    if (given(12)) spec.reward_scale = reward_scale;
    if (given(13)) spec.seed = seed;
    if (given(14)) spec.name = name;
    return normalized(spec);
  }
};

struct ExperimentFlags {
  std::string instance, config, out, start;
  std::uint64_t seed = 0;
  std::size_t reps = 0, stride = 0;
  std::vector<std::size_t> t_grid;
  double c = 0;
  bool no_rep_files = false;
  CLI::Option *instance_opt = nullptr, *config_opt = nullptr, *out_opt = nullptr,
              *seed_opt = nullptr, *reps_opt = nullptr, *t_opt = nullptr, *c_opt = nullptr,
              *stride_opt = nullptr, *start_opt = nullptr;
  GeneratorFlags generator;

  void attach(CLI::App* cmd) {
    instance_opt = cmd->add_option("--instance", instance, "instance JSON file");
    config_opt = cmd->add_option("--config", config, "experiment config JSON");
    out_opt = cmd->add_option("--out", out, "output directory");
    seed_opt = cmd->add_option("--seed", seed, "base seed");
    reps_opt = cmd->add_option("--reps", reps, "replications per cell");
    t_opt = cmd->add_option("--T", t_grid, "horizon(s), comma separated")->delimiter(',');
    c_opt = cmd->add_option("--c", c, "algorithm constant c > 30 + sqrt(1302)");
    stride_opt = cmd->add_option("--stride", stride, "record every k-th step (0 = auto)");
    start_opt = cmd->add_option("--start", start, "initial state index or 'stationary'");
    cmd->add_flag("--no-rep-files", no_rep_files, "skip per-replication CSV/JSON files");
    generator.attach(cmd);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig config;
    if (config_opt->count() > 0) {
      config = parse_experiment_config(read_text_file(this->config));
    }
    if (instance_opt->count() > 0) {
      config.instance_path = instance;
    }
    if (generator.any()) {
      if (config.instance_path) {
        throw InvalidInput("generator flags cannot be combined with --instance");
      }
      config.generator = generator.apply(config.generator);
    }
    if (out_opt->count() > 0) config.out_dir = out;
    if (seed_opt->count() > 0) config.seed = seed;
    if (reps_opt->count() > 0) config.replications = reps;
    if (t_opt->count() > 0) config.t_grid = t_grid;
    if (c_opt->count() > 0) config.c_const = c;
    if (stride_opt->count() > 0) config.record_stride = stride;
    if (start_opt->count() > 0) {
      if (start == "stationary") {
        config.initial_state.reset();
      } else {
        try {
          config.initial_state = static_cast<StateIndex>(std::stoull(start));
        } catch (const std::exception&) {
          throw InvalidInput("--start must be a state index or 'stationary'");
        }
      }
    }
    if (config.replications < 1) {
      throw InvalidInput("--reps must be at least 1");
    }
    return config;
  }
};

void require_valid_c(double c) {
  make_td_config(c, 4, 0);
}

int cmd_generate(const ExperimentFlags& flags, const std::string& corpus_dir) {
  if (!corpus_dir.empty()) {
    std::filesystem::create_directories(corpus_dir);
    for (const auto& spec : builtin_corpus()) {
      const Instance instance = generate_instance(spec);
      const auto path = (std::filesystem::path(corpus_dir) / (spec.name + ".json")).string();
      save_instance(instance, path);
      std::cout << path << "\n";
    }
    return kExitOk;
  }
  ExperimentConfig config = flags.resolve();
  const Instance instance =
      config.instance_path ? load_instance(*config.instance_path) : generate_instance(config.generator);
  if (config.out_dir.empty()) {
    std::cout << instance_to_json(instance);
  } else {
    const std::filesystem::path path(config.out_dir);
    if (path.has_parent_path()) {
      std::filesystem::create_directories(path.parent_path());
    }
    save_instance(instance, config.out_dir);
    std::cerr << "wrote " << config.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_run(const ExperimentFlags& flags) {
  const ExperimentConfig config = flags.resolve();
  require_valid_c(config.c_const);
  const ExperimentResult result = run_experiment(config, worker_count());
  if (!config.out_dir.empty()) {
    write_experiment(result, config, !flags.no_rep_files);
  }
  std::cout << aggregate_json(result, config);
  return kExitOk;
}

int cmd_sweep(const ExperimentFlags& flags) {
  const ExperimentConfig config = flags.resolve();
  const ExperimentResult result = run_sweep(config, worker_count());
  if (!config.out_dir.empty()) {
    write_experiment(result, config, !flags.no_rep_files);
  }
  std::cout << cells_csv(result, config.axes);
  for (const auto& cell : result.cells) {
    if (cell.status != "ok") {
      std::cerr << "cell " << cell.cell_index << " skipped: " << cell.detail << "\n";
    }
  }
  return kExitOk;
}

int cmd_verify(const ExperimentFlags& flags, const std::string& level_text) {
  const VerifyLevel level = parse_verify_level(level_text);
  std::vector<Instance> instances;
  if (flags.instance_opt->count() > 0) {
    instances.push_back(load_instance(flags.instance));
  } else {
    for (const auto& spec : builtin_corpus()) {
      instances.push_back(generate_instance(spec));
    }
  }
  const std::uint64_t seed = flags.seed_opt->count() > 0 ? flags.seed : 0;
  const VerifyResult result = run_verify(instances, level, seed, worker_count());
  const auto reports = result.all_reports();
  std::size_t failures = 0;
  for (const auto& r : reports) {
    if (!r.pass) {
      ++failures;
      std::cout << "FAIL " << r.lemma_id << " [" << r.params << "] lhs=" << format_double(r.lhs)
                << " bound=" << format_double(r.bound) << "\n";
    }
  }
  for (const auto& inst : result.instances) {
    if (inst.martingale) {
      std::cout << "martingale " << inst.instance << " z=" << format_double(inst.martingale->z_score)
                << " mean=" << format_double(inst.martingale->mean)
                << " stderr=" << format_double(inst.martingale->stderr_) << "\n";
    }
  }
  if (flags.out_opt->count() > 0) {
    std::filesystem::create_directories(flags.out);
    write_text_file((std::filesystem::path(flags.out) / "verify_reports.csv").string(),
                    lemma_reports_csv(reports));
  }
  std::cout << "verify " << level_text << ": " << reports.size() << " checks on "
            << instances.size() << " instances, " << failures << " failed\n";
  return failures == 0 ? kExitOk : kExitVerificationFailed;
}

int cmd_report(const ExperimentFlags& flags) {
  const ExperimentConfig config = flags.resolve();
  const PreparedInstance prepared = prepare(resolve_instance(config));
  const auto& instance = prepared.instance;
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(oracle_summary_json(prepared.oracle));
  doc["instance"] = instance.name;
  doc["n_states"] = instance.chain.n_states();
  doc["dim"] = instance.features.dim();
  doc["gamma"] = instance.chain.gamma;
  doc["r_inf"] = instance.chain.r_inf;
  doc["phi_inf"] = instance.features.phi_inf;
  doc["mixing"] = {{"C", prepared.mixing.c_const},
                   {"alpha", prepared.mixing.alpha},
                   {"exact", prepared.mixing.exact_mixing},
                   {"max_residual", prepared.mixing.max_residual}};
  require_valid_c(config.c_const);
  const double omega = omega_c(config.c_const);
  const double phi_sq = instance.features.phi_inf * instance.features.phi_inf;
  doc["c"] = config.c_const;
  doc["omega_c"] = omega;
  doc["omega_bound"] = omega * omega *
                       std::max(instance.chain.r_inf * instance.chain.r_inf / phi_sq,
                                prepared.oracle.theta_star.squaredNorm());
  nlohmann::ordered_json min_t = nlohmann::ordered_json::array();
  for (std::size_t t : config.t_grid) {
    const auto cond = min_T_condition(prepared.mixing.c_const, prepared.mixing.alpha, t);
    min_t.push_back({{"T", t}, {"holds", cond.holds}, {"margin", cond.margin}, {"u", cond.u}});
  }
  doc["minT"] = std::move(min_t);
  std::cout << doc.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projection-free TD(0) simulator and verification suite"};
  app.require_subcommand(1);

  ExperimentFlags generate_flags, run_flags, sweep_flags, verify_flags, report_flags;
  std::string corpus_dir;
  std::string level = "fast";

  auto* generate = app.add_subcommand("generate", "write a generated (or re-validated --instance) instance as JSON");
  generate_flags.attach(generate);
  generate->add_option("--corpus", corpus_dir, "write the built-in corpus into this directory");

  auto* run = app.add_subcommand("run", "run M replications per horizon and aggregate");
  run_flags.attach(run);

  auto* sweep = app.add_subcommand("sweep", "cross-product sweep over config axes");
  sweep_flags.attach(sweep);

  auto* verify = app.add_subcommand("verify", "run the invariant and lemma suite");
  verify_flags.attach(verify);
  verify->add_option("--level", level, "fast | full");

  auto* report = app.add_subcommand("report", "print oracle, mixing and constant summary");
  report_flags.attach(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (generate->parsed()) return cmd_generate(generate_flags, corpus_dir);
    if (run->parsed()) return cmd_run(run_flags);
    if (sweep->parsed()) return cmd_sweep(sweep_flags);
    if (verify->parsed()) return cmd_verify(verify_flags, level);
    if (report->parsed()) return cmd_report(report_flags);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: " << e.what() << " (residual " << e.residual() << ")\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
  return kExitInvalidInput;
}
