#include "tdforge/experiment.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

namespace tdforge {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::size_t kMixingHorizon = 200;
constexpr std::size_t kTargetRecords = 1024;

template <typename T>
std::vector<T> number_list(const Json& value, const char* key) {
  std::vector<T> out;
  if (value.is_number()) {
    out.push_back(value.get<T>());
    return out;
  }
  if (!value.is_array()) {
    throw InvalidInput(std::string("config \"") + key + "\" must be a number or a list");
  }
  for (const auto& item : value) {
    if (!item.is_number()) {
      throw InvalidInput(std::string("config \"") + key + "\" must contain numbers only");
    }
    out.push_back(item.get<T>());
  }
  return out;
}

void reject_unknown(const Json& object, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    bool known = false;
    for (const char* name : allowed) {
      known = known || key == name;
    }
    if (!known) {
      throw InvalidInput("unknown key \"" + key + "\" in " + where);
    }
  }
}

GeneratorSpec parse_generator(const Json& doc) {
  reject_unknown(doc,
                 {"name", "n", "d", "n_actions", "gamma", "chain", "concentration", "a", "b",
                  "lambda", "features", "eps", "phi_inf", "reward_scale", "seed"},
                 "generator");
  GeneratorSpec spec = standard_spec();
  spec.name = doc.value("name", std::string("generated"));
  spec.n_states = doc.value("n", spec.n_states);
  spec.dim = doc.value("d", spec.dim);
  spec.n_actions = doc.value("n_actions", spec.n_actions);
  spec.gamma = doc.value("gamma", spec.gamma);
  if (doc.contains("chain")) {
    spec.chain = parse_chain_scheme(doc["chain"].get<std::string>());
  }
  spec.concentration = doc.value("concentration", spec.concentration);
  spec.a = doc.value("a", spec.a);
  spec.b = doc.value("b", spec.b);
  spec.lambda = doc.value("lambda", spec.lambda);
  if (doc.contains("features")) {
    spec.features = parse_feature_scheme(doc["features"].get<std::string>());
  }
  spec.eps = doc.value("eps", spec.eps);
  spec.phi_inf = doc.value("phi_inf", spec.phi_inf);
  spec.reward_scale = doc.value("reward_scale", spec.reward_scale);
  spec.seed = doc.value("seed", spec.seed);
  return normalized(spec);
}

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

double stderr_of(const std::vector<double>& values, double mean) {
  if (values.size() < 2) {
    return 0.0;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += (v - mean) * (v - mean);
  }
  const double m = static_cast<double>(values.size());
  return std::sqrt(sum / (m - 1.0) / m);
}

Instance with_gamma(const Instance& base, double gamma) {
  Mdp mdp = base.mdp;
  mdp.gamma = gamma;
  return assemble_instance(base.name, std::move(mdp), base.policy, base.features.phi);
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

std::size_t worker_count() {
  if (const char* env = std::getenv("TDFORGE_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) {
      return static_cast<std::size_t>(value);
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& thread : pool) {
      thread.join();
    }
  }
  for (auto& error : errors) {
    if (error) {
      std::rethrow_exception(error);
    }
  }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw InvalidInput("config must be a JSON object");
  }
  reject_unknown(doc,
                 {"instance", "generator", "c", "T", "reps", "seed", "stride", "initial_state",
                  "out", "axes"},
                 "config");
  ExperimentConfig config;
  try {
    if (doc.contains("instance")) {
      config.instance_path = doc["instance"].get<std::string>();
    }
    if (doc.contains("generator")) {
      config.generator = parse_generator(doc["generator"]);
    }
    config.c_const = doc.value("c", config.c_const);
    if (doc.contains("T")) {
      config.t_grid = number_list<std::size_t>(doc["T"], "T");
    }
    config.replications = doc.value("reps", config.replications);
    config.seed = doc.value("seed", config.seed);
    config.record_stride = doc.value("stride", config.record_stride);
    if (doc.contains("initial_state") && !doc["initial_state"].is_null()) {
      const Json& start = doc["initial_state"];
      if (!(start.is_string() && start.get<std::string>() == "stationary")) {
        config.initial_state = start.get<StateIndex>();
      }
    }
    config.out_dir = doc.value("out", config.out_dir);
    if (doc.contains("axes")) {
      const Json& axes = doc["axes"];
      reject_unknown(axes, {"c", "T", "gamma", "eps", "mixing"}, "axes");
      if (axes.contains("c")) config.axes.c = number_list<double>(axes["c"], "axes.c");
      if (axes.contains("T")) config.axes.T = number_list<std::size_t>(axes["T"], "axes.T");
      if (axes.contains("gamma")) {
        config.axes.gamma = number_list<double>(axes["gamma"], "axes.gamma");
      }
      if (axes.contains("eps")) config.axes.eps = number_list<double>(axes["eps"], "axes.eps");
      if (axes.contains("mixing")) {
        config.axes.mixing = number_list<double>(axes["mixing"], "axes.mixing");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("config has a field of the wrong type: ") + e.what());
  }
  if (config.replications < 1) {
    throw InvalidInput("reps must be at least 1");
  }
  if (config.t_grid.empty()) {
    throw InvalidInput("T grid must not be empty");
  }
  return config;
}

Instance resolve_instance(const ExperimentConfig& config) {
  if (config.instance_path) {
    return load_instance(*config.instance_path);
  }
  return generate_instance(config.generator);
}

PreparedInstance prepare(Instance instance) {
  PreparedInstance prepared;
  prepared.oracle = solve_fixed_point(instance.chain, instance.features);
  prepared.mixing = estimate_mixing(instance.chain, kMixingHorizon);
  prepared.lambda_min = hessian_min_eigenvalue(prepared.oracle);
  prepared.instance = std::move(instance);
  return prepared;
}

CellResult run_cell(const PreparedInstance& prepared, double c_const, std::size_t total_steps,
                    std::size_t replications, std::uint64_t base_seed, std::size_t cell_index,
                    std::size_t record_stride, std::optional<StateIndex> initial_state,
                    std::size_t threads) {
  const Instance& instance = prepared.instance;
  CellResult cell;
  cell.cell_index = cell_index;
  cell.c_const = c_const;
  cell.total_steps = total_steps;
  cell.gamma = instance.chain.gamma;
  cell.replications = replications;
  cell.lambda_min = prepared.lambda_min;

  const std::size_t stride =
      record_stride > 0 ? record_stride : std::max<std::size_t>(1, total_steps / kTargetRecords);
  TdConfig config;
  try {
    config = make_td_config(c_const, total_steps, base_seed, initial_state, stride);
  } catch (const InvalidInput& e) {
    if (c_const > kMinAlgorithmConstant) {
      throw;
    }
    cell.status = "invalid_c";
    cell.detail = e.what();
    return cell;
  }

  cell.records.resize(replications);
  parallel_for(replications, threads, [&](std::size_t rep) {
    TdConfig rep_config = config;
    rep_config.seed = derive_seed(base_seed, cell_index, rep);
    cell.records[rep] =
        run_td0(instance.chain, instance.features, &prepared.oracle, rep_config);
  });

  std::vector<double> f_bars;
  std::vector<double> f_bars_plain;
  for (const auto& record : cell.records) {
    f_bars.push_back(record.f_bar);
    f_bars_plain.push_back(record.f_bar_unweighted);
  }
  cell.f_bar_mean = mean_of(f_bars);
  cell.f_bar_stderr = stderr_of(f_bars, cell.f_bar_mean);
  cell.f_bar_unweighted_mean = mean_of(f_bars_plain);

  const auto bound = iterate_bound_check(cell.records, prepared.oracle, instance.chain,
                                         instance.features, config);
  cell.max_mean_theta_sq = bound.max_mean_theta_sq;
  cell.omega = omega_c(c_const);
  cell.omega_bound = bound.bound;
  cell.ratio = bound.worst_ratio;
  cell.iterate_pass = bound.pass;
  const auto min_t =
      min_T_condition(prepared.mixing.c_const, prepared.mixing.alpha, total_steps);
  cell.min_t_ok = min_t.holds;
  cell.min_t_margin = min_t.margin;
  return cell;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t threads) {
  const PreparedInstance prepared = prepare(resolve_instance(config));
  ExperimentResult result;
  result.instance_name = prepared.instance.name;
  result.mixing = prepared.mixing;
  for (std::size_t i = 0; i < config.t_grid.size(); ++i) {
    result.cells.push_back(run_cell(prepared, config.c_const, config.t_grid[i],
                                    config.replications, config.seed, i, config.record_stride,
                                    config.initial_state, threads));
  }
  return result;
}

ExperimentResult run_sweep(const ExperimentConfig& config, std::size_t threads) {
  const SweepAxes& axes = config.axes;
  const bool generated = !config.instance_path.has_value();
  if (!axes.eps.empty() &&
      (!generated || config.generator.features != FeatureScheme::Adversarial)) {
    throw InvalidInput("an eps axis needs a generator with adversarial features");
  }
  if (!axes.mixing.empty() &&
      (!generated || config.generator.chain == ChainScheme::RandomDirichlet)) {
    throw InvalidInput("a mixing axis needs a generator with a two-state or permutation-mix chain");
  }

  const std::vector<double> c_values = axes.c.empty() ? std::vector<double>{config.c_const} : axes.c;
  const std::vector<std::size_t> t_values =
      axes.T.empty() ? std::vector<std::size_t>{config.t_grid.front()} : axes.T;
  const std::vector<std::optional<double>> no_value{std::nullopt};
  auto as_optional = [&](const std::vector<double>& values) {
    if (values.empty()) {
      return no_value;
    }
    std::vector<std::optional<double>> out(values.begin(), values.end());
    return out;
  };
  const auto gamma_values = as_optional(axes.gamma);
  const auto eps_values = as_optional(axes.eps);
  const auto mixing_values = as_optional(axes.mixing);

  const Instance base = generated ? Instance{} : load_instance(*config.instance_path);
  ExperimentResult result;
  std::size_t cell_index = 0;
  bool first_instance = true;
  for (const auto& gamma : gamma_values) {
    for (const auto& eps : eps_values) {
      for (const auto& mix : mixing_values) {
        Instance instance;
        if (generated) {
          GeneratorSpec spec = config.generator;
          if (gamma) spec.gamma = *gamma;
          if (eps) spec.eps = *eps;
          if (mix) {
            spec.a = *mix;
            spec.b = *mix;
            spec.lambda = *mix;
          }
          instance = generate_instance(spec);
        } else {
          instance = gamma ? with_gamma(base, *gamma) : base;
        }
        const PreparedInstance prepared = prepare(std::move(instance));
        if (first_instance) {
          result.instance_name = prepared.instance.name;
          result.mixing = prepared.mixing;
          first_instance = false;
        }
        for (double c : c_values) {
          for (std::size_t t : t_values) {
            CellResult cell = run_cell(prepared, c, t, config.replications, config.seed,
                                       cell_index++, config.record_stride, config.initial_state,
                                       threads);
            cell.eps = eps;
            cell.mixing = mix;
            result.cells.push_back(std::move(cell));
          }
        }
      }
    }
  }
  return result;
}

std::string aggregate_json(const ExperimentResult& result, const ExperimentConfig& config) {
  Json doc;
  doc["instance"] = result.instance_name;
  doc["seed"] = config.seed;
  doc["reps"] = config.replications;
  Json mixing;
  mixing["C"] = result.mixing.c_const;
  mixing["alpha"] = result.mixing.alpha;
  mixing["exact"] = result.mixing.exact_mixing;
  doc["mixing"] = std::move(mixing);
  Json cells = Json::array();
  for (const auto& cell : result.cells) {
    Json entry;
    entry["cell"] = cell.cell_index;
    entry["c"] = cell.c_const;
    entry["T"] = cell.total_steps;
    entry["gamma"] = cell.gamma;
    entry["eps"] = optional_number(cell.eps);
    entry["mixing"] = optional_number(cell.mixing);
    entry["status"] = cell.status;
    if (cell.status != "ok") {
      entry["detail"] = cell.detail;
      cells.push_back(std::move(entry));
      continue;
    }
    entry["f_bar_mean"] = cell.f_bar_mean;
    entry["f_bar_stderr"] = cell.f_bar_stderr;
    entry["f_bar_unweighted_mean"] = cell.f_bar_unweighted_mean;
    entry["max_mean_theta_sq"] = cell.max_mean_theta_sq;
    entry["omega_c"] = cell.omega;
    entry["omega_bound"] = cell.omega_bound;
    entry["ratio"] = cell.ratio;
    entry["iterate_bound_pass"] = cell.iterate_pass ? Json(*cell.iterate_pass) : Json(nullptr);
    entry["minT_ok"] = cell.min_t_ok;
    entry["minT_margin"] = cell.min_t_margin;
    entry["lambda_min"] = cell.lambda_min;
    cells.push_back(std::move(entry));
  }
  doc["cells"] = std::move(cells);
  return doc.dump(2) + "\n";
}

std::string cells_csv(const ExperimentResult& result, const SweepAxes& axes) {
  std::string out = "c,T";
  if (!axes.gamma.empty()) out += ",gamma";
  if (!axes.eps.empty()) out += ",eps";
  if (!axes.mixing.empty()) out += ",mixing";
  out += ",f_bar_mean,f_bar_stderr,max_mean_theta_sq,omega_bound,ratio,minT_ok,lambda_min,status\n";
  for (const auto& cell : result.cells) {
    out += format_double(cell.c_const) + ',' + std::to_string(cell.total_steps);
    if (!axes.gamma.empty()) out += ',' + format_double(cell.gamma);
    if (!axes.eps.empty()) out += ',' + format_double(cell.eps.value_or(std::nan("")));
    if (!axes.mixing.empty()) out += ',' + format_double(cell.mixing.value_or(std::nan("")));
    if (cell.status == "ok") {
      out += ',' + format_double(cell.f_bar_mean) + ',' + format_double(cell.f_bar_stderr) + ',' +
             format_double(cell.max_mean_theta_sq) + ',' + format_double(cell.omega_bound) +
             ',' + format_double(cell.ratio) + ',' + (cell.min_t_ok ? "true" : "false");
    } else {
      out += ",,,,,,";
    }
    out += ',' + format_double(cell.lambda_min) + ',' + cell.status + '\n';
  }
  return out;
}

void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      bool per_replication) {
  namespace fs = std::filesystem;
  const fs::path root(config.out_dir.empty() ? std::string(".") : config.out_dir);
  fs::create_directories(root);
  write_text_file((root / "aggregate.json").string(), aggregate_json(result, config));
  write_text_file((root / "cells.csv").string(), cells_csv(result, config.axes));
  if (!per_replication) {
    return;
  }
  for (const auto& cell : result.cells) {
    const fs::path dir = root / ("cell_" + std::to_string(cell.cell_index));
    fs::create_directories(dir);
    for (std::size_t rep = 0; rep < cell.records.size(); ++rep) {
      const std::string stem = "rep_" + std::to_string(rep);
      write_text_file((dir / (stem + ".csv")).string(), run_record_csv(cell.records[rep]));
      write_text_file((dir / (stem + ".json")).string(), run_summary_json(cell.records[rep]));
    }
  }
}

}  // namespace tdforge
