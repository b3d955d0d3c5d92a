#pragma once

#include "tdforge/generators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tdforge {

/// Worker count: TDFORGE_THREADS if set to a positive integer, else hardware concurrency.
std::size_t worker_count();

/// Runs task(i) for i in [0, count) on up to `threads` workers. Exceptions are rethrown
/// in index order after all workers stop.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& task);

struct SweepAxes {
  std::vector<double> c;
  std::vector<std::size_t> T;
  std::vector<double> gamma;
  std::vector<double> eps;
  /// two-state: a = b = value; permutation-mix: lambda = value.
  std::vector<double> mixing;

  bool empty() const {
    return c.empty() && T.empty() && gamma.empty() && eps.empty() && mixing.empty();
  }
};

struct ExperimentConfig {
  std::optional<std::string> instance_path;
  GeneratorSpec generator = standard_spec();
  double c_const = 100.0;
  std::vector<std::size_t> t_grid{1024};
  std::size_t replications = 30;
  std::uint64_t seed = 0;
  /// 0 selects max(1, T / 1024).
  std::size_t record_stride = 0;
  std::optional<StateIndex> initial_state;
  std::string out_dir;
  SweepAxes axes;
};

/// Parses the JSON mirror of ExperimentConfig. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& text);

/// Loads the configured instance file or runs the generator.
Instance resolve_instance(const ExperimentConfig& config);

/// Aggregates over the replications of one (instance, c, T) cell.
struct CellResult {
  std::size_t cell_index = 0;
  double c_const = 0.0;
  std::size_t total_steps = 0;
  double gamma = 0.0;
  std::optional<double> eps;
  std::optional<double> mixing;
  std::size_t replications = 0;
  /// "ok" or "invalid_c".
  std::string status = "ok";
  std::string detail;
  double f_bar_mean = 0.0;
  double f_bar_stderr = 0.0;
  double f_bar_unweighted_mean = 0.0;
  double max_mean_theta_sq = 0.0;
  double omega = 0.0;
  double omega_bound = 0.0;
  double ratio = 0.0;
  std::optional<bool> iterate_pass;
  bool min_t_ok = false;
  double min_t_margin = 0.0;
  double lambda_min = 0.0;
  std::vector<RunRecord> records;
};

/// Everything a cell needs that depends on the instance only.
struct PreparedInstance {
  Instance instance;
  TdOracle oracle;
  MixingFit mixing;
  double lambda_min = 0.0;
};

PreparedInstance prepare(Instance instance);

/// M replications with seeds derive_seed(base_seed, cell_index, rep). An invalid c yields
/// status "invalid_c" instead of an exception.
CellResult run_cell(const PreparedInstance& prepared, double c_const, std::size_t total_steps,
                    std::size_t replications, std::uint64_t base_seed, std::size_t cell_index,
                    std::size_t record_stride, std::optional<StateIndex> initial_state,
                    std::size_t threads);

struct ExperimentResult {
  std::string instance_name;
  MixingFit mixing;
  std::vector<CellResult> cells;
};

/// One cell per entry of config.t_grid at config.c_const.
ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t threads);

/// Cross product over the configured axes; with no axes this is the single cell
/// (config.c_const, config.t_grid.front()).
ExperimentResult run_sweep(const ExperimentConfig& config, std::size_t threads);

std::string aggregate_json(const ExperimentResult& result, const ExperimentConfig& config);

/// Long-form CSV, one row per cell. Axis columns appear for the axes in `axes`
/// (c and T always).
std::string cells_csv(const ExperimentResult& result, const SweepAxes& axes);

/// Writes aggregate.json, cells.csv and per-replication rep CSV/JSON files under out_dir.
void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      bool per_replication);

}  // namespace tdforge
