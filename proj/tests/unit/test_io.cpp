#include "tdforge/experiment.hpp"

#include <doctest.h>

#include <filesystem>

using namespace tdforge;

TEST_CASE("generate -> serialize -> load -> serialize is byte-identical") {
  for (const auto& spec : builtin_corpus()) {
    const Instance inst = generate_instance(spec);
    const std::string first = instance_to_json(inst);
    const Instance back = instance_from_json(first);
    CHECK(instance_to_json(back) == first);
    CHECK(back.chain.p_mu == inst.chain.p_mu);
    CHECK(back.features.phi == inst.features.phi);
  }
}

TEST_CASE("two-state generator example") {
  GeneratorSpec spec;
  spec.chain = ChainScheme::TwoState;
  spec.a = 0.1;
  spec.b = 0.1;
  spec.dim = 1;
  const Instance inst = generate_instance(spec);
  Matrix expected(2, 2);
  expected << 0.9, 0.1, 0.1, 0.9;
  CHECK(inst.chain.p_mu == expected);
  CHECK(inst.chain.stationary()(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(instance_to_json(inst).find("\"pi\"") != std::string::npos);
}

TEST_CASE("adversarial generator follows the block layout") {
  GeneratorSpec spec;
  spec.n_states = 6;
  spec.dim = 3;
  spec.features = FeatureScheme::Adversarial;
  spec.eps = 1e-3;
  const Instance inst = generate_instance(spec);
  CHECK(inst.features.phi == adversarial_features(6, 3, 1e-3, 1.0).phi);
}

TEST_CASE("generator validation") {
  GeneratorSpec spec;
  spec.dim = 20;
  CHECK_THROWS_AS(generate_instance(spec), InvalidInput);
  spec = GeneratorSpec{};
  spec.gamma = 1.0;
  CHECK_THROWS_AS(generate_instance(spec), InvalidInput);
  CHECK_THROWS_AS(parse_chain_scheme("ring"), InvalidInput);
  CHECK_THROWS_AS(parse_feature_scheme("fourier"), InvalidInput);
  CHECK(parse_chain_scheme(to_string(ChainScheme::PermutationMix)) == ChainScheme::PermutationMix);
  CHECK(parse_feature_scheme(to_string(FeatureScheme::Tabular)) == FeatureScheme::Tabular);
}

TEST_CASE("loader rejects corrupted instances") {
  const Instance inst = generate_instance(standard_spec());
  std::string text = instance_to_json(inst);
  auto doc_with = [&](const std::string& from, const std::string& to) {
    std::string copy = text;
    const auto pos = copy.find(from);
    REQUIRE(pos != std::string::npos);
    copy.replace(pos, from.size(), to);
    return copy;
  };
  CHECK_THROWS_WITH_AS(instance_from_json(doc_with("\"phi_inf\": ", "\"phi_inf\": 1000.0, \"x\": ")),
                       doctest::Contains("phi_inf"), InvalidInput);
  CHECK_THROWS_AS(instance_from_json("{"), InvalidInput);
  CHECK_THROWS_AS(instance_from_json("{\"n_states\": 2}"), InvalidInput);

  Instance scaled = inst;
  scaled.mdp.transition[0].row(0) *= 0.9;
  CHECK_THROWS_WITH_AS(instance_from_json(instance_to_json(scaled)),
                       doctest::Contains("row-stochastic"), InvalidInput);
}

TEST_CASE("format_double round-trips and leaves NaN empty") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(std::nan("")).empty());
}

TEST_CASE("run record CSV and summary JSON") {
  const Instance inst = generate_instance(standard_spec());
  const auto config = make_td_config(100.0, 64, 3, std::nullopt, 16);
  const auto record = run_td0(inst.chain, inst.features, nullptr, config);
  const std::string csv = run_record_csv(record);
  CHECK(csv.rfind("t,eta,theta_norm,dist_to_star,f_value,grad_norm,ell\n", 0) == 0);
  CHECK(csv.find("\n0,") != std::string::npos);
  CHECK(csv.find(",,,") != std::string::npos);
  const std::string summary = run_summary_json(record);
  CHECK(summary.find("\"f_bar\": null") != std::string::npos);
  CHECK(summary.find("\"seed\": 3") != std::string::npos);
}

TEST_CASE("lemma report CSV") {
  const auto csv = lemma_reports_csv({make_report("a", "u=1;t=2", 1.0, 2.0)});
  CHECK(csv == "lemma_id,params,lhs,bound,slack,pass\na,u=1;t=2,1,2,1,true\n");
}

TEST_CASE("oracle summary JSON keys") {
  const Instance inst = generate_instance(standard_spec());
  const auto text = oracle_summary_json(solve_fixed_point(inst.chain, inst.features));
  CHECK(text.find("\"theta_star\"") != std::string::npos);
  CHECK(text.find("\"f_min_eig\"") != std::string::npos);
  CHECK(text.find("\"cond_A\"") != std::string::npos);
}

TEST_CASE("experiment config parsing") {
  const auto config = parse_experiment_config(R"({
    "generator": {"n": 6, "d": 2, "chain": "two-state", "a": 0.2, "b": 0.3, "features": "random-gaussian"},
    "c": 120, "T": [256, 512], "reps": 4, "seed": 9, "stride": 8,
    "axes": {"c": [67, 100], "gamma": 0.5}
  })");
  CHECK(config.generator.n_states == 2);
  CHECK(config.generator.chain == ChainScheme::TwoState);
  CHECK(config.t_grid == std::vector<std::size_t>{256, 512});
  CHECK(config.axes.c.size() == 2);
  CHECK(config.axes.gamma == std::vector<double>{0.5});
  CHECK_THROWS_AS(parse_experiment_config(R"({"bogus": 1})"), InvalidInput);
  CHECK_THROWS_AS(parse_experiment_config(R"({"reps": 0})"), InvalidInput);
  CHECK_THROWS_AS(parse_experiment_config(R"({"c": "big"})"), InvalidInput);
}

TEST_CASE("run_cell aggregates and is independent of the worker count") {
  const PreparedInstance prepared = prepare(generate_instance(standard_spec()));
  const auto one = run_cell(prepared, 100.0, 256, 8, 5, 0, 0, std::nullopt, 1);
  const auto four = run_cell(prepared, 100.0, 256, 8, 5, 0, 0, std::nullopt, 4);
  CHECK(one.f_bar_mean == four.f_bar_mean);
  CHECK(one.max_mean_theta_sq == four.max_mean_theta_sq);
  CHECK(one.omega_bound > 0.0);
  CHECK(one.ratio == doctest::Approx(one.max_mean_theta_sq / one.omega_bound));
  const auto invalid = run_cell(prepared, 66.0, 256, 8, 5, 0, 0, std::nullopt, 1);
  CHECK(invalid.status == "invalid_c");
}

TEST_CASE("zero-reward run aggregates to f_bar = 0") {
  GeneratorSpec spec = standard_spec();
  spec.reward_scale = 0.0;
  ExperimentConfig config;
  config.generator = spec;
  config.t_grid = {128};
  config.replications = 3;
  const auto result = run_experiment(config, 2);
  CHECK(result.cells.front().f_bar_mean == 0.0);
}

TEST_CASE("single-cell sweep equals the run output") {
  ExperimentConfig config;
  config.t_grid = {256};
  config.replications = 4;
  config.seed = 11;
  const auto run = run_experiment(config, 1);
  const auto sweep = run_sweep(config, 2);
  CHECK(aggregate_json(run, config) == aggregate_json(sweep, config));
}

TEST_CASE("sweep flags invalid c and orders omega") {
  ExperimentConfig config;
  config.t_grid = {128};
  config.replications = 2;
  config.axes.c = {50, 67, 100, 1000};
  const auto result = run_sweep(config, 1);
  REQUIRE(result.cells.size() == 4);
  CHECK(result.cells[0].status == "invalid_c");
  CHECK(result.cells[1].omega_bound > result.cells[2].omega_bound);
  CHECK(result.cells[2].omega_bound > result.cells[3].omega_bound);
  const auto csv = cells_csv(result, config.axes);
  CHECK(csv.find("invalid_c") != std::string::npos);

  ExperimentConfig bad = config;
  bad.axes.eps = {0.1};
  CHECK_THROWS_AS(run_sweep(bad, 1), InvalidInput);
}

TEST_CASE("eps sweep lambda_min shrinks like eps squared") {
  ExperimentConfig config;
  config.generator.n_states = 6;
  config.generator.dim = 3;
  config.generator.features = FeatureScheme::Adversarial;
  config.t_grid = {64};
  config.replications = 1;
  config.axes.eps = {1e-1, 1e-2, 1e-3};
  const auto result = run_sweep(config, 1);
  REQUIRE(result.cells.size() == 3);
  for (std::size_t i = 0; i + 1 < 3; ++i) {
    const double ratio = result.cells[i + 1].lambda_min / result.cells[i].lambda_min;
    CHECK(ratio == doctest::Approx(0.01).epsilon(0.5));
  }
}

TEST_CASE("write_experiment lays out files") {
  ExperimentConfig config;
  config.t_grid = {64};
  config.replications = 2;
  config.out_dir = (std::filesystem::temp_directory_path() / "tdforge_io_test").string();
  std::filesystem::remove_all(config.out_dir);
  write_experiment(run_experiment(config, 1), config, true);
  CHECK(std::filesystem::exists(std::filesystem::path(config.out_dir) / "aggregate.json"));
  CHECK(std::filesystem::exists(std::filesystem::path(config.out_dir) / "cell_0" / "rep_1.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(config.out_dir) / "cell_0" / "rep_1.json"));
  std::filesystem::remove_all(config.out_dir);
}

TEST_CASE("parallel_for rethrows worker failures") {
  CHECK_THROWS_AS(parallel_for(8, 3,
                               [](std::size_t i) {
                                 if (i == 5) throw InvalidInput("boom");
                               }),
                  InvalidInput);
}
