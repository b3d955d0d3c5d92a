#include "tdforge/experiment.hpp"
#include "tdforge/verify.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tdforge;

namespace {

GeneratorSpec spec_from_kwargs(const py::kwargs& kwargs) {
  GeneratorSpec spec;
  for (const auto& [key_obj, value] : kwargs) {
    const auto key = key_obj.cast<std::string>();
    if (key == "name") spec.name = value.cast<std::string>();
    else if (key == "n_states") spec.n_states = value.cast<std::size_t>();
    else if (key == "dim") spec.dim = value.cast<std::size_t>();
    else if (key == "n_actions") spec.n_actions = value.cast<std::size_t>();
    else if (key == "gamma") spec.gamma = value.cast<double>();
    else if (key == "chain") spec.chain = parse_chain_scheme(value.cast<std::string>());
    else if (key == "concentration") spec.concentration = value.cast<double>();
    else if (key == "a") spec.a = value.cast<double>();
    else if (key == "b") spec.b = value.cast<double>();
    else if (key == "lam") spec.lambda = value.cast<double>();
    else if (key == "features") spec.features = parse_feature_scheme(value.cast<std::string>());
    else if (key == "eps") spec.eps = value.cast<double>();
    else if (key == "phi_inf") spec.phi_inf = value.cast<double>();
    else if (key == "reward_scale") spec.reward_scale = value.cast<double>();
    else if (key == "seed") spec.seed = value.cast<std::uint64_t>();
    else throw InvalidInput("unknown generator option '" + key + "'");
  }
  return spec;
}

py::dict steps_dict(const RunRecord& record) {
  std::vector<std::size_t> t;
  std::vector<double> eta, theta_norm, dist, f, grad, ell;
  for (const auto& s : record.steps) {
    t.push_back(s.t);
    eta.push_back(s.eta);
    theta_norm.push_back(s.theta_norm);
    dist.push_back(s.dist_to_star);
    f.push_back(s.f_value);
    grad.push_back(s.grad_norm);
    ell.push_back(s.ell);
  }
  py::dict out;
  out["t"] = t;
  out["eta"] = eta;
  out["theta_norm"] = theta_norm;
  out["dist_to_star"] = dist;
  out["f_value"] = f;
  out["grad_norm"] = grad;
  out["ell"] = ell;
  return out;
}

}  // namespace

PYBIND11_MODULE(_tdforge, m) {
  m.doc() = "Projection-free TD(0) simulator with exact oracles";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError);

  m.attr("MIN_ALGORITHM_CONSTANT") = kMinAlgorithmConstant;

  py::class_<MixingFit>(m, "MixingFit")
      .def_readonly("C", &MixingFit::c_const)
      .def_readonly("alpha", &MixingFit::alpha)
      .def_readonly("exact", &MixingFit::exact_mixing)
      .def_readonly("max_residual", &MixingFit::max_residual);

  py::class_<Instance>(m, "Instance")
      .def_readonly("name", &Instance::name)
      .def_property_readonly("P", [](const Instance& i) { return i.chain.p_mu; })
      .def_property_readonly("R", [](const Instance& i) { return i.chain.reward_mu; })
      .def_property_readonly("pi", [](const Instance& i) { return i.chain.stationary(); })
      .def_property_readonly("phi", [](const Instance& i) { return i.features.phi; })
      .def_property_readonly("phi_inf", [](const Instance& i) { return i.features.phi_inf; })
      .def_property_readonly("r_inf", [](const Instance& i) { return i.chain.r_inf; })
      .def_property_readonly("gamma", [](const Instance& i) { return i.chain.gamma; })
      .def("to_json", [](const Instance& i) { return instance_to_json(i); })
      .def("mixing", [](const Instance& i, std::size_t horizon) {
             return estimate_mixing(i.chain, horizon);
           }, py::arg("horizon") = 200);

  m.def("generate", [](const py::kwargs& kwargs) { return generate_instance(spec_from_kwargs(kwargs)); },
        "Generate an instance; keyword names mirror the generator options (lam for lambda).");
  m.def("standard_instance", [] { return generate_instance(standard_spec()); });
  m.def("corpus", [] {
    std::vector<Instance> out;
    for (const auto& spec : builtin_corpus()) out.push_back(generate_instance(spec));
    return out;
  });
  m.def("load_instance", &load_instance, py::arg("path"));
  m.def("instance_from_json", &instance_from_json, py::arg("text"));
  m.def("save_instance", &save_instance, py::arg("instance"), py::arg("path"));

  py::class_<TdOracle>(m, "TdOracle")
      .def_readonly("A", &TdOracle::a_matrix)
      .def_readonly("b", &TdOracle::b_vec)
      .def_readonly("theta_star", &TdOracle::theta_star)
      .def_readonly("hessian", &TdOracle::hessian)
      .def_readonly("cond_A", &TdOracle::cond_a)
      .def_property_readonly("f_min_eig", [](const TdOracle& o) { return hessian_min_eigenvalue(o); });

  m.def("solve", [](const Instance& i) { return solve_fixed_point(i.chain, i.features); },
        py::arg("instance"));
  m.def("stationary_gradient", &stationary_gradient, py::arg("oracle"), py::arg("theta"));
  m.def("potential",
        [](const TdOracle& o, const Instance& i, const Vector& theta) {
          return potential(o, i.chain, i.features, theta);
        },
        py::arg("oracle"), py::arg("instance"), py::arg("theta"));

  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("theta_bar", &RunRecord::theta_bar)
      .def_readonly("theta_bar_unweighted", &RunRecord::theta_bar_unweighted)
      .def_readonly("theta_final", &RunRecord::theta_final)
      .def_readonly("sum_eta", &RunRecord::sum_eta)
      .def_readonly("f_bar", &RunRecord::f_bar)
      .def_property_readonly("steps", &steps_dict)
      .def("to_csv", [](const RunRecord& r) { return run_record_csv(r); });

  m.def("run_td0",
        [](const Instance& i, double c, std::size_t total_steps, std::uint64_t seed,
           std::optional<StateIndex> initial_state, std::size_t stride, bool with_oracle) {
          const auto config = make_td_config(c, total_steps, seed, initial_state, stride);
          if (!with_oracle) return run_td0(i.chain, i.features, nullptr, config);
          const TdOracle oracle = solve_fixed_point(i.chain, i.features);
          return run_td0(i.chain, i.features, &oracle, config);
        },
        py::arg("instance"), py::arg("c") = 100.0, py::arg("T") = 1024, py::arg("seed") = 0,
        py::arg("initial_state") = py::none(), py::arg("stride") = 1, py::arg("with_oracle") = true,
        py::call_guard<py::gil_scoped_release>());

  m.def("step_size",
        [](std::size_t t, double c, std::size_t total_steps, double phi_inf) {
          return step_size(t, make_td_config(c, total_steps, 0), phi_inf);
        },
        py::arg("t"), py::arg("c"), py::arg("T"), py::arg("phi_inf"));
  m.def("omega_c", &omega_c, py::arg("c"));

  py::class_<MinTCondition>(m, "MinTCondition")
      .def_readonly("holds", &MinTCondition::holds)
      .def_readonly("margin", &MinTCondition::margin)
      .def_readonly("u", &MinTCondition::u);
  m.def("min_T_condition", &min_T_condition, py::arg("C"), py::arg("alpha"), py::arg("T"));
  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("cell"), py::arg("rep"));

  py::class_<LemmaReport>(m, "LemmaReport")
      .def_readonly("lemma_id", &LemmaReport::lemma_id)
      .def_readonly("params", &LemmaReport::params)
      .def_readonly("lhs", &LemmaReport::lhs)
      .def_readonly("bound", &LemmaReport::bound)
      .def_readonly("slack", &LemmaReport::slack)
      .def_readonly("passed", &LemmaReport::pass)
      .def("__repr__", [](const LemmaReport& r) {
        return "<LemmaReport " + r.lemma_id + " lhs=" + format_double(r.lhs) +
               " bound=" + format_double(r.bound) + (r.pass ? " pass>" : " FAIL>");
      });
  m.def("lemma_sum_a1", &lemma_sum_a1, py::arg("u"), py::arg("t"));
  m.def("lemma_sum_a2", &lemma_sum_a2, py::arg("u"), py::arg("t"));
  m.def("lemma_sum_a3", &lemma_sum_a3, py::arg("t"));

  m.def("run_experiment",
        [](const std::string& config_json, std::size_t threads) {
          const ExperimentConfig config = parse_experiment_config(config_json);
          const std::size_t workers = threads == 0 ? worker_count() : threads;
          const auto result = config.axes.empty() ? run_experiment(config, workers)
                                                  : run_sweep(config, workers);
          if (!config.out_dir.empty()) write_experiment(result, config, true);
          return aggregate_json(result, config);
        },
        py::arg("config_json"), py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>(),
        "Runs the configured experiment (a sweep when axes are given) and returns aggregate JSON.");

  m.def("verify",
        [](const std::vector<Instance>& instances, const std::string& level, std::uint64_t seed) {
          const auto result = run_verify(instances, parse_verify_level(level), seed, worker_count());
          return py::make_tuple(result.all_pass(), result.all_reports());
        },
        py::arg("instances"), py::arg("level") = "fast", py::arg("seed") = 0);
}
