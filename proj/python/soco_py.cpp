#include "soco/algorithms.hpp"
#include "soco/analysis.hpp"
#include "soco/harness.hpp"
#include "soco/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace soco;

namespace {

nlohmann::json config_from_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("$", std::string("malformed JSON: ") + e.what());
  }
}

py::dict cost_dict(const CostBreakdown& c) {
  py::dict d;
  d["tracking"] = c.tracking;
  d["switching"] = c.switching;
  d["total"] = c.total();
  return d;
}

}  // namespace

PYBIND11_MODULE(_soco, m) {
  m.doc() = "Online tracking with switching costs under correlated prediction noise";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<SingularGramError>(m, "SingularGramError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<MaxIterationsError>(m, "MaxIterationsError", PyExc_RuntimeError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::class_<ProblemSpec>(m, "ProblemSpec")
      .def(py::init<Matrix, double, int>(), py::arg("K"), py::arg("beta"), py::arg("T"))
      .def_property_readonly("K", &ProblemSpec::K)
      .def_property_readonly("beta", &ProblemSpec::beta)
      .def_property_readonly("T", &ProblemSpec::horizon)
      .def_property_readonly("k_pinv", [](const ProblemSpec& s) { return s.ops().k_pinv; })
      .def_property_readonly("proj_range", [](const ProblemSpec& s) { return s.ops().proj_range; });

  m.def("eval_cost",
        [](const ProblemSpec& spec, const Signal& y, const Signal& x) {
          return cost_dict(eval_cost(spec, y, x));
        },
        py::arg("spec"), py::arg("y"), py::arg("x"));

  py::class_<ImpulseResponse>(m, "ImpulseResponse")
      .def(py::init<std::vector<Matrix>>(), py::arg("taps"))
      .def_static("scalar", &ImpulseResponse::scalar, py::arg("taps"))
      .def_static("white", &ImpulseResponse::white, py::arg("dim"))
      .def_property_readonly("taps", &ImpulseResponse::taps)
      .def_property_readonly("length", &ImpulseResponse::length);

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def(py::init([](Matrix cov, const std::string& family, std::optional<double> eps) {
             return NoiseSpec(std::move(cov), noise_family_from_string(family), eps);
           }),
           py::arg("covariance"), py::arg("family") = "gaussian", py::arg("epsilon") = py::none())
      .def_property_readonly("covariance", &NoiseSpec::covariance)
      .def_property_readonly("epsilon", &NoiseSpec::epsilon);

  py::class_<Realization>(m, "Realization")
      .def_readonly("y_hat", &Realization::y_hat)
      .def_readonly("innovations", &Realization::innovations)
      .def_readonly("y", &Realization::y)
      .def_readonly("seed", &Realization::seed);

  m.def("realize", &realize, py::arg("f"), py::arg("noise"), py::arg("y_hat"), py::arg("seed"));
  m.def("realize_with_innovations", &realize_with_innovations, py::arg("f"), py::arg("y_hat"),
        py::arg("innovations"), py::arg("seed") = 0);
  m.def("predict_at", &predict_at, py::arg("r"), py::arg("f"), py::arg("tau"));
  m.def("fw_norm_sq",
        py::overload_cast<const ImpulseResponse&, const NoiseSpec&, int>(&fw_norm_sq),
        py::arg("f"), py::arg("noise"), py::arg("w"));

  py::class_<SolveResult>(m, "SolveResult")
      .def_readonly("actions", &SolveResult::actions)
      .def_readonly("objective", &SolveResult::objective)
      .def_readonly("duals", &SolveResult::duals)
      .def_readonly("iterations", &SolveResult::iterations)
      .def_readonly("polished", &SolveResult::polished);

  m.def("solve_window",
        [](const ProblemSpec& spec, const Signal& targets, std::optional<Vector> x_prev, double tol) {
          SolveOptions opts;
          opts.tol = tol;
          return solve_window(spec, targets, x_prev.value_or(spec.x0()), opts);
        },
        py::arg("spec"), py::arg("targets"), py::arg("x_prev") = py::none(), py::arg("tol") = 1e-8);
  m.def("solve_opt", [](const ProblemSpec& spec, const Signal& y) { return solve_opt(spec, y); },
        py::arg("spec"), py::arg("y"));
  m.def("opt_dual_cost",
        [](const ProblemSpec& spec, const Signal& y, const Signal& duals) {
          return opt_dual_cost(spec, y, duals);
        },
        py::arg("spec"), py::arg("y"), py::arg("duals"));
  m.def("static_optimum",
        [](const ProblemSpec& spec, const Signal& y) {
          const StaticResult s = static_optimum(spec, y);
          return py::make_tuple(s.x, s.cost, s.closed_form);
        },
        py::arg("spec"), py::arg("y"));

  py::class_<AlgorithmRun>(m, "AlgorithmRun")
      .def_property_readonly("name", &AlgorithmRun::name)
      .def_readonly("w", &AlgorithmRun::w)
      .def_readonly("trajectory", &AlgorithmRun::trajectory)
      .def_property_readonly("cost", [](const AlgorithmRun& r) { return cost_dict(r.cost); });

  m.def("run_fhc", [](const ProblemSpec& s, const Realization& r, const ImpulseResponse& f, int k,
                      int w) { return run_fhc(s, r, f, k, w); },
        py::arg("spec"), py::arg("r"), py::arg("f"), py::arg("k"), py::arg("w"));
  m.def("run_afhc", [](const ProblemSpec& s, const Realization& r, const ImpulseResponse& f,
                       int w) { return run_afhc(s, r, f, w); },
        py::arg("spec"), py::arg("r"), py::arg("f"), py::arg("w"));
  m.def("run_rhc", [](const ProblemSpec& s, const Realization& r, const ImpulseResponse& f,
                      int w) { return run_rhc(s, r, f, w); },
        py::arg("spec"), py::arg("r"), py::arg("f"), py::arg("w"));
  m.def("run_open", [](const ProblemSpec& s, const Realization& r) { return run_open(s, r); },
        py::arg("spec"), py::arg("r"));
  m.def("run_opt", [](const ProblemSpec& s, const Realization& r) { return run_opt(s, r); },
        py::arg("spec"), py::arg("r"));
  m.def("run_sta", &run_sta, py::arg("spec"), py::arg("r"));
  m.def("loss_split",
        [](const ProblemSpec& spec, const Realization& r, const ImpulseResponse& f, int w) {
          std::vector<AlgorithmRun> runs;
          const AlgorithmRun afhc = run_afhc(spec, r, f, w, {}, &runs);
          const LossSplit s = decompose_g1_g2(afhc, runs, run_opt(spec, r), r, f, spec, w);
          return py::make_tuple(s.g1, s.g2);
        },
        py::arg("spec"), py::arg("r"), py::arg("f"), py::arg("w"));

  m.def("bound_report",
        [](const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise, int w) {
          return py::module_::import("json").attr("loads")(
              dump_json(bound_report_json(bound_report(spec, f, noise, w))));
        },
        py::arg("spec"), py::arg("f"), py::arg("noise"), py::arg("w"));
  m.def("bound_V",
        [](const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise, int w,
           bool l2) { return bound_V(spec, f, noise, w, l2 ? OnesNorm::l2 : OnesNorm::l1); },
        py::arg("spec"), py::arg("f"), py::arg("noise"), py::arg("w"), py::arg("l2") = false);
  m.def("optimal_window",
        [](const ProblemSpec& spec, const ImpulseResponse& f, const NoiseSpec& noise, int w_max) {
          return optimal_window(spec, f, noise, w_max);
        },
        py::arg("spec"), py::arg("f"), py::arg("noise"), py::arg("w_max"));
  m.def("build_combined_A", &build_combined_A, py::arg("f"), py::arg("w"), py::arg("T"));

  m.def("run_experiment",
        [](const std::string& config_json, int threads) {
          const ExperimentConfig c = parse_config(config_from_text(config_json));
          ExperimentResult res;
          {
            py::gil_scoped_release release;
            res = run_experiment(c, threads);
          }
          return py::make_tuple(samples_csv(res.rows), dump_json(summary_json(res)));
        },
        py::arg("config_json"), py::arg("threads") = 0,
        "Runs a JSON experiment config; returns (samples CSV text, summary JSON text).");
}
