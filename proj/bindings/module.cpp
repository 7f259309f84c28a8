#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "closedloop/curvature.hpp"
#include "closedloop/equilibrium.hpp"
#include "closedloop/flow1.hpp"
#include "closedloop/flow2.hpp"
#include "closedloop/numerics.hpp"
#include "closedloop/primaldual.hpp"
#include "closedloop/scenario.hpp"

namespace py = pybind11;
using namespace closedloop;

namespace {

RandomWalkSpace space_from_parts(std::vector<std::vector<double>> metric,
                                 std::vector<std::vector<double>> kernel) {
  RandomWalkSpace space;
  space.metric = std::move(metric);
  space.kernel = std::move(kernel);
  space.validate();
  return space;
}

DecisionMap make_map(std::function<Distribution(const Vector&)> kernel, double tau) {
  return DecisionMap{std::move(kernel), tau};
}

}  // namespace

PYBIND11_MODULE(_closedloop, m) {
  m.doc() = "Desk-scale dynamics for stochastic monotone inclusions with "
            "decision-dependent distributions";

  py::register_exception<Error>(m, "ClosedLoopError");

  // -- distributions ---------------------------------------------------------
  py::class_<Distribution>(m, "Distribution")
      .def_static("finite",
                  [](const std::vector<std::pair<Vector, double>>& atoms) {
                    std::vector<Atom> out;
                    out.reserve(atoms.size());
                    for (const auto& [pt, wt] : atoms) out.push_back({pt, wt});
                    return Distribution::finite(std::move(out));
                  },
                  py::arg("atoms"), "finite support from [(point, weight), ...]")
      .def_static("gauss1d", &Distribution::gauss1d, py::arg("mean"), py::arg("std"))
      .def_static("dirac", &Distribution::dirac, py::arg("point"))
      .def("to_json", &Distribution::to_json)
      .def_static("from_json", &Distribution::from_json, py::arg("text"))
      .def_property_readonly("dim", &Distribution::dim)
      .def("__repr__", [](const Distribution& d) { return "Distribution(" + d.to_json() + ")"; });

  m.def("w1", py::overload_cast<const Distribution&, const Distribution&>(&w1),
        py::arg("p"), py::arg("q"), "exact W1 distance under the Euclidean ground metric");
  m.def("w1_with_metric",
        py::overload_cast<const Distribution&, const Distribution&, const MetricFn&>(&w1),
        py::arg("p"), py::arg("q"), py::arg("metric"));
  m.def("expect_vector",
        [](const Distribution& p, const std::function<Vector(const Vector&)>& h, int quad_points) {
          return expect_vector(p, h, quad_points);
        },
        py::arg("p"), py::arg("h"), py::arg("quad_points") = 32);

  py::class_<DecisionMap>(m, "DecisionMap")
      .def(py::init(&make_map), py::arg("kernel"), py::arg("tau"))
      .def_readonly("tau", &DecisionMap::tau)
      .def("__call__", [](const DecisionMap& map, const Vector& x) { return map.kernel(x); });
  m.def("estimate_tau",
        [](const DecisionMap& map, const std::vector<std::pair<Vector, Vector>>& probes) {
          return estimate_tau(map, probes);
        },
        py::arg("map"), py::arg("probes"));

  // -- numerics ----------------------------------------------------------------
  m.def("rk4_step", &rk4_step, py::arg("state"), py::arg("field"), py::arg("h"));
  m.def("adaptive_quad",
        [](const std::function<double(double)>& f, double a, double b, double tol) {
          return adaptive_quad(f, a, b, tol);
        },
        py::arg("integrand"), py::arg("a"), py::arg("b"), py::arg("tol") = 1e-10);
  m.def("invert_monotone", &invert_monotone, py::arg("f"), py::arg("target"), py::arg("lo"),
        py::arg("hi"), py::arg("tol") = 1e-12);
  m.def("fit_exponential_rate",
        [](const std::vector<double>& times, const std::vector<double>& values, double ta, double tb) {
          const ExpFit fit = fit_exponential_rate(TimeSeries(times, values), ta, tb);
          return py::make_tuple(fit.rate, fit.intercept, fit.r2);
        },
        py::arg("times"), py::arg("values"), py::arg("t_a"), py::arg("t_b"),
        "returns (rate, intercept, r2) of log(value) = intercept - rate*t");

  m.def("theta",
        [](const std::function<double(double)>& phi, double a_ref, double beta_tau, double z) {
          return theta(UniformModulus{phi, a_ref}, beta_tau, z);
        },
        py::arg("phi"), py::arg("a_ref"), py::arg("beta_tau"), py::arg("z"));
  m.def("theta_inv",
        [](const std::function<double(double)>& phi, double a_ref, double beta_tau, double s) {
          return theta_inv(UniformModulus{phi, a_ref}, beta_tau, s);
        },
        py::arg("phi"), py::arg("a_ref"), py::arg("beta_tau"), py::arg("s"));

  m.def("check_damping_condition",
        [](double mu, double L, double beta, double tau, double omega) {
          const DampingMargins d = check_damping_condition(mu, L, beta, tau, omega);
          py::dict out;
          out["ok"] = d.ok;
          out["omega_bound"] = d.omega_bound;
          out["omega_slack"] = d.omega_slack;
          out["condition_value"] = d.condition_value;
          out["condition_slack"] = d.condition_slack;
          out["rho"] = d.rho;
          return out;
        },
        py::arg("mu"), py::arg("L"), py::arg("beta"), py::arg("tau"), py::arg("omega"));

  // -- curvature ---------------------------------------------------------------
  py::class_<RandomWalkSpace>(m, "RandomWalkSpace")
      .def(py::init(&space_from_parts), py::arg("metric"), py::arg("kernel"))
      .def_static("from_json", &RandomWalkSpace::from_json, py::arg("text"))
      .def("to_json", &RandomWalkSpace::to_json)
      .def_property_readonly("size", &RandomWalkSpace::size);
  m.def("ricci_kappa", &ricci_kappa, py::arg("space"), py::arg("x"), py::arg("y"));
  m.def("ricci_global", &ricci_global, py::arg("space"));
  m.def("convolve", &convolve, py::arg("nu"), py::arg("space"));
  m.def("nstep", &nstep, py::arg("space"), py::arg("x"), py::arg("n"));
  m.def("w1_on_space", &w1_on_space, py::arg("space"), py::arg("nu1"), py::arg("nu2"));
  m.def("invariant_measure",
        [](const RandomWalkSpace& space, double tol) {
          const InvariantMeasureResult r = invariant_measure(space, tol);
          return py::make_tuple(r.upsilon, r.iterations);
        },
        py::arg("space"), py::arg("tol") = 1e-12);
  m.def("verify_contraction",
        [](const RandomWalkSpace& space, const Measure& nu1, const Measure& nu2) {
          const ContractionCheck c = verify_contraction(space, nu1, nu2);
          return py::make_tuple(c.lhs, c.rhs, c.ok);
        },
        py::arg("space"), py::arg("nu1"), py::arg("nu2"));
  m.def("tau_kappa_table",
        [](const RandomWalkSpace& space) {
          const TauKappaRecord r = tau_kappa_table(space);
          py::dict out;
          out["tau_hat"] = r.tau_hat;
          out["kappa"] = r.kappa;
          out["identity_ok"] = r.identity_ok;
          out["bounds_ok"] = r.bounds_ok;
          return out;
        },
        py::arg("space"));

  // -- scenario-level entry points ----------------------------------------------
  m.def("validate_config",
        [](const std::string& raw) { return serialize_config(validate_config(raw)); },
        py::arg("raw"), "validate a scenario config; returns its normal form as JSON text");
  m.def("run_scenario",
        [](const std::string& raw, const std::string& csv_path, const std::string& json_path) {
          const ScenarioResult r = run_scenario(validate_config(raw), csv_path, json_path);
          return py::make_tuple(r.exit_code, r.report.dump(2));
        },
        py::arg("config_json"), py::arg("csv_path") = std::string(),
        py::arg("json_path") = std::string(),
        "run a scenario from JSON text; returns (exit_code, report_json)");
  m.def("run_scenario_file",
        [](const std::string& path, const std::string& csv_path, const std::string& json_path) {
          const ScenarioResult r = run_scenario(validate_config_file(path), csv_path, json_path);
          return py::make_tuple(r.exit_code, r.report.dump(2));
        },
        py::arg("path"), py::arg("csv_path") = std::string(),
        py::arg("json_path") = std::string());

  m.def("solve_equilibrium",
        [](const std::string& instance_json, const Vector& x0, double tol) {
          const ClosedLoopProblem problem =
              build_problem(nlohmann::ordered_json::parse(instance_json));
          const EquilibriumReport r = repeated_minimization(problem, x0, tol);
          py::dict out;
          out["x_bar"] = r.x_bar;
          out["ratios"] = r.ratios;
          out["rho"] = r.rho_declared;
          out["residual"] = r.residual;
          out["iterations"] = r.outer_iterations;
          return out;
        },
        py::arg("instance_json"), py::arg("x0"), py::arg("tol") = 1e-10,
        "repeated minimization on a catalog instance (JSON text)");
  m.def("integrate_flow",
        [](const std::string& instance_json, const Vector& x0, double t0, double T, double h) {
          const ClosedLoopProblem problem =
              build_problem(nlohmann::ordered_json::parse(instance_json));
          const Trajectory traj = integrate_smi(problem, x0, t0, T, h);
          return py::make_tuple(traj.times, traj.states);
        },
        py::arg("instance_json"), py::arg("x0"), py::arg("t0"), py::arg("T"), py::arg("h"),
        "first-order closed-loop flow on a catalog instance; returns (times, states)");
}
