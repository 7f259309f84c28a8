#include "closedloop/scenario.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "closedloop/errors.hpp"
#include "closedloop/flow1.hpp"
#include "closedloop/flow2.hpp"

namespace closedloop {

using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
  fail(ErrorCode::SchemaError, path + ": " + what);
}

double require_number(const ordered_json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) schema_fail(path + "." + key, "missing");
  if (!j.at(key).is_number()) schema_fail(path + "." + key, "must be a number");
  return j.at(key).get<double>();
}

double number_or(const ordered_json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

// ---- kernel catalog --------------------------------------------------------

struct KernelSpec {
  std::string type;  // dirac_affine | gauss_affine | constant
  double epsilon = 0.0;
  double theta0 = 0.0;
  double std_dev = 1.0;
  std::string constant_dist_json;

  double tau() const { return type == "constant" ? 0.0 : std::abs(epsilon); }
};

KernelSpec parse_kernel(const ordered_json& j, const std::string& path, std::size_t dim) {
  if (!j.is_object() || !j.contains("type")) schema_fail(path, "kernel needs a type");
  KernelSpec spec;
  spec.type = j.at("type").get<std::string>();
  if (spec.type == "dirac_affine") {
    spec.epsilon = require_number(j, path, "epsilon");
    spec.theta0 = require_number(j, path, "theta0");
  } else if (spec.type == "gauss_affine") {
    if (dim != 1) schema_fail(path, "gauss_affine kernels are 1D only");
    spec.epsilon = require_number(j, path, "epsilon");
    spec.theta0 = require_number(j, path, "theta0");
    spec.std_dev = number_or(j, "std", 1.0);
    if (!(spec.std_dev > 0.0)) schema_fail(path + ".std", "must be > 0");
  } else if (spec.type == "constant") {
    if (!j.contains("dist")) schema_fail(path + ".dist", "missing");
    spec.constant_dist_json = j.at("dist").dump();
  } else {
    schema_fail(path + ".type", "unknown kernel type \"" + spec.type + "\"");
  }
  return spec;
}

ordered_json kernel_to_json(const KernelSpec& spec) {
  ordered_json j;
  j["type"] = spec.type;
  if (spec.type == "constant") {
    j["dist"] = ordered_json::parse(spec.constant_dist_json);
  } else {
    j["epsilon"] = spec.epsilon;
    j["theta0"] = spec.theta0;
    if (spec.type == "gauss_affine") j["std"] = spec.std_dev;
  }
  return j;
}

DecisionMap make_kernel(const KernelSpec& spec, std::size_t dim) {
  DecisionMap map;
  map.tau = spec.tau();
  if (spec.type == "dirac_affine") {
    const double eps = spec.epsilon, theta0 = spec.theta0;
    map.kernel = [eps, theta0](const Vector& x) {
      Vector point(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) point[i] = eps * x[i] + theta0;
      return Distribution::dirac(point);
    };
  } else if (spec.type == "gauss_affine") {
    const double eps = spec.epsilon, theta0 = spec.theta0, sd = spec.std_dev;
    map.kernel = [eps, theta0, sd](const Vector& x) {
      return Distribution::gauss1d(eps * x[0] + theta0, sd);
    };
  } else {
    const Distribution dist = Distribution::from_json(spec.constant_dist_json);
    if (dist.dim() != dim) fail(ErrorCode::DimensionMismatch, "constant kernel dimension != dim");
    map.kernel = [dist](const Vector&) { return dist; };
  }
  return map;
}

// mean of ξ under m (for closed-form potentials)
Vector measure_mean(const Distribution& m, int quad_points) {
  return expect_vector(m, [](const Vector& xi) { return xi; }, quad_points);
}

}  // namespace

// ---- instance builders -----------------------------------------------------

ClosedLoopProblem build_problem(const ordered_json& instance, int quad_points) {
  const std::string family = instance.value("family", std::string("affine"));
  if (family != "affine") {
    fail(ErrorCode::SchemaError, "build_problem supports the \"affine\" family, got \"" + family + "\"");
  }
  const auto dim = static_cast<std::size_t>(instance.value("dim", 1));
  if (dim < 1) fail(ErrorCode::SchemaError, "instance.dim must be >= 1");
  const double mu_field = require_number(instance, "instance", "mu");
  if (!(mu_field > 0.0)) fail(ErrorCode::ConstraintError, "instance.mu must be > 0");
  const double shift = number_or(instance, "shift", 0.0);
  const std::string op_a = instance.value("operator_a", std::string("zero"));
  if (!instance.contains("kernel")) fail(ErrorCode::SchemaError, "instance.kernel: missing");
  const KernelSpec kspec = parse_kernel(instance.at("kernel"), "instance.kernel", dim);

  ClosedLoopProblem problem;
  problem.quad_points = quad_points;
  problem.map = make_kernel(kspec, dim);
  problem.b.beta = 1.0;
  problem.b.lipschitz_l = mu_field;
  problem.b.eval = [mu_field, shift](const Vector& x, const Vector& xi) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = mu_field * x[i] - xi[i] + shift;
    return out;
  };

  double mu_of_a = 0.0;
  std::function<double(const Vector&)> g_value;
  if (op_a == "zero") {
    problem.a = MonotoneOracle::zero();
    g_value = [](const Vector&) { return 0.0; };
  } else if (op_a == "identity") {
    problem.a = MonotoneOracle::identity();
    mu_of_a = 1.0;
    g_value = [](const Vector& x) { return 0.5 * dot(x, x); };
  } else if (op_a == "nonneg_cone") {
    problem.a = MonotoneOracle::nonneg_cone();
    g_value = [](const Vector&) { return 0.0; };  // indicator value on its domain
  } else {
    fail(ErrorCode::SchemaError, "instance.operator_a: unknown operator \"" + op_a + "\"");
  }
  problem.mu = mu_field + mu_of_a;

  const int qp = quad_points;
  problem.potential = [mu_field, shift, g_value, qp](const Vector& x, const Distribution& m) {
    const Vector mean = measure_mean(m, qp);
    double value = g_value(x) + 0.5 * mu_field * dot(x, x);
    for (std::size_t i = 0; i < x.size(); ++i) value += (shift - mean[i]) * x[i];
    return value;
  };

  if (op_a != "nonneg_cone") {
    // Jacobian of x ↦ A(x) + B_{m_x}(x); constant for the affine family.
    const double diag = (kspec.type == "constant" ? mu_field : mu_field - kspec.epsilon) + mu_of_a;
    problem.field_jacobian = [diag, dim](const Vector&) {
      Matrix m(dim, dim);
      for (std::size_t i = 0; i < dim; ++i) m(i, i) = diag;
      return m;
    };
  }

  std::ostringstream id;
  id << family << "-" << op_a << "-" << kspec.type << "-mu" << mu_field;
  problem.id = id.str();
  return problem;
}

SaddleInstance build_saddle(const ordered_json& instance, int quad_points) {
  const std::string family = instance.value("family", std::string("saddle"));
  if (family != "saddle") {
    fail(ErrorCode::SchemaError, "build_saddle supports the \"saddle\" family, got \"" + family + "\"");
  }
  if (!instance.contains("primal") || !instance.contains("dual") || !instance.contains("coupling")) {
    fail(ErrorCode::SchemaError, "saddle instance needs primal, dual and coupling blocks");
  }
  const ordered_json& p = instance.at("primal");
  const ordered_json& d = instance.at("dual");
  const auto nx = static_cast<std::size_t>(p.value("dim", 1));
  const auto ny = static_cast<std::size_t>(d.value("dim", 1));

  SaddleInstance inst;
  inst.quad_points = quad_points;
  inst.mu_p = require_number(p, "instance.primal", "mu");
  inst.mu_d = require_number(d, "instance.dual", "mu");
  if (!(inst.mu_p > 0.0) || !(inst.mu_d > 0.0)) {
    fail(ErrorCode::ConstraintError, "block strong-convexity moduli must be > 0");
  }
  const KernelSpec kp = parse_kernel(p.at("kernel"), "instance.primal.kernel", nx);
  const KernelSpec kd = parse_kernel(d.at("kernel"), "instance.dual.kernel", ny);
  inst.map_p = make_kernel(kp, nx);
  inst.map_d = make_kernel(kd, ny);
  inst.tau = std::max(kp.tau(), kd.tau());

  const double mu_p = inst.mu_p, mu_d = inst.mu_d;
  inst.f_field.beta = 1.0;
  inst.f_field.lipschitz_l = mu_p;
  inst.f_field.eval = [mu_p](const Vector& x, const Vector& xi) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = mu_p * x[i] - xi[i];
    return out;
  };
  inst.r_field.beta = 1.0;
  inst.r_field.lipschitz_l = mu_d;
  inst.r_field.eval = [mu_d](const Vector& y, const Vector& zeta) {
    Vector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = mu_d * y[i] - zeta[i];
    return out;
  };
  inst.g = MonotoneOracle::zero();
  inst.h = MonotoneOracle::zero();

  const auto rows = instance.at("coupling").get<std::vector<std::vector<double>>>();
  if (rows.size() != ny) fail(ErrorCode::DimensionMismatch, "coupling rows != dual dim");
  inst.k = Matrix(ny, nx);
  for (std::size_t i = 0; i < ny; ++i) {
    if (rows[i].size() != nx) fail(ErrorCode::DimensionMismatch, "coupling cols != primal dim");
    for (std::size_t j = 0; j < nx; ++j) inst.k(i, j) = rows[i][j];
  }

  const int qp = quad_points;
  inst.f_value = [mu_p, qp](const Vector& x, const Distribution& m) {
    return 0.5 * mu_p * dot(x, x) - dot(measure_mean(m, qp), x);
  };
  inst.r_value = [mu_d, qp](const Vector& y, const Distribution& m) {
    return 0.5 * mu_d * dot(y, y) - dot(measure_mean(m, qp), y);
  };
  inst.g_value = [](const Vector&) { return 0.0; };
  inst.h_value = [](const Vector&) { return 0.0; };
  inst.id = "saddle-mu" + std::to_string(inst.mu_p) + "-" + std::to_string(inst.mu_d);
  return inst;
}

RandomWalkSpace build_space(const ordered_json& instance) {
  if (instance.contains("space")) return RandomWalkSpace::from_json(instance.at("space").dump());
  ordered_json body = instance;
  body.erase("family");
  return RandomWalkSpace::from_json(body.dump());
}

// ---- config validation -----------------------------------------------------

namespace {

const char* kKinds[] = {"equilibrium", "flow1", "flow2", "spds", "ispds", "curvature", "w1"};

std::vector<CheckRequest> default_checks(const std::string& kind) {
  if (kind == "equilibrium") return {{"contraction_ratios", 1.0, 0.05, true, 0}};
  if (kind == "flow1") return {{"speed_envelope", 1.0, 1e-6, true, 0}, {"w1_decay", 1.0, 1e-9, true, 0}};
  if (kind == "flow2") {
    return {{"damping_condition", 1.0, 0.0, true, 0},
            {"lyapunov_decay", 1.0, 1e-6, true, 0},
            {"gradient_integral", 1.0, 0.0, true, 0},
            {"w1_decay_2nd", 1.0, 1e-9, true, 0}};
  }
  if (kind == "spds") return {{"speed_envelope", 1.0, 1e-6, true, 0}};
  if (kind == "ispds") return {{"pd_decay", 1.0, 1e-6, true, 0}};
  if (kind == "curvature") {
    return {{"tau_kappa_identity", 1.0, 1e-12, true, 0}, {"contraction_samples", 1.0, 1e-9, true, 100}};
  }
  return {};
}

std::size_t instance_dim(const ScenarioConfig& config) {
  if (config.kind == "spds" || config.kind == "ispds") {
    return static_cast<std::size_t>(config.instance.at("primal").value("dim", 1)) +
           static_cast<std::size_t>(config.instance.at("dual").value("dim", 1));
  }
  return static_cast<std::size_t>(config.instance.value("dim", 1));
}

void fill_solver_defaults(ScenarioConfig& config) {
  SolverConfig& s = config.solver;
  if (!(s.t0 > 0.0)) fail(ErrorCode::ConstraintError, "solver.t0 must be > 0");
  if (!(s.tol > 0.0)) fail(ErrorCode::ConstraintError, "solver.tol must be > 0");

  const std::string& kind = config.kind;
  if (kind == "flow1" || kind == "flow2" || kind == "spds" || kind == "ispds") {
    double rate = 0.0;
    double h_cap = 0.0;
    if (kind == "flow1") {
      const ClosedLoopProblem problem = build_problem(config.instance);
      rate = problem.mu - problem.beta_tau();
      h_cap = 1.0 / (2.0 * (problem.b.lipschitz_l + problem.beta_tau()));
    } else if (kind == "flow2") {
      const ClosedLoopProblem problem = build_problem(config.instance);
      rate = std::sqrt(problem.mu) / 4.0;
      const double stiffness = 2.0 * std::sqrt(problem.mu) + problem.b.lipschitz_l +
                               problem.beta_tau() + (config.omega > 0.0 ? 2.0 / config.omega : 0.0);
      h_cap = 0.9 / stiffness;
    } else {
      const SaddleInstance inst = build_saddle(config.instance);
      if (kind == "spds") {
        rate = inst.tilde_mu() - inst.tau * inst.tilde_beta();
        h_cap = 1.0 / (2.0 * (inst.tilde_l() + inst.k_norm() + inst.tau * inst.tilde_beta()));
      } else {
        rate = std::sqrt(inst.tilde_mu()) / 4.0;
        const double sqrt_mu = std::sqrt(inst.tilde_mu());
        const double stiffness = 2.0 * sqrt_mu + inst.tilde_l() +
                                 inst.k_norm() * (1.0 + 1.0 / sqrt_mu) + inst.tau * inst.tilde_beta();
        h_cap = 0.9 / stiffness;
      }
    }
    if (!(rate > 0.0)) fail(ErrorCode::ConstraintError, "nonpositive theoretical rate; check constants");
    if (s.T == 0.0) s.T = s.t0 + 12.0 / rate;
    if (!(s.T > s.t0)) fail(ErrorCode::ConstraintError, "solver.T must exceed t0");
    if (s.h == 0.0) s.h = std::min(1e-3, 0.5 * h_cap);
    if (!(s.h > 0.0)) fail(ErrorCode::ConstraintError, "solver.h must be > 0");
  }

  const std::size_t dim = (kind == "curvature" || kind == "w1") ? 0 : instance_dim(config);
  if (s.x0.empty()) s.x0.assign(dim, 0.0);
  if (s.x0.size() != dim) fail(ErrorCode::ConstraintError, "solver.x0 has the wrong dimension");
  if (s.v0.empty()) s.v0.assign(dim, 0.0);
  if (s.v0.size() != dim) fail(ErrorCode::ConstraintError, "solver.v0 has the wrong dimension");
}

void compute_derived(ScenarioConfig& config) {
  ordered_json d;
  if (config.kind == "equilibrium" || config.kind == "flow1" || config.kind == "flow2") {
    const ClosedLoopProblem problem = build_problem(config.instance);
    d["beta"] = problem.b.beta;
    d["tau"] = problem.map.tau;
    d["lipschitz_L"] = problem.b.lipschitz_l;
    d["mu"] = problem.mu;
    d["rho"] = problem.rho();
    if (config.kind == "flow1") {
      d["rate"] = problem.mu - problem.beta_tau();
      d["h_max"] = 1.0 / (2.0 * (problem.b.lipschitz_l + problem.beta_tau()));
    }
    if (config.kind == "flow2") {
      const DampingMargins m = check_damping_condition(problem.mu, problem.b.lipschitz_l,
                                                       problem.b.beta, problem.map.tau, config.omega);
      d["rate"] = std::sqrt(problem.mu) / 4.0;
      d["damping_ok"] = m.ok;
      d["omega_bound"] = m.omega_bound;
      d["condition_value"] = m.condition_value;
    }
  } else if (config.kind == "spds" || config.kind == "ispds") {
    const SaddleInstance inst = build_saddle(config.instance);
    d["tilde_mu"] = inst.tilde_mu();
    d["tilde_beta"] = inst.tilde_beta();
    d["tilde_L"] = inst.tilde_l();
    d["tau"] = inst.tau;
    d["tilde_rho"] = inst.tilde_rho();
    d["K_norm"] = inst.k_norm();
    d["rate"] = config.kind == "spds" ? inst.tilde_mu() - inst.tau * inst.tilde_beta()
                                      : std::sqrt(inst.tilde_mu()) / 4.0;
  } else if (config.kind == "curvature") {
    build_space(config.instance);  // validation side effect
  } else if (config.kind == "w1") {
    if (!config.instance.contains("p") || !config.instance.contains("q")) {
      fail(ErrorCode::SchemaError, "instance.p / instance.q: missing distribution");
    }
  }
  config.derived = d;
}

}  // namespace

ScenarioConfig validate_config(const std::string& raw) {
  ordered_json j;
  try {
    j = ordered_json::parse(raw);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::SchemaError, "config must be a JSON object");
  ScenarioConfig config;
  if (!j.contains("kind")) schema_fail("kind", "missing");
  config.kind = j.at("kind").get<std::string>();
  if (std::find(std::begin(kKinds), std::end(kKinds), config.kind) == std::end(kKinds)) {
    schema_fail("kind", "unknown scenario kind \"" + config.kind + "\"");
  }
  config.name = j.value("name", std::string());
  if (!j.contains("instance")) schema_fail("instance", "missing");
  config.instance = j.at("instance");

  if (j.contains("solver")) {
    const ordered_json& s = j.at("solver");
    config.solver.h = number_or(s, "h", 0.0);
    config.solver.t0 = number_or(s, "t0", 0.1);
    config.solver.T = number_or(s, "T", 0.0);
    config.solver.tol = number_or(s, "tol", 1e-10);
    config.solver.seed = static_cast<std::uint64_t>(number_or(s, "seed", 1.0));
    config.solver.max_outer = static_cast<int>(number_or(s, "max_outer", 500.0));
    if (s.contains("x0")) config.solver.x0 = s.at("x0").get<Vector>();
    if (s.contains("v0")) config.solver.v0 = s.at("v0").get<Vector>();
  }
  if (j.contains("flow2")) {
    config.omega = number_or(j.at("flow2"), "omega", 0.0);
    if (config.omega < 0.0) fail(ErrorCode::ConstraintError, "flow2.omega must be >= 0");
  }
  if (j.contains("outputs")) {
    config.outputs.csv_path = j.at("outputs").value("csv_path", std::string());
    config.outputs.json_path = j.at("outputs").value("json_path", std::string());
  }
  if (j.contains("checks")) {
    for (const auto& c : j.at("checks")) {
      CheckRequest req;
      req.type = c.at("type").get<std::string>();
      req.rate_multiplier = number_or(c, "rate_multiplier", 1.0);
      req.tolerance = number_or(c, "tolerance", 1e-6);
      req.strict = c.value("strict", true);
      req.count = static_cast<int>(number_or(c, "count", 100.0));
      config.checks.push_back(req);
    }
  } else {
    config.checks = default_checks(config.kind);
  }

  // Normalize instance kernels so serialization is canonical.
  if (config.kind == "equilibrium" || config.kind == "flow1" || config.kind == "flow2") {
    const auto dim = static_cast<std::size_t>(config.instance.value("dim", 1));
    ordered_json inst;
    inst["family"] = config.instance.value("family", std::string("affine"));
    inst["dim"] = dim;
    inst["mu"] = require_number(config.instance, "instance", "mu");
    inst["shift"] = number_or(config.instance, "shift", 0.0);
    inst["operator_a"] = config.instance.value("operator_a", std::string("zero"));
    if (!config.instance.contains("kernel")) schema_fail("instance.kernel", "missing");
    inst["kernel"] = kernel_to_json(parse_kernel(config.instance.at("kernel"), "instance.kernel", dim));
    config.instance = inst;
  }

  fill_solver_defaults(config);
  compute_derived(config);
  return config;
}

ScenarioConfig validate_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::IoError, "cannot read config " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  ScenarioConfig config = validate_config(buf.str());
  if (config.name.empty()) config.name = path;
  return config;
}

std::string serialize_config(const ScenarioConfig& config) {
  ordered_json j;
  j["kind"] = config.kind;
  if (!config.name.empty()) j["name"] = config.name;
  j["instance"] = config.instance;
  ordered_json s;
  s["h"] = config.solver.h;
  s["t0"] = config.solver.t0;
  s["T"] = config.solver.T;
  s["tol"] = config.solver.tol;
  s["seed"] = config.solver.seed;
  s["max_outer"] = config.solver.max_outer;
  s["x0"] = config.solver.x0;
  s["v0"] = config.solver.v0;
  j["solver"] = s;
  if (config.kind == "flow2") j["flow2"] = ordered_json{{"omega", config.omega}};
  j["outputs"] = ordered_json{{"csv_path", config.outputs.csv_path},
                              {"json_path", config.outputs.json_path}};
  ordered_json checks = ordered_json::array();
  for (const CheckRequest& c : config.checks) {
    ordered_json cj;
    cj["type"] = c.type;
    cj["rate_multiplier"] = c.rate_multiplier;
    cj["tolerance"] = c.tolerance;
    cj["strict"] = c.strict;
    cj["count"] = c.count;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  j["derived"] = config.derived;
  return j.dump(2);
}

// ---- runner ----------------------------------------------------------------

namespace {

struct CheckOutcome {
  ordered_json record;
  bool violated = false;  // strict check failed
};

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

ordered_json bound_report_json(const BoundReport& b) {
  ordered_json j;
  j["satisfied"] = b.satisfied;
  j["max_violation"] = b.max_violation;
  j["fitted_rate"] = b.fitted_rate;
  return j;
}

void run_equilibrium_kind(const ScenarioConfig& config, ordered_json& report,
                          std::vector<CheckOutcome>& outcomes, Trajectory* traj_out) {
  const ClosedLoopProblem problem = build_problem(config.instance);
  const EquilibriumReport eq =
      repeated_minimization(problem, config.solver.x0, config.solver.tol, config.solver.max_outer);
  report["equilibrium"] = eq.x_bar;
  report["residual"] = eq.residual;
  report["outer_iterations"] = eq.outer_iterations;
  report["rho_declared"] = eq.rho_declared;
  report["ratios"] = eq.ratios;
  report["theoretical_rate"] = eq.rho_declared;

  for (const CheckRequest& c : config.checks) {
    if (c.type != "contraction_ratios") continue;
    CheckOutcome out;
    bool ok = true;
    double worst = 0.0;
    for (double r : eq.ratios) {
      worst = std::max(worst, r - eq.rho_declared);
      if (r > eq.rho_declared + c.tolerance) ok = false;
    }
    out.record = ordered_json{{"type", c.type}, {"satisfied", ok}, {"max_excess", worst}};
    out.violated = c.strict && !ok;
    outcomes.push_back(out);
  }

  if (traj_out) {
    Trajectory traj;
    for (std::size_t k = 0; k < eq.iterates.size(); ++k) {
      traj.times.push_back(static_cast<double>(k));
      traj.states.push_back(eq.iterates[k]);
    }
    traj.meta.solver = "picard";
    traj.meta.problem_id = problem.id;
    *traj_out = std::move(traj);
  }
}

void run_flow1_kind(const ScenarioConfig& config, ordered_json& report,
                    std::vector<CheckOutcome>& outcomes, Trajectory* traj_out) {
  const ClosedLoopProblem problem = build_problem(config.instance);
  const EquilibriumReport eq =
      repeated_minimization(problem, config.solver.x0, config.solver.tol, config.solver.max_outer);
  const Trajectory traj = integrate_smi(problem, config.solver.x0, config.solver.t0,
                                        config.solver.T, config.solver.h);
  report["equilibrium"] = eq.x_bar;
  report["residual"] = eq.residual;
  report["theoretical_rate"] = problem.mu - problem.beta_tau();

  bool fitted_recorded = false;
  for (const CheckRequest& c : config.checks) {
    CheckOutcome out;
    if (c.type == "speed_envelope") {
      const BoundReport b = check_speed_bounds(traj, eq.x_bar, problem, c.rate_multiplier, c.tolerance);
      out.record = bound_report_json(b);
      out.record["type"] = c.type;
      out.record["rate_multiplier"] = c.rate_multiplier;
      out.violated = c.strict && !b.satisfied;
      if (!fitted_recorded) {
        report["fitted_rate"] = b.fitted_rate;
        fitted_recorded = true;
      }
    } else if (c.type == "w1_decay") {
      const TimeSeries series = w1_decay_report(traj, problem, eq.x_bar);
      double max_w1 = 0.0;
      for (double v : series.values) max_w1 = std::max(max_w1, v);
      out.record = ordered_json{{"type", c.type}, {"satisfied", true}, {"max_w1", max_w1}};
    } else {
      continue;
    }
    outcomes.push_back(out);
  }
  report["bound_satisfied"] = true;
  for (const CheckOutcome& o : outcomes) {
    if (o.record.contains("satisfied") && !o.record.at("satisfied").get<bool>()) {
      report["bound_satisfied"] = false;
    }
    if (o.record.contains("max_violation")) {
      report["max_violation"] =
          std::max(report.value("max_violation", -1e300), o.record.at("max_violation").get<double>());
    }
  }
  if (traj_out) *traj_out = traj;
}

void run_flow2_kind(const ScenarioConfig& config, ordered_json& report,
                    std::vector<CheckOutcome>& outcomes, Trajectory* traj_out,
                    CsvOptions* csv_options) {
  const ClosedLoopProblem problem = build_problem(config.instance);
  const EquilibriumReport eq =
      repeated_minimization(problem, config.solver.x0, config.solver.tol, config.solver.max_outer);

  ISEHDConfig iconfig;
  iconfig.omega = config.omega;
  iconfig.mu = problem.mu;
  iconfig.t0 = config.solver.t0;
  iconfig.T = config.solver.T;
  iconfig.h = config.solver.h;

  const DampingMargins margins = check_damping_condition(
      problem.mu, problem.b.lipschitz_l, problem.b.beta, problem.map.tau, config.omega);

  const Trajectory traj = integrate_isehd(problem, config.solver.x0, config.solver.v0, iconfig);
  const LyapunovTrace trace = lyapunov_trace(traj, problem, eq.x_bar, iconfig);

  report["equilibrium"] = eq.x_bar;
  report["theoretical_rate"] = std::sqrt(problem.mu) / 4.0;
  report["V_t0"] = trace.v0;
  report["damping_ok"] = margins.ok;

  for (const CheckRequest& c : config.checks) {
    CheckOutcome out;
    if (c.type == "damping_condition") {
      out.record = ordered_json{{"type", c.type},
                                {"satisfied", margins.ok},
                                {"omega_slack", margins.omega_slack},
                                {"condition_slack", margins.condition_slack}};
      out.violated = c.strict && !margins.ok;
    } else if (c.type == "lyapunov_decay") {
      const BoundReport b = check_lyapunov_decay(trace, problem.mu, c.tolerance);
      out.record = bound_report_json(b);
      out.record["type"] = c.type;
      out.violated = c.strict && !b.satisfied;
      report["fitted_rate"] = b.fitted_rate;
      report["max_violation"] = b.max_violation;
      report["bound_satisfied"] = b.satisfied;
    } else if (c.type == "gradient_integral") {
      const GradientIntegralReport g = gradient_integral_estimate(traj, problem, eq.x_bar, problem.mu);
      out.record = ordered_json{{"type", c.type},
                                {"satisfied", g.ratio_bounded},
                                {"empirical_C", g.empirical_c}};
      out.violated = c.strict && !g.ratio_bounded;
    } else if (c.type == "w1_decay_2nd") {
      const BoundReport b = w1_decay_report_2nd(traj, problem, eq.x_bar, trace.v0, problem.mu,
                                                c.tolerance);
      out.record = bound_report_json(b);
      out.record["type"] = c.type;
      out.violated = c.strict && !b.satisfied;
    } else {
      continue;
    }
    outcomes.push_back(out);
  }

  if (traj_out) {
    *traj_out = traj;
    csv_options->velocities = true;
    csv_options->extra_columns.push_back({"V", trace.v_energy});
    csv_options->extra_columns.push_back({"gradnorm", trace.gradnorm});
  }
}

void run_pd_kind(const ScenarioConfig& config, ordered_json& report,
                 std::vector<CheckOutcome>& outcomes, Trajectory* traj_out,
                 CsvOptions* csv_options) {
  const SaddleInstance inst = build_saddle(config.instance);
  const std::size_t nx = static_cast<std::size_t>(config.instance.at("primal").value("dim", 1));
  const PDState z0 = pd_from_flat(config.solver.x0, nx);
  const PDEquilibriumReport eq = pd_equilibrium(inst, z0, config.solver.tol, config.solver.max_outer);
  report["equilibrium"] = pd_to_flat(eq.z_bar);
  report["residual"] = eq.residual;
  report["tilde_rho"] = inst.tilde_rho();

  Trajectory traj;
  if (config.kind == "spds") {
    traj = integrate_spds(inst, z0, config.solver.t0, config.solver.T, config.solver.h);
    report["theoretical_rate"] = inst.tilde_mu() - inst.tau * inst.tilde_beta();
    for (const CheckRequest& c : config.checks) {
      if (c.type != "speed_envelope") continue;
      // Envelope ‖Z(t)−z̄‖ ≤ ‖Z0−z̄‖ e^{−rm(μ̃−τβ̃)(t−t0)}.
      const Vector zbar_flat = pd_to_flat(eq.z_bar);
      const TimeSeries observed = traj.distance_series(zbar_flat);
      const double rate = c.rate_multiplier * (inst.tilde_mu() - inst.tau * inst.tilde_beta());
      double max_violation = -1e300;
      for (std::size_t k = 0; k < observed.size(); ++k) {
        const double env = observed.values.front() *
                           std::exp(-rate * (observed.times[k] - observed.times.front()));
        max_violation = std::max(max_violation, observed.values[k] - env);
      }
      CheckOutcome out;
      const bool ok = max_violation <= c.tolerance;
      double fitted = 0.0;
      if (observed.values.front() > 1e-13) {
        TimeSeries tail({}, {});
        const double t_a = traj.t0() + 0.5 * (traj.t_end() - traj.t0());
        for (std::size_t k = 0; k < observed.size(); ++k) {
          if (observed.times[k] >= t_a && observed.values[k] > 1e-280) {
            tail.times.push_back(observed.times[k]);
            tail.values.push_back(observed.values[k]);
          }
        }
        if (tail.size() >= 3) {
          fitted = fit_exponential_rate(tail, tail.times.front(), tail.times.back()).rate;
        }
      }
      out.record = ordered_json{{"type", c.type},
                                {"satisfied", ok},
                                {"max_violation", max_violation},
                                {"fitted_rate", fitted},
                                {"rate_multiplier", c.rate_multiplier}};
      out.violated = c.strict && !ok;
      outcomes.push_back(out);
      report["fitted_rate"] = fitted;
      report["max_violation"] = max_violation;
      report["bound_satisfied"] = ok;
    }
  } else {
    const PDState zdot0 = pd_from_flat(config.solver.v0, nx);
    traj = integrate_ispds(inst, z0, zdot0, config.solver.t0, config.solver.T, config.solver.h);
    report["theoretical_rate"] = std::sqrt(inst.tilde_mu()) / 4.0;
    for (const CheckRequest& c : config.checks) {
      if (c.type != "pd_decay") continue;
      const PDDecayReport d = check_pd_decay(traj, inst, eq.z_bar, inst.tilde_mu(), c.tolerance);
      CheckOutcome out;
      out.record = ordered_json{{"type", c.type},
                                {"condition_ok", d.condition_ok},
                                {"satisfied", d.condition_ok && d.satisfied},
                                {"max_violation", d.condition_ok ? d.envelope.max_violation : 0.0},
                                {"sandwich_violation", d.sandwich_violation},
                                {"fitted_rate", d.envelope.fitted_rate},
                                {"V_t0", d.v_t0}};
      out.violated = c.strict && !(d.condition_ok && d.satisfied);
      outcomes.push_back(out);
      report["fitted_rate"] = d.envelope.fitted_rate;
      report["max_violation"] = d.condition_ok ? d.envelope.max_violation : 0.0;
      report["bound_satisfied"] = d.condition_ok && d.satisfied;
    }
    if (csv_options) csv_options->velocities = true;
  }
  if (traj_out) *traj_out = std::move(traj);
}

void run_curvature_kind(const ScenarioConfig& config, ordered_json& report,
                        std::vector<CheckOutcome>& outcomes) {
  const RandomWalkSpace space = build_space(config.instance);
  const TauKappaRecord record = tau_kappa_table(space);
  report["kappa"] = record.kappa;
  report["tau_hat"] = record.tau_hat;

  if (record.kappa > 0.0) {
    const InvariantMeasureResult inv = invariant_measure(space, config.solver.tol);
    report["invariant_measure"] = inv.upsilon;
    report["invariant_iterations"] = inv.iterations;
    report["invariant_residual"] =
        w1_on_space(space, convolve(inv.upsilon, space), inv.upsilon);
    report["geometric_rate_ok"] = inv.geometric_rate_ok;
  }

  std::mt19937_64 rng(config.solver.seed);
  auto uniform = [&rng]() { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  for (const CheckRequest& c : config.checks) {
    CheckOutcome out;
    if (c.type == "tau_kappa_identity") {
      const bool ok = record.identity_ok && record.bounds_ok;
      out.record = ordered_json{{"type", c.type}, {"satisfied", ok}};
      out.violated = c.strict && !ok;
    } else if (c.type == "contraction_samples") {
      bool all_ok = true;
      for (int s = 0; s < c.count; ++s) {
        Measure nu1(space.size()), nu2(space.size());
        double t1 = 0.0, t2 = 0.0;
        for (std::size_t i = 0; i < space.size(); ++i) {
          nu1[i] = uniform();
          nu2[i] = uniform();
          t1 += nu1[i];
          t2 += nu2[i];
        }
        for (std::size_t i = 0; i < space.size(); ++i) {
          nu1[i] /= t1;
          nu2[i] /= t2;
        }
        const ContractionCheck check = verify_contraction(space, nu1, nu2);
        if (!check.ok) {
          all_ok = false;
          break;
        }
      }
      out.record = ordered_json{{"type", c.type}, {"satisfied", all_ok}, {"count", c.count}};
      out.violated = c.strict && !all_ok;
    } else {
      continue;
    }
    outcomes.push_back(out);
  }
}

void run_w1_kind(const ScenarioConfig& config, ordered_json& report) {
  const Distribution p = Distribution::from_json(config.instance.at("p").dump());
  const Distribution q = Distribution::from_json(config.instance.at("q").dump());
  report["w1"] = w1(p, q);
}

}  // namespace

ordered_json report_comparable(ordered_json report) {
  report.erase("timestamp");
  report.erase("runtime_seconds");
  return report;
}

ScenarioResult run_scenario(const ScenarioConfig& config, const std::string& csv_override,
                            const std::string& json_override) {
  const auto start = std::chrono::steady_clock::now();
  ScenarioResult result;
  ordered_json& report = result.report;
  report["kind"] = config.kind;
  if (!config.name.empty()) report["scenario"] = config.name;
  report["derived"] = config.derived;

  std::vector<CheckOutcome> outcomes;
  Trajectory traj;
  CsvOptions csv_options;
  bool have_traj = false;

  try {
    if (config.kind == "equilibrium") {
      run_equilibrium_kind(config, report, outcomes, &traj);
      have_traj = true;
    } else if (config.kind == "flow1") {
      run_flow1_kind(config, report, outcomes, &traj);
      have_traj = true;
    } else if (config.kind == "flow2") {
      run_flow2_kind(config, report, outcomes, &traj, &csv_options);
      have_traj = true;
    } else if (config.kind == "spds" || config.kind == "ispds") {
      run_pd_kind(config, report, outcomes, &traj, &csv_options);
      have_traj = true;
    } else if (config.kind == "curvature") {
      run_curvature_kind(config, report, outcomes);
    } else if (config.kind == "w1") {
      run_w1_kind(config, report);
    }
  } catch (const Error& e) {
    report["error"] = e.what();
    report["error_code"] = error_code_name(e.code());
    result.exit_code = 1;
  }

  ordered_json checks = ordered_json::array();
  bool violated = false;
  for (const CheckOutcome& o : outcomes) {
    checks.push_back(o.record);
    violated = violated || o.violated;
  }
  report["checks"] = checks;
  if (result.exit_code == 0 && violated) result.exit_code = 2;

  const std::string csv_path = !csv_override.empty() ? csv_override : config.outputs.csv_path;
  if (!csv_path.empty() && have_traj && result.exit_code != 1) {
    write_trajectory_csv(traj, csv_path, csv_options);
    report["csv_path"] = csv_path;
  }

  const auto end = std::chrono::steady_clock::now();
  report["runtime_seconds"] = std::chrono::duration<double>(end - start).count();
  report["timestamp"] = iso_timestamp();

  const std::string json_path = !json_override.empty() ? json_override : config.outputs.json_path;
  if (!json_path.empty()) {
    std::ofstream f(json_path, std::ios::binary);
    if (!f) fail(ErrorCode::IoError, "cannot open JSON output " + json_path);
    f << report.dump(2) << "\n";
  }
  return result;
}

int run_batch(const std::vector<std::string>& config_paths, bool quiet) {
  unsigned jobs = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("CLOSEDLOOP_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed > 0) jobs = static_cast<unsigned>(parsed);
  }
  jobs = std::max(1u, std::min<unsigned>(jobs, config_paths.size()));

  std::atomic<std::size_t> next{0};
  std::atomic<int> worst{0};
  std::mutex io_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= config_paths.size()) return;
      int code = 0;
      std::string summary;
      try {
        const ScenarioConfig config = validate_config_file(config_paths[idx]);
        const ScenarioResult result = run_scenario(config);
        code = result.exit_code;
        summary = result.report.contains("error")
                      ? result.report.at("error").get<std::string>()
                      : "ok";
      } catch (const std::exception& e) {
        code = 1;
        summary = e.what();
      }
      int expected = worst.load();
      while (expected < code && !worst.compare_exchange_weak(expected, code)) {
      }
      if (!quiet) {
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << config_paths[idx] << ": exit " << code << " (" << summary << ")\n";
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return worst.load();
}

}  // namespace closedloop
