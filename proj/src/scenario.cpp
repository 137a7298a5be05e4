#include "cloakopt/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>

#include <Eigen/Core>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double min_lambda_of(const ControlTrajectory& ctrl, double mu) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : ctrl) {
    if (c.size() > 0) m = std::min(m, eigen_field(c, mu).lambda2.minCoeff());
  }
  return m;
}

Trajectory single(const Vector& v) { return Trajectory{{0.0}, {v}}; }

}  // namespace

std::size_t Scenario::num_slices() const { return transient() ? static_cast<std::size_t>(config.grid.steps) + 1 : 1; }

std::vector<int> Scenario::control_nodes() const {
  const auto& kept = restriction().kept_nodes();
  std::vector<int> out;
  out.reserve(problem->num_controls());
  for (int k : problem->tags().cloak_nodes) out.push_back(kept[static_cast<std::size_t>(k)]);
  return out;
}

std::vector<bool> Scenario::frozen_slices() const {
  std::vector<bool> frozen(num_slices(), false);
  if (!transient()) return frozen;
  const auto& g = config.grid;
  // With theta = 1 the first controls never act on the state; they only
  // matter through the penalty when the cost includes t_0.
  if (g.theta == 1.0 && g.include_final) frozen.front() = true;
  // With theta = 0 the last controls never act; without t_N in the cost they
  // are also invisible to the cost.
  if (g.theta == 0.0 && !g.include_final) frozen.back() = true;
  return frozen;
}

ControlTrajectory Scenario::initial_controls() const {
  return ControlTrajectory(num_slices(),
                           ControlField::constant(problem->num_controls(), config.init_u, config.init_f, config.init_v));
}

std::unique_ptr<Objective> Scenario::objective() const {
  if (transient()) return std::make_unique<TransientObjective>(*problem, z_ocp_traj, config.grid);
  return std::make_unique<SteadyObjective>(*problem, z_ocp);
}

Scenario build_scenario(const ScenarioConfig& cfg, TriMesh mesh, RegionTags tags) {
  validate(cfg);
  tags.require_control_layout();
  Scenario sc;
  sc.config = cfg;
  sc.mesh = std::move(mesh);
  sc.tags = std::move(tags);
  sc.problem = std::make_unique<CloakProblem>(mask_obstacle(sc.mesh, sc.tags), cfg.data);
  if (sc.transient()) {
    sc.z_traj = solve_reference_transient(cfg.data, sc.mesh, cfg.grid);
    sc.z_ocp_traj = restrict_trajectory(sc.restriction(), sc.z_traj);
  } else {
    sc.z = solve_reference_steady(cfg.data, sc.mesh);
    sc.z_ocp = sc.restriction().restrict(sc.z);
  }
  return sc;
}

Scenario build_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  if (cfg.mesh_source == MeshSource::file) {
    auto tm = read_mesh(cfg.mesh_path);
    RegionTags tags = cfg.regions == RegionSource::mesh ? RegionTags::from_regions(tm.mesh, tm.regions)
                                                        : tag_regions(tm.mesh, cfg.geometry);
    return build_scenario(cfg, std::move(tm.mesh), std::move(tags));
  }
  auto mesh = build_square_mesh(cfg.side, cfg.h_max);
  auto tags = tag_regions(mesh, cfg.geometry);
  return build_scenario(cfg, std::move(mesh), std::move(tags));
}

DesignEvaluation evaluate_design(const Scenario& sc, const ControlTrajectory& ctrl) {
  const auto& p = *sc.problem;
  const auto& obs = p.tags().obs_elems;
  const double mu = p.data().mu;
  if (ctrl.size() != sc.num_slices()) throw InvalidArgument("design has the wrong number of time slices");
  for (const auto& c : ctrl) p.check_controls(c);

  DesignEvaluation ev;
  const auto zero = ControlTrajectory(sc.num_slices(), ControlField::zeros(p.num_controls()));
  if (sc.transient()) {
    const auto& grid = sc.config.grid;
    ev.optimal = solve_transient(p, ctrl, grid);
    ev.uncontrolled = solve_transient(p, zero, grid);
    const auto unitary =
        solve_transient(p, ControlTrajectory(sc.num_slices(), ControlField::constant(p.num_controls(), 1, 1, 1)), grid);
    ev.cost = eval_cost(p, ev.optimal, sc.z_ocp_traj, ctrl, grid);
    ev.norm_optimal = spacetime_norm(p.mesh(), ev.optimal, sc.z_ocp_traj, obs);
    ev.norm_uncontrolled = spacetime_norm(p.mesh(), ev.uncontrolled, sc.z_ocp_traj, obs);
    ev.norm_unitary = spacetime_norm(p.mesh(), unitary, sc.z_ocp_traj, obs);
    ev.norm_ratio = ev.norm_uncontrolled > 0.0 ? ev.norm_optimal / ev.norm_uncontrolled
                                               : std::numeric_limits<double>::quiet_NaN();
    ev.eta_history = efficiency_history(p.mesh(), ev.uncontrolled, ev.optimal, sc.z_ocp_traj, obs);
    ev.mte_optimal = mte(p.mesh(), ev.optimal.fields.back(), sc.z_ocp_traj.fields.back(), obs);
    ev.mte_uncontrolled = mte(p.mesh(), ev.uncontrolled.fields.back(), sc.z_ocp_traj.fields.back(), obs);
  } else {
    ev.optimal = single(solve_state_steady(p, ctrl[0]));
    ev.uncontrolled = single(solve_state_steady(p, zero[0]));
    ev.cost = eval_cost(p, ev.optimal.fields[0], sc.z_ocp, ctrl[0]);
    ev.mte_optimal = mte(p.mesh(), ev.optimal.fields[0], sc.z_ocp, obs);
    ev.mte_uncontrolled = mte(p.mesh(), ev.uncontrolled.fields[0], sc.z_ocp, obs);
  }
  ev.eta = efficiency(ev.mte_uncontrolled, ev.mte_optimal);
  const auto g = eval_constraints(ctrl, mu, p.data().epsilon);
  ev.min_g1 = g.min_g1();
  ev.min_g2 = g.min_g2();
  ev.min_lambda = min_lambda_of(ctrl, mu);
  return ev;
}

ControlTrajectory audit_point(const Scenario& sc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> diag(0.0, 0.5), off(-0.2, 0.2);
  auto ctrl = sc.initial_controls();
  for (auto& c : ctrl) {
    for (Eigen::Index k = 0; k < c.u.size(); ++k) {
      c.u[k] = diag(rng);
      c.f[k] = diag(rng);
      c.v[k] = off(rng);
    }
  }
  return ctrl;
}

GradientAudit audit_gradient(const Scenario& sc, const ControlTrajectory& at, int coordinates, double step,
                             double tolerance, std::uint64_t seed) {
  auto obj = sc.objective();
  const std::size_t slices = obj->num_slices();
  const std::size_t nodes = obj->nodes_per_slice();
  const Vector x0 = flatten(at);
  const Vector g = flatten(obj->value_and_gradient(at).gradient);
  const double gmax = g.cwiseAbs().maxCoeff();

  const auto frozen = sc.frozen_slices();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < static_cast<std::size_t>(x0.size()); ++i) {
    if (!frozen[i / (3 * nodes)]) candidates.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(std::min(candidates.size(), static_cast<std::size_t>(coordinates)));
  std::sort(candidates.begin(), candidates.end());

  auto shifted = [&](std::size_t i, double h) {
    Vector x = x0;
    x[static_cast<Eigen::Index>(i)] += h;
    return obj->value(unflatten(x, slices, nodes));
  };
  auto fd = [&](std::size_t i, double h) { return (shifted(i, h) - shifted(i, -h)) / (2.0 * h); };
  auto fd4 = [&](std::size_t i, double h) {
    return (8.0 * (shifted(i, h) - shifted(i, -h)) - (shifted(i, 2.0 * h) - shifted(i, -2.0 * h))) / (12.0 * h);
  };

  GradientAudit audit;
  for (std::size_t i : candidates) {
    AuditEntry e;
    e.index = i;
    e.adjoint = g[static_cast<Eigen::Index>(i)];
    e.finite_difference = fd4(i, step);
    e.rel_error = std::abs(e.finite_difference - e.adjoint) / std::max(std::abs(e.adjoint), 1e-6 * gmax);
    audit.max_rel_error = std::max(audit.max_rel_error, e.rel_error);
    audit.entries.push_back(e);
  }

  Eigen::Index imax = 0;
  g.cwiseAbs().maxCoeff(&imax);
  for (int k = 1; k <= 12; ++k) {
    const double h = std::pow(10.0, -k);
    audit.sweep.push_back({h, std::abs(fd(static_cast<std::size_t>(imax), h) - g[imax])});
  }
  const auto best = std::min_element(audit.sweep.begin(), audit.sweep.end(),
                                     [](const auto& a, const auto& b) { return a.error < b.error; });
  audit.v_shaped = best != audit.sweep.begin() && best != audit.sweep.end() - 1 &&
                   audit.sweep.front().error > 10.0 * best->error && audit.sweep.back().error > 10.0 * best->error;
  audit.passed = !audit.entries.empty() && audit.max_rel_error <= tolerance && audit.v_shaped;
  return audit;
}

Design make_design(const Scenario& sc, const ControlTrajectory& ctrl) {
  Design d;
  d.mesh.mesh = sc.mesh;
  d.mesh.regions = sc.tags.element_region;
  d.mu = sc.problem->data().mu;
  d.control_nodes = sc.control_nodes();
  d.times = sc.transient() ? sc.config.grid.times() : std::vector<double>{0.0};
  d.controls = ctrl;
  return d;
}

ControlTrajectory controls_for(const Scenario& sc, const Design& design) {
  const auto& a = design.mesh.mesh;
  if (a.num_nodes() != sc.mesh.num_nodes() || a.num_triangles() != sc.mesh.num_triangles()) {
    throw ConfigError("design mesh does not match the scenario mesh");
  }
  for (std::size_t i = 0; i < a.num_nodes(); ++i) {
    const auto& p = a.nodes()[i];
    const auto& q = sc.mesh.nodes()[i];
    if (std::abs(p.x - q.x) > 1e-12 || std::abs(p.y - q.y) > 1e-12) {
      throw ConfigError("design mesh does not match the scenario mesh");
    }
  }
  if (design.control_nodes != sc.control_nodes()) throw ConfigError("design control nodes differ from the scenario cloak");
  if (design.controls.size() != sc.num_slices()) throw ConfigError("design has the wrong number of time slices");
  return design.controls;
}

TransferResult transfer_design(const ScenarioConfig& cfg, const Design& design, Scenario* fine_out) {
  TransferResult out;
  out.coarse_control_nodes = design.control_nodes.size();

  TriMesh mesh = design.mesh.mesh;
  RegionTags tags = RegionTags::from_regions(mesh, design.mesh.regions);
  {
    const Scenario coarse = build_scenario(cfg, mesh, tags);
    out.coarse_eta = evaluate_design(coarse, controls_for(coarse, design)).eta;
  }

  ControlTrajectory ctrl = design.controls;
  std::vector<int> nodes = design.control_nodes;
  for (int level = 0; level < cfg.transfer_levels; ++level) {
    RefinedMesh refined = refine_uniform(mesh);
    RegionTags fine_tags = refine_tags(refined.mesh, refined, tags);
    ControlTrajectory fine_ctrl;
    for (const auto& c : ctrl) {
      auto pr = prolongate_controls(c, nodes, mesh, refined, fine_tags.cloak_nodes);
      out.zero_extended += pr.zero_extended;
      fine_ctrl.push_back(std::move(pr.controls));
    }
    // Linear margin check: g1 is affine in (u, f), so interpolation keeps it.
    for (std::size_t s = 0; s < ctrl.size(); ++s) {
      std::vector<double> coarse_g1(mesh.num_nodes(), 0.0);
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        coarse_g1[static_cast<std::size_t>(nodes[k])] = 2.0 * cfg.data.mu + ctrl[s].u[i] + ctrl[s].f[i] - cfg.data.epsilon;
      }
      const auto interp = interpolate_to_fine(mesh, refined, coarse_g1);
      for (std::size_t k = 0; k < fine_tags.cloak_nodes.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        const double g1 = 2.0 * cfg.data.mu + fine_ctrl[s].u[i] + fine_ctrl[s].f[i] - cfg.data.epsilon;
        out.g1_interpolation_error = std::max(
            out.g1_interpolation_error, std::abs(g1 - interp[static_cast<std::size_t>(fine_tags.cloak_nodes[k])]));
      }
    }
    mesh = std::move(refined.mesh);
    tags = std::move(fine_tags);
    nodes = tags.cloak_nodes;
    ctrl = std::move(fine_ctrl);
  }

  Scenario fine = build_scenario(cfg, mesh, tags);
  // Masked numbering of the fine cloak nodes follows the reference order.
  if (fine.control_nodes() != nodes) throw TopologyError("fine cloak nodes changed under masking");
  out.fine_control_nodes = nodes.size();
  out.fine_elements = mesh.num_triangles();
  out.fine_eta = evaluate_design(fine, ctrl).eta;
  const auto g = eval_constraints(ctrl, cfg.data.mu, cfg.data.epsilon);
  out.min_g1 = g.min_g1();
  out.min_lambda = min_lambda_of(ctrl, cfg.data.mu);
  out.fine_controls = std::move(ctrl);
  if (fine_out) *fine_out = std::move(fine);
  return out;
}

namespace {

void export_fields(const std::filesystem::path& dir, const std::string& stem, const TriMesh& mesh,
                   const std::vector<NamedField>& fields) {
  write_vtk(dir / (stem + ".vtk"), mesh, fields);
  write_csv(dir / (stem + ".csv"), mesh, fields);
}

void export_eigen(const std::filesystem::path& path, const Scenario& sc, const ControlField& ctrl) {
  const auto eig = eigen_field(ctrl, sc.problem->data().mu);
  const auto nodes = sc.control_nodes();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(17) << "node,x,y,u,f,v,lambda1,lambda2,angle1,angle2\n";
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const auto& p = sc.mesh.node(nodes[k]);
    out << nodes[k] << ',' << p.x << ',' << p.y << ',' << ctrl.u[i] << ',' << ctrl.f[i] << ',' << ctrl.v[i] << ','
        << eig.lambda1[i] << ',' << eig.lambda2[i] << ',' << eig.angle1[i] << ',' << eig.angle2[i] << '\n';
  }
}

void describe(Report& r, const Scenario& sc) {
  r.set("regime", std::string(sc.transient() ? "transient" : "steady"));
  r.set("elements", sc.mesh.num_triangles());
  r.set("nodes", sc.mesh.num_nodes());
  r.set("state_dofs", sc.problem->num_state());
  r.set("control_nodes", sc.problem->num_controls());
  r.set("control_variables", 3 * sc.problem->num_controls() * sc.num_slices());
  r.set("cloak_elements", sc.tags.cloak_elems.size());
  r.set("observation_elements", sc.tags.obs_elems.size());
  r.set("dirichlet_nodes", sc.problem->domain().dirichlet_nodes.size());
  r.set("source_x", sc.config.data.source.center.x);
  r.set("source_y", sc.config.data.source.center.y);
  // The optimality system's F_ocp is read as the Dirichlet lifting term.
  r.set("f_ocp", std::string("dirichlet_lifting"));
  if (sc.transient()) {
    r.set("T", sc.config.grid.final_time);
    r.set("N", sc.config.grid.steps);
    r.set("dt", sc.config.grid.dt());
    r.set("theta", sc.config.grid.theta);
  }
}

void record_evaluation(Report& r, const DesignEvaluation& ev, bool transient) {
  r.set("J", ev.cost);
  r.set("MTE", ev.mte_uncontrolled);
  r.set("MTE_opt", ev.mte_optimal);
  r.set("eta", ev.eta);
  if (transient) {
    r.set("norm_uncontrolled", ev.norm_uncontrolled);
    r.set("norm_unitary", ev.norm_unitary);
    r.set("norm_optimal", ev.norm_optimal);
    r.set("norm_ratio", ev.norm_ratio);
  }
  r.set("min_g1", ev.min_g1);
  r.set("min_g2", ev.min_g2);
  r.set("min_lambda", ev.min_lambda);
}

void export_evaluation(const std::filesystem::path& dir, const Scenario& sc, const DesignEvaluation& ev,
                       const ControlTrajectory& ctrl) {
  const auto& mesh = sc.problem->mesh();
  const Vector& z = sc.transient() ? sc.z_ocp_traj.fields.back() : sc.z_ocp;
  const Vector& q = ev.optimal.fields.back();
  const Vector& q0 = ev.uncontrolled.fields.back();
  export_fields(dir, "fields", mesh,
                {{"q_opt", to_std(q)}, {"q_uncontrolled", to_std(q0)}, {"z", to_std(z)}, {"error_opt", to_std(q - z)},
                 {"error_uncontrolled", to_std(q0 - z)}});
  export_eigen(dir / "eigen.csv", sc, ctrl.back());
  if (sc.transient()) {
    std::ofstream out(dir / "history.csv");
    out << std::setprecision(17) << "step,time,mte_uncontrolled,mte_opt,eta\n";
    const auto& obs = sc.problem->tags().obs_elems;
    for (std::size_t i = 0; i < ev.optimal.size(); ++i) {
      out << i << ',' << ev.optimal.times[i] << ',' << mte(mesh, ev.uncontrolled.fields[i], sc.z_ocp_traj.fields[i], obs)
          << ',' << mte(mesh, ev.optimal.fields[i], sc.z_ocp_traj.fields[i], obs) << ',' << ev.eta_history[i] << '\n';
    }
  }
}

std::filesystem::path design_path(const CommandOptions& opts, const std::filesystem::path& out_dir) {
  return opts.design ? *opts.design : out_dir / "design.txt";
}

int dispatch(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  ScenarioConfig cfg = load_config(opts.config);
  if (opts.source_x) cfg.data.source.center.x = *opts.source_x;
  if (opts.source_y) cfg.data.source.center.y = *opts.source_y;
  int threads = opts.threads.value_or(cfg.threads);
  if (const char* env = std::getenv("CLOAKOPT_THREADS")) {
    try {
      threads = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("CLOAKOPT_THREADS is not an integer: ") + env);
    }
  }
  if (threads < 1) throw ConfigError("thread count must be at least 1");
  cfg.threads = threads;
  Eigen::setNbThreads(threads);
  const std::filesystem::path dir = opts.out ? *opts.out : cfg.output_dir;
  std::filesystem::create_directories(dir);

  const auto t0 = Clock::now();
  Report report;
  report.set("command", opts.command);
  report.set("seed", static_cast<long long>(cfg.seed));
  int status = 0;

  if (opts.command == "reference") {
    const Scenario sc = build_scenario(cfg);
    describe(report, sc);
    const Vector& z = sc.transient() ? sc.z_traj.fields.back() : sc.z;
    write_mesh(dir / "mesh.txt", sc.mesh, sc.tags.element_region);
    export_fields(dir, "reference", sc.mesh, {{"z", to_std(z)}});
    report.set("z_max", z.maxCoeff());
    report.set("z_min", z.minCoeff());
  } else if (opts.command == "uncloaked") {
    const Scenario sc = build_scenario(cfg);
    describe(report, sc);
    const auto zero = ControlTrajectory(sc.num_slices(), ControlField::zeros(sc.problem->num_controls()));
    const auto ev = evaluate_design(sc, zero);
    const Vector& z = sc.transient() ? sc.z_ocp_traj.fields.back() : sc.z_ocp;
    export_fields(dir, "uncloaked", sc.problem->mesh(),
                  {{"q", to_std(ev.uncontrolled.fields.back())}, {"z", to_std(z)},
                   {"error", to_std(ev.uncontrolled.fields.back() - z)}});
    report.set("MTE", ev.mte_uncontrolled);
    if (sc.transient()) report.set("norm_uncontrolled", ev.norm_uncontrolled);
  } else if (opts.command == "optimize") {
    const Scenario sc = build_scenario(cfg);
    describe(report, sc);
    auto obj = sc.objective();
    OptimizeOptions o = cfg.optimizer;
    o.log = &err;
    const auto t_opt = Clock::now();
    // --design warm-starts from a stored design on the same mesh.
    const auto init = opts.design ? controls_for(sc, read_design(*opts.design)) : sc.initial_controls();
    const auto res = optimize(*obj, init, o, cfg.data.epsilon, sc.frozen_slices());
    const double opt_seconds = seconds_since(t_opt);
    write_design(dir / "design.txt", make_design(sc, res.controls));
    const auto ev = evaluate_design(sc, res.controls);
    record_evaluation(report, ev, sc.transient());
    report.set("termination", to_string(res.report.reason));
    report.set("iterations", res.report.history.size());
    report.set("evaluations", res.report.evaluations);
    double hist_min_g1 = std::numeric_limits<double>::infinity(), hist_min_g2 = hist_min_g1;
    for (const auto& h : res.report.history) {
      hist_min_g1 = std::min(hist_min_g1, h.min_g1);
      hist_min_g2 = std::min(hist_min_g2, h.min_g2);
    }
    report.set("iterates_min_g1", hist_min_g1);
    report.set("iterates_min_g2", hist_min_g2);
    report.set("time_optimize_s", opt_seconds);
    export_evaluation(dir, sc, ev, res.controls);
    std::ofstream h(dir / "iterations.csv");
    h << std::setprecision(17) << "stage,iteration,J,barrier,grad,min_g1,min_g2,mu_b\n";
    for (const auto& r : res.report.history) {
      h << r.stage << ',' << r.iteration << ',' << r.cost << ',' << r.barrier << ',' << r.gradient_norm << ','
        << r.min_g1 << ',' << r.min_g2 << ',' << r.mu_b << '\n';
    }
  } else if (opts.command == "evaluate") {
    const Scenario sc = build_scenario(cfg);
    describe(report, sc);
    const Design design = read_design(design_path(opts, dir));
    const auto ctrl = controls_for(sc, design);
    const auto ev = evaluate_design(sc, ctrl);
    record_evaluation(report, ev, sc.transient());
    export_evaluation(dir, sc, ev, ctrl);
  } else if (opts.command == "transfer") {
    const Design design = read_design(design_path(opts, dir));
    Scenario fine;
    const auto tr = transfer_design(cfg, design, &fine);
    describe(report, fine);
    report.set("coarse_control_nodes", tr.coarse_control_nodes);
    report.set("fine_control_nodes", tr.fine_control_nodes);
    report.set("zero_extended", tr.zero_extended);
    report.set("eta_coarse", tr.coarse_eta);
    report.set("eta_transferred", tr.fine_eta);
    report.set("g1_interpolation_error", tr.g1_interpolation_error);
    report.set("min_g1", tr.min_g1);
    report.set("min_lambda", tr.min_lambda);
    if (tr.zero_extended > 0) err << "warning: " << tr.zero_extended << " fine control nodes were zero-extended\n";
    write_design(dir / "design_fine.txt", make_design(fine, tr.fine_controls));
    if (cfg.transfer_reoptimize) {
      auto obj = fine.objective();
      OptimizeOptions o = cfg.optimizer;
      o.log = &err;
      const auto res = optimize(*obj, tr.fine_controls, o, cfg.data.epsilon, fine.frozen_slices());
      const auto ev = evaluate_design(fine, res.controls);
      report.set("eta_reoptimized", ev.eta);
      write_design(dir / "design_fine_reoptimized.txt", make_design(fine, res.controls));
    }
  } else if (opts.command == "check-gradient") {
    const Scenario sc = build_scenario(cfg);
    describe(report, sc);
    const auto audit = audit_gradient(sc, audit_point(sc, cfg.seed), cfg.audit_coordinates, cfg.audit_step,
                                      cfg.audit_tolerance, cfg.seed);
    report.set("audit_coordinates", audit.entries.size());
    report.set("max_rel_error", audit.max_rel_error);
    report.set("v_shaped", std::string(audit.v_shaped ? "true" : "false"));
    report.set("passed", std::string(audit.passed ? "true" : "false"));
    std::ofstream a(dir / "gradient_audit.csv");
    a << std::setprecision(17) << "index,adjoint,finite_difference,rel_error\n";
    for (const auto& e : audit.entries) {
      a << e.index << ',' << e.adjoint << ',' << e.finite_difference << ',' << e.rel_error << '\n';
    }
    std::ofstream s(dir / "step_sweep.csv");
    s << std::setprecision(17) << "step,error\n";
    for (const auto& p : audit.sweep) s << p.step << ',' << p.error << '\n';
    if (!audit.passed) status = 4;
  } else {
    throw ConfigError("unknown command '" + opts.command + "'");
  }

  report.set("time_total_s", seconds_since(t0));
  report.set("status", status);
  report.write(dir / "report.txt");
  report.write(out);
  return status;
}

}  // namespace

int run_command(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(opts, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    err << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const TopologyError& e) {
    err << "mesh topology error: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const AssemblyError& e) {
    err << "assembly error: " << e.what() << '\n';
    return 3;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace cloakopt
