#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cloakopt/adjoint.hpp"
#include "cloakopt/analysis.hpp"
#include "cloakopt/config.hpp"
#include "cloakopt/io.hpp"
#include "cloakopt/optimizer.hpp"

namespace cloakopt {

/// A configured problem ready for evaluation or optimization: reference
/// mesh and regions, masked control problem, and the reference field(s).
struct Scenario {
  ScenarioConfig config;
  TriMesh mesh;
  RegionTags tags;
  std::unique_ptr<CloakProblem> problem;
  /// Reference solution on the full mesh (steady) or its trajectory.
  Vector z;
  Trajectory z_traj;
  /// The same, restricted to the masked mesh.
  Vector z_ocp;
  Trajectory z_ocp_traj;

  bool transient() const { return config.regime == Regime::transient; }
  const RestrictionMap& restriction() const { return problem->domain().restriction; }
  std::size_t num_slices() const;
  /// Control nodes as reference-mesh indices.
  std::vector<int> control_nodes() const;
  /// Slices with no influence on the discrete cost; the optimizer keeps them.
  std::vector<bool> frozen_slices() const;
  ControlTrajectory initial_controls() const;
  std::unique_ptr<Objective> objective() const;
};

Scenario build_scenario(const ScenarioConfig& cfg);
/// Same, on a given mesh with given regions (used after refinement).
Scenario build_scenario(const ScenarioConfig& cfg, TriMesh mesh, RegionTags tags);

struct DesignEvaluation {
  double cost = 0.0;
  /// Steady: MTE of the state. Transient: MTE at the final time.
  double mte_uncontrolled = 0.0;
  double mte_optimal = 0.0;
  double eta = 0.0;
  /// Transient only: space-time tracking norms and their ratio.
  double norm_uncontrolled = 0.0;
  double norm_optimal = 0.0;
  double norm_unitary = 0.0;
  double norm_ratio = 0.0;
  std::vector<double> eta_history;
  double min_g1 = 0.0;
  double min_g2 = 0.0;
  double min_lambda = 0.0;
  /// States on the masked mesh, one field per time node.
  Trajectory optimal;
  Trajectory uncontrolled;
};

DesignEvaluation evaluate_design(const Scenario& sc, const ControlTrajectory& ctrl);

struct AuditEntry {
  std::size_t index = 0;
  double adjoint = 0.0;
  double finite_difference = 0.0;
  double rel_error = 0.0;
};

struct StepSweepPoint {
  double step = 0.0;
  double error = 0.0;
};

struct GradientAudit {
  std::vector<AuditEntry> entries;
  double max_rel_error = 0.0;
  /// |FD - adjoint| of the two-point central difference on the largest
  /// gradient component, for steps 1e-1 .. 1e-12.
  std::vector<StepSweepPoint> sweep;
  bool v_shaped = false;
  bool passed = false;
};

/// Random strictly feasible control point used by the audit.
ControlTrajectory audit_point(const Scenario& sc, std::uint64_t seed);

/// Fourth-order central differences against the adjoint gradient on randomly
/// chosen coordinates of the non-frozen slices. The relative error of a
/// coordinate is |fd - adj| / max(|adj|, 1e-6 ||adj||_inf).
GradientAudit audit_gradient(const Scenario& sc, const ControlTrajectory& at, int coordinates, double step,
                             double tolerance, std::uint64_t seed);

/// Design of a scenario in reference-mesh numbering.
Design make_design(const Scenario& sc, const ControlTrajectory& ctrl);
/// Controls of a stored design in the scenario's control ordering. The
/// design must live on the same mesh with the same control nodes.
ControlTrajectory controls_for(const Scenario& sc, const Design& design);

struct TransferResult {
  std::size_t coarse_control_nodes = 0;
  std::size_t fine_control_nodes = 0;
  std::size_t zero_extended = 0;
  std::size_t fine_elements = 0;
  ControlTrajectory fine_controls;
  double coarse_eta = 0.0;
  double fine_eta = 0.0;
  /// Exactness of the linear margin: max |g1_fine - interpolated g1_coarse|.
  double g1_interpolation_error = 0.0;
  double min_g1 = 0.0;
  double min_lambda = 0.0;
};

/// Refines the design mesh `cfg.transfer_levels` times, inherits regions,
/// prolongs the controls and evaluates them on the fine mesh. The fine
/// scenario is returned through `fine` when given.
TransferResult transfer_design(const ScenarioConfig& cfg, const Design& design, Scenario* fine = nullptr);

struct CommandOptions {
  std::string command;
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> design;
  std::optional<double> source_x;
  std::optional<double> source_y;
  std::optional<int> threads;
};

/// Runs one CLI command and returns the process exit status:
/// 0 success, 2 configuration error, 3 solver error, 4 audit failure.
/// The report goes to `out`; diagnostics and the iteration log go to `err`.
int run_command(const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace cloakopt
