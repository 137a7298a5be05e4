#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cloakopt/control.hpp"
#include "cloakopt/forward.hpp"
#include "cloakopt/regions.hpp"

namespace cloakopt {

/// Principal diffusivities and directions of K at every control node.
/// Angles are in degrees within (-90, 90], measured from the x axis.
struct EigenField {
  Vector lambda1;  // largest eigenvalue
  Vector lambda2;
  Vector angle1;
  Vector angle2;

  std::size_t size() const { return static_cast<std::size_t>(lambda1.size()); }
};

EigenField eigen_field(const ControlField& ctrl, double mu);

/// Rebuilds K from one node of an EigenField.
Matrix2 reconstruct_diffusivity(const EigenField& eig, std::size_t node);

/// Mean tracking error: int_obs |q - z|^2 / |obs|.
double mte(const TriMesh& mesh, const Vector& q, const Vector& z, std::span<const std::size_t> obs_elems);

/// |mte_uncontrolled - mte_optimal| / mte_uncontrolled
double efficiency(double mte_uncontrolled, double mte_optimal);

/// Trapezoidal-in-time sum of ||a(t) - b(t)||^2 over the observation region.
double spacetime_norm(const TriMesh& mesh, const Trajectory& a, const Trajectory& b,
                      std::span<const std::size_t> obs_elems);

/// Instantaneous efficiency per time node; nodes where the uncontrolled MTE
/// vanishes (t = 0) get NaN.
std::vector<double> efficiency_history(const TriMesh& mesh, const Trajectory& uncontrolled, const Trajectory& optimal,
                                       const Trajectory& reference, std::span<const std::size_t> obs_elems);

struct ProlongationResult {
  ControlField controls;
  /// Fine cloak nodes that fell outside the coarse cloak support and were
  /// zero-extended.
  std::size_t zero_extended = 0;
};

/// P1 interpolation of coarse control values onto the fine cloak nodes.
/// Node indices refer to the (unmasked) reference meshes; fine nodes come
/// from refine_uniform of the coarse mesh.
ProlongationResult prolongate_controls(const ControlField& coarse, std::span<const int> coarse_cloak_nodes,
                                       const TriMesh& coarse_mesh, const RefinedMesh& refined,
                                       std::span<const int> fine_cloak_nodes);

}  // namespace cloakopt
