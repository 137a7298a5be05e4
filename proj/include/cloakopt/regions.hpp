#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cloakopt/mesh.hpp"

namespace cloakopt {

struct DiskShape {
  Point center;
  double radius = 0.0;
};

/// Simple polygon, either orientation. Non-convex outlines are allowed.
struct PolygonShape {
  std::vector<Point> vertices;
};

using ObstacleShape = std::variant<DiskShape, PolygonShape>;

/// Negative inside the shape, positive outside, Euclidean distance to the
/// outline in magnitude.
double signed_distance(const ObstacleShape& shape, const Point& p);

/// Region predicates, all expressed through the obstacle's signed distance d
/// evaluated at element centroids:
///   obstacle     d <= 0
///   cloak        0 < d <= cloak_thickness
///   observation  d > cloak_thickness + observation_gap
/// Elements in the gap are exterior. The three sets are disjoint by
/// construction.
struct GeometrySpec {
  ObstacleShape obstacle = DiskShape{{0.0, 0.0}, 0.3};
  double cloak_thickness = 0.2;
  double observation_gap = 0.0;
};

enum class Region : int { exterior = 0, obstacle = 1, cloak = 2, observation = 3 };

struct RegionTags {
  std::vector<Region> element_region;
  std::vector<std::size_t> obstacle_elems;
  std::vector<std::size_t> cloak_elems;
  std::vector<std::size_t> obs_elems;
  /// Sorted nodes touching at least one cloak element. These carry the
  /// control degrees of freedom.
  std::vector<int> cloak_nodes;
  BoundaryLabel dirichlet_boundary = BoundaryLabel::obstacle;
  BoundaryLabel robin_boundary = BoundaryLabel::outer;

  static RegionTags from_regions(const TriMesh& mesh, std::vector<Region> regions);

  /// Throws ConfigError when there is nothing to control or nothing to observe.
  void require_control_layout() const;
};

RegionTags tag_regions(const TriMesh& mesh, const GeometrySpec& spec);

/// Edge-adjacency connectivity of an element subset (breadth-first search).
bool elements_connected(const TriMesh& mesh, std::span<const std::size_t> elems);

/// Selection operator from reference-mesh nodes to the nodes kept after the
/// obstacle is removed.
class RestrictionMap {
 public:
  RestrictionMap() = default;
  RestrictionMap(std::vector<int> kept_nodes, std::size_t n_ref);

  static RestrictionMap identity(std::size_t n);

  const std::vector<int>& kept_nodes() const { return kept_; }
  std::size_t n_ref() const { return n_ref_; }
  std::size_t n_ocp() const { return kept_.size(); }

  /// OCP index of a reference node, or -1 when it was masked.
  int ocp_index(int ref_node) const { return to_ocp_[static_cast<std::size_t>(ref_node)]; }

  /// E as an n_ocp x n_ref sparse 0/1 matrix.
  Eigen::SparseMatrix<double> matrix() const;

  /// E x
  Eigen::VectorXd restrict(const Eigen::VectorXd& ref) const;
  /// E^T y
  Eigen::VectorXd extend(const Eigen::VectorXd& ocp) const;

 private:
  std::vector<int> kept_;
  std::vector<int> to_ocp_;
  std::size_t n_ref_ = 0;
};

/// Computational domain of the control problem: the reference mesh with the
/// obstacle removed and its outline turned into a Dirichlet boundary.
struct MaskedDomain {
  TriMesh mesh;
  RegionTags tags;
  RestrictionMap restriction;
  /// Sorted OCP node indices lying on the obstacle outline.
  std::vector<int> dirichlet_nodes;
  /// Obstacle nodes that were removed because every element around them
  /// belongs to the obstacle.
  std::size_t masked_interior_nodes = 0;
};

MaskedDomain mask_obstacle(const TriMesh& mesh, const RegionTags& tags);

/// Region tags of a refined mesh, inherited from the parent triangles.
RegionTags refine_tags(const TriMesh& fine_mesh, const RefinedMesh& refined, const RegionTags& coarse);

}  // namespace cloakopt
