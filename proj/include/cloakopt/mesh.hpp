#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace cloakopt {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Triangle = std::array<int, 3>;

/// Labels carried by boundary edges.
enum class BoundaryLabel : int {
  outer = 1,     // Robin boundary of the unperturbed square
  obstacle = 2,  // Dirichlet boundary created by masking the obstacle
};

struct BoundaryEdge {
  std::array<int, 2> nodes{};
  BoundaryLabel label = BoundaryLabel::outer;
};

/// Linear triangle mesh. Triangles are stored counter-clockwise and every
/// boundary edge belongs to exactly one triangle; the constructor checks both.
class TriMesh {
 public:
  TriMesh() = default;
  TriMesh(std::vector<Point> nodes, std::vector<Triangle> triangles,
          std::vector<BoundaryEdge> boundary_edges);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  std::size_t num_boundary_edges() const { return edges_.size(); }

  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return edges_; }

  const Point& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const Triangle& triangle(std::size_t e) const { return triangles_[e]; }

  double area(std::size_t e) const;
  Point centroid(std::size_t e) const;
  double total_area() const;
  double max_edge_length() const;

  /// Vertex coordinates of triangle e.
  std::array<Point, 3> corners(std::size_t e) const;

 private:
  std::vector<Point> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<BoundaryEdge> edges_;
};

double signed_area(const Point& a, const Point& b, const Point& c);

/// Structured mesh of [-side/2, side/2]^2: n x n square cells, each cut into
/// two right triangles along the same diagonal. n is the smallest cell count
/// whose cell side (the triangle leg) does not exceed h_max.
TriMesh build_square_mesh(double side, double h_max);

/// Location of a fine node inside the coarse mesh: the coarse triangle and
/// the barycentric weights of its three corners.
struct ParentLocation {
  std::size_t coarse_triangle = 0;
  std::array<double, 3> weights{};
};

struct RefinedMesh {
  TriMesh mesh;
  /// One entry per fine node. Coarse nodes keep their index, edge midpoints
  /// are appended after them.
  std::vector<ParentLocation> node_parent;
  /// Coarse triangle that contains each fine triangle.
  std::vector<std::size_t> triangle_parent;
};

/// Splits every triangle into four through its edge midpoints.
RefinedMesh refine_uniform(const TriMesh& mesh);

/// Interpolates a coarse P1 field onto the nodes of a refined mesh.
std::vector<double> interpolate_to_fine(const TriMesh& coarse, const RefinedMesh& fine,
                                        std::span<const double> coarse_values);

}  // namespace cloakopt
