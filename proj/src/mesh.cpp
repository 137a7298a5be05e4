#include "cloakopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

std::pair<int, int> edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

TriMesh::TriMesh(std::vector<Point> nodes, std::vector<Triangle> triangles,
                 std::vector<BoundaryEdge> boundary_edges)
    : nodes_(std::move(nodes)), triangles_(std::move(triangles)), edges_(std::move(boundary_edges)) {
  const int n = static_cast<int>(nodes_.size());
  auto in_range = [n](int i) { return i >= 0 && i < n; };

  std::map<std::pair<int, int>, int> edge_use;
  for (std::size_t e = 0; e < triangles_.size(); ++e) {
    const auto& t = triangles_[e];
    for (int v : t) {
      if (!in_range(v)) throw InvalidArgument("triangle " + std::to_string(e) + " has node index out of range");
    }
    if (!(area(e) > 0.0)) {
      throw InvalidArgument("triangle " + std::to_string(e) + " has non-positive signed area");
    }
    for (int k = 0; k < 3; ++k) ++edge_use[edge_key(t[k], t[(k + 1) % 3])];
  }
  for (std::size_t b = 0; b < edges_.size(); ++b) {
    const auto& ed = edges_[b];
    if (!in_range(ed.nodes[0]) || !in_range(ed.nodes[1])) {
      throw InvalidArgument("boundary edge " + std::to_string(b) + " has node index out of range");
    }
    auto it = edge_use.find(edge_key(ed.nodes[0], ed.nodes[1]));
    if (it == edge_use.end() || it->second != 1) {
      throw InvalidArgument("boundary edge " + std::to_string(b) + " does not belong to exactly one triangle");
    }
  }
}

std::array<Point, 3> TriMesh::corners(std::size_t e) const {
  const auto& t = triangles_[e];
  return {node(t[0]), node(t[1]), node(t[2])};
}

double TriMesh::area(std::size_t e) const {
  const auto p = corners(e);
  return signed_area(p[0], p[1], p[2]);
}

Point TriMesh::centroid(std::size_t e) const {
  const auto p = corners(e);
  return {(p[0].x + p[1].x + p[2].x) / 3.0, (p[0].y + p[1].y + p[2].y) / 3.0};
}

double TriMesh::total_area() const {
  double sum = 0.0;
  for (std::size_t e = 0; e < triangles_.size(); ++e) sum += area(e);
  return sum;
}

double TriMesh::max_edge_length() const {
  double h = 0.0;
  for (std::size_t e = 0; e < triangles_.size(); ++e) {
    const auto p = corners(e);
    for (int k = 0; k < 3; ++k) {
      const auto& a = p[k];
      const auto& b = p[(k + 1) % 3];
      h = std::max(h, std::hypot(b.x - a.x, b.y - a.y));
    }
  }
  return h;
}

TriMesh build_square_mesh(double side, double h_max) {
  if (!(side > 0.0) || !(h_max > 0.0)) {
    throw InvalidArgument("build_square_mesh: side and h_max must be positive");
  }
  // Guard against ceil(2.0000000000000004) == 3 for exact ratios.
  const int n = std::max(1, static_cast<int>(std::ceil(side / h_max - 1e-12)));
  const double h = side / n;
  const double x0 = -0.5 * side;
  auto id = [n](int i, int j) { return j * (n + 1) + i; };

  std::vector<Point> nodes;
  nodes.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      // Pin the last row/column exactly on the boundary.
      const double x = (i == n) ? -x0 : x0 + i * h;
      const double y = (j == n) ? -x0 : x0 + j * h;
      nodes.push_back({x, y});
    }
  }

  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  }

  std::vector<BoundaryEdge> edges;
  edges.reserve(static_cast<std::size_t>(4 * n));
  for (int i = 0; i < n; ++i) {
    edges.push_back({{id(i, 0), id(i + 1, 0)}, BoundaryLabel::outer});
    edges.push_back({{id(n, i), id(n, i + 1)}, BoundaryLabel::outer});
    edges.push_back({{id(i + 1, n), id(i, n)}, BoundaryLabel::outer});
    edges.push_back({{id(0, i + 1), id(0, i)}, BoundaryLabel::outer});
  }
  return TriMesh(std::move(nodes), std::move(tris), std::move(edges));
}

RefinedMesh refine_uniform(const TriMesh& mesh) {
  RefinedMesh out;
  std::vector<Point> nodes = mesh.nodes();
  out.node_parent.resize(nodes.size());

  // Every coarse node gets the location of a triangle that uses it.
  std::vector<bool> located(nodes.size(), false);
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    const auto& t = mesh.triangle(e);
    for (int k = 0; k < 3; ++k) {
      const auto v = static_cast<std::size_t>(t[k]);
      if (located[v]) continue;
      located[v] = true;
      out.node_parent[v].coarse_triangle = e;
      out.node_parent[v].weights = {0.0, 0.0, 0.0};
      out.node_parent[v].weights[static_cast<std::size_t>(k)] = 1.0;
    }
  }

  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](std::size_t e, int ka, int kb) {
    const auto& t = mesh.triangle(e);
    const int a = t[ka], b = t[kb];
    auto [it, inserted] = midpoint.try_emplace(edge_key(a, b), static_cast<int>(nodes.size()));
    if (inserted) {
      const auto& pa = mesh.node(a);
      const auto& pb = mesh.node(b);
      nodes.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
      ParentLocation loc;
      loc.coarse_triangle = e;
      loc.weights[static_cast<std::size_t>(ka)] = 0.5;
      loc.weights[static_cast<std::size_t>(kb)] = 0.5;
      out.node_parent.push_back(loc);
    }
    return it->second;
  };

  std::vector<Triangle> tris;
  tris.reserve(4 * mesh.num_triangles());
  out.triangle_parent.reserve(4 * mesh.num_triangles());
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    const auto& t = mesh.triangle(e);
    const int m01 = mid(e, 0, 1), m12 = mid(e, 1, 2), m20 = mid(e, 2, 0);
    tris.push_back({t[0], m01, m20});
    tris.push_back({m01, t[1], m12});
    tris.push_back({m20, m12, t[2]});
    tris.push_back({m01, m12, m20});
    for (int k = 0; k < 4; ++k) out.triangle_parent.push_back(e);
  }

  std::vector<BoundaryEdge> edges;
  edges.reserve(2 * mesh.num_boundary_edges());
  for (const auto& ed : mesh.boundary_edges()) {
    const int m = midpoint.at(edge_key(ed.nodes[0], ed.nodes[1]));
    edges.push_back({{ed.nodes[0], m}, ed.label});
    edges.push_back({{m, ed.nodes[1]}, ed.label});
  }

  out.mesh = TriMesh(std::move(nodes), std::move(tris), std::move(edges));
  return out;
}

std::vector<double> interpolate_to_fine(const TriMesh& coarse, const RefinedMesh& fine,
                                        std::span<const double> coarse_values) {
  if (coarse_values.size() != coarse.num_nodes()) {
    throw InvalidArgument("interpolate_to_fine: coarse field has wrong length");
  }
  std::vector<double> out(fine.node_parent.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& loc = fine.node_parent[i];
    const auto& t = coarse.triangle(loc.coarse_triangle);
    for (int k = 0; k < 3; ++k) {
      out[i] += loc.weights[static_cast<std::size_t>(k)] * coarse_values[static_cast<std::size_t>(t[k])];
    }
  }
  return out;
}

}  // namespace cloakopt
