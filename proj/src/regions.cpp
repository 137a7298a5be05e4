#include "cloakopt/regions.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <utility>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

double segment_distance(const Point& p, const Point& a, const Point& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

struct DistanceVisitor {
  const Point& p;

  double operator()(const DiskShape& d) const {
    return std::hypot(p.x - d.center.x, p.y - d.center.y) - d.radius;
  }

  double operator()(const PolygonShape& poly) const {
    const auto& v = poly.vertices;
    if (v.size() < 3) throw InvalidArgument("polygon obstacle needs at least 3 vertices");
    double dist = std::numeric_limits<double>::infinity();
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
      dist = std::min(dist, segment_distance(p, v[j], v[i]));
      // Even-odd crossing test.
      if ((v[i].y > p.y) != (v[j].y > p.y)) {
        const double x_cross = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
        if (p.x < x_cross) inside = !inside;
      }
    }
    return inside ? -dist : dist;
  }
};

std::pair<int, int> edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

double signed_distance(const ObstacleShape& shape, const Point& p) {
  return std::visit(DistanceVisitor{p}, shape);
}

RegionTags RegionTags::from_regions(const TriMesh& mesh, std::vector<Region> regions) {
  if (regions.size() != mesh.num_triangles()) {
    throw InvalidArgument("region tag count does not match triangle count");
  }
  RegionTags tags;
  std::set<int> cloak_nodes;
  for (std::size_t e = 0; e < regions.size(); ++e) {
    switch (regions[e]) {
      case Region::obstacle:
        tags.obstacle_elems.push_back(e);
        break;
      case Region::cloak:
        tags.cloak_elems.push_back(e);
        for (int v : mesh.triangle(e)) cloak_nodes.insert(v);
        break;
      case Region::observation:
        tags.obs_elems.push_back(e);
        break;
      case Region::exterior:
        break;
      default:
        throw InvalidArgument("unknown region tag");
    }
  }
  tags.cloak_nodes.assign(cloak_nodes.begin(), cloak_nodes.end());
  tags.element_region = std::move(regions);
  return tags;
}

void RegionTags::require_control_layout() const {
  if (cloak_elems.empty()) throw ConfigError("cloak region contains no elements");
  if (obs_elems.empty()) throw ConfigError("observation region contains no elements");
}

RegionTags tag_regions(const TriMesh& mesh, const GeometrySpec& spec) {
  if (!(spec.cloak_thickness > 0.0)) throw ConfigError("cloak thickness must be positive");
  if (spec.observation_gap < 0.0) throw ConfigError("observation gap must be non-negative");
  std::vector<Region> regions(mesh.num_triangles(), Region::exterior);
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    const double d = signed_distance(spec.obstacle, mesh.centroid(e));
    if (d <= 0.0) {
      regions[e] = Region::obstacle;
    } else if (d <= spec.cloak_thickness) {
      regions[e] = Region::cloak;
    } else if (d > spec.cloak_thickness + spec.observation_gap) {
      regions[e] = Region::observation;
    }
  }
  auto tags = RegionTags::from_regions(mesh, std::move(regions));
  tags.require_control_layout();
  return tags;
}

bool elements_connected(const TriMesh& mesh, std::span<const std::size_t> elems) {
  if (elems.empty()) return true;
  std::map<std::pair<int, int>, std::vector<std::size_t>> by_edge;
  for (std::size_t idx = 0; idx < elems.size(); ++idx) {
    const auto& t = mesh.triangle(elems[idx]);
    for (int k = 0; k < 3; ++k) by_edge[edge_key(t[k], t[(k + 1) % 3])].push_back(idx);
  }
  std::vector<bool> seen(elems.size(), false);
  std::deque<std::size_t> queue{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop_front();
    const auto& t = mesh.triangle(elems[idx]);
    for (int k = 0; k < 3; ++k) {
      for (std::size_t nb : by_edge[edge_key(t[k], t[(k + 1) % 3])]) {
        if (!seen[nb]) {
          seen[nb] = true;
          ++visited;
          queue.push_back(nb);
        }
      }
    }
  }
  return visited == elems.size();
}

RestrictionMap::RestrictionMap(std::vector<int> kept_nodes, std::size_t n_ref)
    : kept_(std::move(kept_nodes)), to_ocp_(n_ref, -1), n_ref_(n_ref) {
  for (std::size_t i = 0; i < kept_.size(); ++i) {
    const int r = kept_[i];
    if (r < 0 || static_cast<std::size_t>(r) >= n_ref) throw InvalidArgument("kept node out of range");
    if (i > 0 && kept_[i - 1] >= r) throw InvalidArgument("kept nodes must be strictly increasing");
    to_ocp_[static_cast<std::size_t>(r)] = static_cast<int>(i);
  }
}

RestrictionMap RestrictionMap::identity(std::size_t n) {
  std::vector<int> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
  return RestrictionMap(std::move(all), n);
}

Eigen::SparseMatrix<double> RestrictionMap::matrix() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(kept_.size());
  for (std::size_t i = 0; i < kept_.size(); ++i) trip.emplace_back(static_cast<int>(i), kept_[i], 1.0);
  Eigen::SparseMatrix<double> e(static_cast<Eigen::Index>(kept_.size()), static_cast<Eigen::Index>(n_ref_));
  e.setFromTriplets(trip.begin(), trip.end());
  return e;
}

Eigen::VectorXd RestrictionMap::restrict(const Eigen::VectorXd& ref) const {
  if (static_cast<std::size_t>(ref.size()) != n_ref_) throw InvalidArgument("restrict: wrong vector length");
  Eigen::VectorXd out(static_cast<Eigen::Index>(kept_.size()));
  for (std::size_t i = 0; i < kept_.size(); ++i) out[static_cast<Eigen::Index>(i)] = ref[kept_[i]];
  return out;
}

Eigen::VectorXd RestrictionMap::extend(const Eigen::VectorXd& ocp) const {
  if (static_cast<std::size_t>(ocp.size()) != kept_.size()) throw InvalidArgument("extend: wrong vector length");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_ref_));
  for (std::size_t i = 0; i < kept_.size(); ++i) out[kept_[i]] = ocp[static_cast<Eigen::Index>(i)];
  return out;
}

MaskedDomain mask_obstacle(const TriMesh& mesh, const RegionTags& tags) {
  const std::size_t n_ref = mesh.num_nodes();
  MaskedDomain out;

  if (tags.obstacle_elems.empty()) {
    out.mesh = mesh;
    out.tags = tags;
    out.restriction = RestrictionMap::identity(n_ref);
    return out;
  }

  if (!elements_connected(mesh, tags.obstacle_elems)) {
    throw TopologyError("obstacle elements are not connected");
  }

  std::vector<bool> in_obstacle(n_ref, false), in_domain(n_ref, false);
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    auto& mark = tags.element_region[e] == Region::obstacle ? in_obstacle : in_domain;
    for (int v : mesh.triangle(e)) mark[static_cast<std::size_t>(v)] = true;
  }
  for (const auto& ed : mesh.boundary_edges()) {
    for (int v : ed.nodes) {
      if (in_obstacle[static_cast<std::size_t>(v)]) {
        throw TopologyError("obstacle touches the outer boundary");
      }
    }
  }

  std::vector<int> kept;
  for (std::size_t v = 0; v < n_ref; ++v) {
    if (in_domain[v]) {
      kept.push_back(static_cast<int>(v));
    } else if (in_obstacle[v]) {
      ++out.masked_interior_nodes;
    }
  }
  out.restriction = RestrictionMap(kept, n_ref);
  const auto& map = out.restriction;

  std::vector<Point> nodes;
  nodes.reserve(kept.size());
  for (int v : kept) nodes.push_back(mesh.node(v));

  std::vector<Triangle> tris;
  std::vector<Region> regions;
  std::set<std::pair<int, int>> obstacle_edges;
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    const auto& t = mesh.triangle(e);
    if (tags.element_region[e] == Region::obstacle) {
      for (int k = 0; k < 3; ++k) obstacle_edges.insert(edge_key(t[k], t[(k + 1) % 3]));
      continue;
    }
    tris.push_back({map.ocp_index(t[0]), map.ocp_index(t[1]), map.ocp_index(t[2])});
    regions.push_back(tags.element_region[e]);
  }

  std::vector<BoundaryEdge> edges;
  for (const auto& ed : mesh.boundary_edges()) {
    edges.push_back({{map.ocp_index(ed.nodes[0]), map.ocp_index(ed.nodes[1])}, ed.label});
  }
  // Edges shared by an obstacle and a kept triangle become the Dirichlet
  // boundary, oriented like the kept triangle.
  std::set<int> dirichlet;
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    if (tags.element_region[e] == Region::obstacle) continue;
    const auto& t = mesh.triangle(e);
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (obstacle_edges.count(edge_key(a, b)) == 0) continue;
      edges.push_back({{map.ocp_index(a), map.ocp_index(b)}, tags.dirichlet_boundary});
    }
  }
  // Nodes of the obstacle outline: kept nodes touching an obstacle element.
  for (int v : kept) {
    if (in_obstacle[static_cast<std::size_t>(v)]) dirichlet.insert(map.ocp_index(v));
  }

  out.mesh = TriMesh(std::move(nodes), std::move(tris), std::move(edges));
  out.tags = RegionTags::from_regions(out.mesh, std::move(regions));
  out.tags.dirichlet_boundary = tags.dirichlet_boundary;
  out.tags.robin_boundary = tags.robin_boundary;
  out.dirichlet_nodes.assign(dirichlet.begin(), dirichlet.end());
  return out;
}

RegionTags refine_tags(const TriMesh& fine_mesh, const RefinedMesh& refined, const RegionTags& coarse) {
  std::vector<Region> regions(refined.triangle_parent.size());
  for (std::size_t e = 0; e < regions.size(); ++e) {
    regions[e] = coarse.element_region[refined.triangle_parent[e]];
  }
  auto tags = RegionTags::from_regions(fine_mesh, std::move(regions));
  tags.dirichlet_boundary = coarse.dirichlet_boundary;
  tags.robin_boundary = coarse.robin_boundary;
  return tags;
}

}  // namespace cloakopt
