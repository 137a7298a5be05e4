#include "cloakopt/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(std::size_t rows, std::size_t cols, const Triplets& trip) {
  SparseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

void check_element(const TriMesh& mesh, std::size_t e) {
  if (!(mesh.area(e) > 0.0)) throw AssemblyError("degenerate triangle " + std::to_string(e));
}

std::vector<std::size_t> all_elements(const TriMesh& mesh) {
  std::vector<std::size_t> all(mesh.num_triangles());
  for (std::size_t e = 0; e < all.size(); ++e) all[e] = e;
  return all;
}

// Maps mesh nodes to rows of the assembled matrix (-1: not present).
template <typename NodeMap>
SparseMatrix mass_on(const TriMesh& mesh, std::span<const std::size_t> elems, std::size_t n, NodeMap map) {
  Triplets trip;
  trip.reserve(9 * elems.size());
  for (std::size_t e : elems) {
    check_element(mesh, e);
    const double a = mesh.area(e);
    const auto& t = mesh.triangle(e);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        trip.emplace_back(map(t[i]), map(t[j]), a / 12.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  return from_triplets(n, n, trip);
}

template <typename NodeMap, typename Diffusivity>
SparseMatrix stiffness_on(const TriMesh& mesh, std::span<const std::size_t> elems, std::size_t n, NodeMap map,
                          Diffusivity k_of) {
  Triplets trip;
  trip.reserve(9 * elems.size());
  for (std::size_t e : elems) {
    check_element(mesh, e);
    const double a = mesh.area(e);
    const auto g = basis_gradients(mesh, e);
    const Matrix2 k = k_of(e);
    const auto& t = mesh.triangle(e);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        trip.emplace_back(map(t[i]), map(t[j]), a * g[i].dot(k * g[j]));
      }
    }
  }
  return from_triplets(n, n, trip);
}

}  // namespace

bool SourceSpec::contains(const Point& p) const {
  if (whole_domain) return true;
  return std::hypot(p.x - center.x, p.y - center.y) <= radius;
}

void ProblemData::validate() const {
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  for (double w : {beta, beta_g, xi, xi_g, gamma, gamma_g}) {
    if (!(w >= 0.0)) throw ConfigError("regularization weights must be non-negative");
  }
  if (robin_sign != 1 && robin_sign != -1) throw ConfigError("robin_sign must be +1 or -1");
  if (!source.whole_domain && !(source.radius > 0.0)) throw ConfigError("source radius must be positive");
}

std::array<Eigen::Vector2d, 3> basis_gradients(const TriMesh& mesh, std::size_t e) {
  const auto p = mesh.corners(e);
  const double two_a = 2.0 * mesh.area(e);
  std::array<Eigen::Vector2d, 3> g;
  for (int i = 0; i < 3; ++i) {
    const auto& pj = p[(i + 1) % 3];
    const auto& pk = p[(i + 2) % 3];
    g[i] = Eigen::Vector2d(pj.y - pk.y, pk.x - pj.x) / two_a;
  }
  return g;
}

SparseMatrix assemble_mass(const TriMesh& mesh) {
  const auto all = all_elements(mesh);
  return assemble_mass(mesh, all);
}

SparseMatrix assemble_mass(const TriMesh& mesh, std::span<const std::size_t> elems) {
  return mass_on(mesh, elems, mesh.num_nodes(), [](int v) { return v; });
}

SparseMatrix assemble_stiffness(const TriMesh& mesh, double mu) {
  if (!(mu > 0.0)) throw AssemblyError("diffusivity must be positive");
  const auto all = all_elements(mesh);
  return stiffness_on(mesh, all, mesh.num_nodes(), [](int v) { return v; },
                      [mu](std::size_t) { return Matrix2(mu * Matrix2::Identity()); });
}

SparseMatrix assemble_stiffness(const TriMesh& mesh, std::span<const Matrix2> diffusivity) {
  if (diffusivity.size() != mesh.num_triangles()) {
    throw AssemblyError("one diffusivity matrix per triangle expected");
  }
  for (std::size_t e = 0; e < diffusivity.size(); ++e) {
    const auto& k = diffusivity[e];
    const double det = k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0);
    if (std::abs(k(0, 1) - k(1, 0)) > 1e-14 * k.norm() || !(k(0, 0) > 0.0) || !(det > 0.0)) {
      throw AssemblyError("diffusivity of triangle " + std::to_string(e) + " is not SPD");
    }
  }
  const auto all = all_elements(mesh);
  return stiffness_on(mesh, all, mesh.num_nodes(), [](int v) { return v; },
                      [&diffusivity](std::size_t e) { return diffusivity[e]; });
}

SparseMatrix assemble_robin(const TriMesh& mesh, BoundaryLabel label, int sign, double alpha) {
  Triplets trip;
  for (const auto& ed : mesh.boundary_edges()) {
    if (ed.label != label) continue;
    const auto& a = mesh.node(ed.nodes[0]);
    const auto& b = mesh.node(ed.nodes[1]);
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double c = sign * alpha * len / 6.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) trip.emplace_back(ed.nodes[i], ed.nodes[j], c * (i == j ? 2.0 : 1.0));
    }
  }
  if (trip.empty()) throw ConfigError("no boundary edges carry the Robin label");
  return from_triplets(mesh.num_nodes(), mesh.num_nodes(), trip);
}

Vector assemble_load(const TriMesh& mesh, const SourceSpec& source) {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    if (!source.contains(mesh.centroid(e))) continue;
    const double share = source.magnitude * mesh.area(e) / 3.0;
    for (int v : mesh.triangle(e)) f[v] += share;
  }
  return f;
}

namespace {

std::vector<int> control_index(const TriMesh& mesh, const RegionTags& tags) {
  std::vector<int> idx(mesh.num_nodes(), -1);
  for (std::size_t k = 0; k < tags.cloak_nodes.size(); ++k) {
    idx[static_cast<std::size_t>(tags.cloak_nodes[k])] = static_cast<int>(k);
  }
  return idx;
}

}  // namespace

SparseMatrix assemble_control_mass(const TriMesh& mesh, const RegionTags& tags) {
  const auto idx = control_index(mesh, tags);
  return mass_on(mesh, tags.cloak_elems, tags.cloak_nodes.size(),
                 [&idx](int v) { return idx[static_cast<std::size_t>(v)]; });
}

SparseMatrix assemble_control_stiffness(const TriMesh& mesh, const RegionTags& tags) {
  const auto idx = control_index(mesh, tags);
  return stiffness_on(mesh, tags.cloak_elems, tags.cloak_nodes.size(),
                      [&idx](int v) { return idx[static_cast<std::size_t>(v)]; },
                      [](std::size_t) { return Matrix2(Matrix2::Identity()); });
}

Matrix2 direction_matrix(Direction d) {
  Matrix2 m = Matrix2::Zero();
  switch (d) {
    case Direction::U:
      m(0, 0) = 1.0;
      break;
    case Direction::L:
      m(1, 1) = 1.0;
      break;
    case Direction::S:
      m(0, 1) = m(1, 0) = 1.0;
      break;
  }
  return m;
}

ControlTensor::ControlTensor(std::size_t n_state, std::vector<std::vector<Entry>> slices) : n_state_(n_state) {
  offsets_.reserve(slices.size() + 1);
  offsets_.push_back(0);
  for (auto& s : slices) {
    // Merge duplicate (row, col) pairs within the slice.
    std::sort(s.begin(), s.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (const auto& en : s) {
      if (en.row < 0 || en.col < 0 || static_cast<std::size_t>(en.row) >= n_state ||
          static_cast<std::size_t>(en.col) >= n_state) {
        throw AssemblyError("control tensor entry out of range");
      }
      if (entries_.size() > offsets_.back() && entries_.back().row == en.row && entries_.back().col == en.col) {
        entries_.back().value += en.value;
      } else {
        entries_.push_back(en);
      }
    }
    offsets_.push_back(entries_.size());
  }
}

SparseMatrix ControlTensor::slice(std::size_t k) const {
  Triplets trip;
  for (const auto& en : slice_entries(k)) trip.emplace_back(en.row, en.col, en.value);
  return from_triplets(n_state_, n_state_, trip);
}

void ControlTensor::contract_into(const Vector& ctrl, Triplets& out) const {
  if (static_cast<std::size_t>(ctrl.size()) != n_ctrl()) {
    throw InvalidArgument("contract: control vector has wrong length");
  }
  for (std::size_t k = 0; k < n_ctrl(); ++k) {
    const double c = ctrl[static_cast<Eigen::Index>(k)];
    if (c == 0.0) continue;
    for (const auto& en : slice_entries(k)) out.emplace_back(en.row, en.col, c * en.value);
  }
}

SparseMatrix ControlTensor::contract(const Vector& ctrl) const {
  Triplets trip;
  trip.reserve(entries_.size());
  contract_into(ctrl, trip);
  return from_triplets(n_state_, n_state_, trip);
}

Vector ControlTensor::contract_pair(const Vector& p, const Vector& q) const {
  if (static_cast<std::size_t>(p.size()) != n_state_ || static_cast<std::size_t>(q.size()) != n_state_) {
    throw InvalidArgument("contract_pair: state vectors have wrong length");
  }
  Vector g(static_cast<Eigen::Index>(n_ctrl()));
  for (std::size_t k = 0; k < n_ctrl(); ++k) {
    double sum = 0.0;
    for (const auto& en : slice_entries(k)) sum += en.value * p[en.row] * q[en.col];
    g[static_cast<Eigen::Index>(k)] = sum;
  }
  return g;
}

ControlTensor assemble_control_tensor(const TriMesh& mesh, const RegionTags& tags, Direction d) {
  const Matrix2 dm = direction_matrix(d);
  const auto idx = control_index(mesh, tags);
  std::vector<std::vector<ControlTensor::Entry>> slices(tags.cloak_nodes.size());
  for (std::size_t e : tags.cloak_elems) {
    check_element(mesh, e);
    const double a = mesh.area(e);
    const auto g = basis_gradients(mesh, e);
    const auto& t = mesh.triangle(e);
    for (int kk = 0; kk < 3; ++kk) {
      // int_T phi_k = |T| / 3; the gradient product is constant on T.
      auto& s = slices[static_cast<std::size_t>(idx[static_cast<std::size_t>(t[kk])])];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) s.push_back({t[i], t[j], a / 3.0 * g[i].dot(dm * g[j])});
      }
    }
  }
  return ControlTensor(mesh.num_nodes(), std::move(slices));
}

DirichletReduction::DirichletReduction(std::size_t n, std::vector<int> dirichlet_nodes)
    : n_(n), dirichlet_(std::move(dirichlet_nodes)) {
  std::sort(dirichlet_.begin(), dirichlet_.end());
  dirichlet_.erase(std::unique(dirichlet_.begin(), dirichlet_.end()), dirichlet_.end());
  std::vector<bool> fixed(n, false);
  for (int v : dirichlet_) {
    if (v < 0 || static_cast<std::size_t>(v) >= n) throw InvalidArgument("Dirichlet node out of range");
    fixed[static_cast<std::size_t>(v)] = true;
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!fixed[v]) free_.push_back(static_cast<int>(v));
  }
  Triplets tf, td;
  for (std::size_t i = 0; i < free_.size(); ++i) tf.emplace_back(static_cast<int>(i), free_[i], 1.0);
  for (std::size_t i = 0; i < dirichlet_.size(); ++i) td.emplace_back(static_cast<int>(i), dirichlet_[i], 1.0);
  select_free_ = from_triplets(free_.size(), n, tf);
  select_dirichlet_ = from_triplets(dirichlet_.size(), n, td);
}

SparseMatrix DirichletReduction::reduce(const SparseMatrix& a) const {
  SparseMatrix r = select_free_ * a * select_free_.transpose();
  r.makeCompressed();
  return r;
}

Vector DirichletReduction::lifting(const SparseMatrix& a, double value) const {
  if (dirichlet_.empty() || value == 0.0) return Vector::Zero(static_cast<Eigen::Index>(free_.size()));
  const Vector g = Vector::Constant(static_cast<Eigen::Index>(dirichlet_.size()), value);
  return -(select_free_ * (a * (select_dirichlet_.transpose() * g)));
}

Vector DirichletReduction::restrict_free(const Vector& full) const {
  if (static_cast<std::size_t>(full.size()) != n_) throw InvalidArgument("restrict_free: wrong length");
  Vector out(static_cast<Eigen::Index>(free_.size()));
  for (std::size_t i = 0; i < free_.size(); ++i) out[static_cast<Eigen::Index>(i)] = full[free_[i]];
  return out;
}

Vector DirichletReduction::expand(const Vector& free_values, double value) const {
  if (static_cast<std::size_t>(free_values.size()) != free_.size()) {
    throw InvalidArgument("expand: wrong length");
  }
  Vector out(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < free_.size(); ++i) out[free_[i]] = free_values[static_cast<Eigen::Index>(i)];
  for (int v : dirichlet_) out[v] = value;
  return out;
}

ReducedSystem apply_dirichlet(const SparseMatrix& a, const Vector& rhs, const DirichletReduction& red,
                              double value) {
  if (static_cast<std::size_t>(a.rows()) != red.size() || static_cast<std::size_t>(rhs.size()) != red.size()) {
    throw InvalidArgument("apply_dirichlet: size mismatch");
  }
  return {red.reduce(a), red.restrict_free(rhs) + red.lifting(a, value)};
}

}  // namespace cloakopt
