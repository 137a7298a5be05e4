#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "cloakopt/errors.hpp"
#include "cloakopt/linear_solver.hpp"
#include "helpers.hpp"

using namespace cloakopt;
using testing::integrate;

namespace {

TriMesh unit_right_triangle() {
  return TriMesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}},
                 {{{0, 1}, BoundaryLabel::outer}, {{1, 2}, BoundaryLabel::outer}, {{2, 0}, BoundaryLabel::outer}});
}

// Gradients of the barycentric coordinates from the inverse Jacobian.
std::array<Eigen::Vector2d, 3> oracle_gradients(const TriMesh& m, std::size_t e) {
  const auto p = m.corners(e);
  Eigen::Matrix2d j;
  j << p[1].x - p[0].x, p[2].x - p[0].x, p[1].y - p[0].y, p[2].y - p[0].y;
  const Eigen::Matrix2d jit = j.inverse().transpose();
  const Eigen::Vector2d g1 = jit * Eigen::Vector2d(1, 0), g2 = jit * Eigen::Vector2d(0, 1);
  return {-g1 - g2, g1, g2};
}

// Dense oracle of int_{elems} w(x) phi_a phi_b (mass) on the whole mesh.
Eigen::MatrixXd mass_oracle(const TriMesh& m) {
  const auto n = static_cast<Eigen::Index>(m.num_nodes());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < m.num_triangles(); ++e) {
    const auto& t = m.triangle(e);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        out(t[a], t[b]) += integrate(m, e, [&](double, double, const std::array<double, 3>& l) { return l[a] * l[b]; });
      }
    }
  }
  return out;
}

RegionTags disk_tags(const TriMesh& m) {
  return tag_regions(m, GeometrySpec{DiskShape{{0.0, 0.0}, 0.3}, 0.3, 0.0});
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("assembly") {

TEST_CASE("local mass matrix") {
  const Eigen::MatrixXd m = assemble_mass(unit_right_triangle());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(m(i, j) == doctest::Approx(i == j ? 1.0 / 12 : 1.0 / 24).epsilon(1e-15));
  }
}

TEST_CASE("mass sums to area and is SPD") {
  auto mesh = testing::jittered_mesh(7, 2.0, 0.3, 5);
  const SparseMatrix m = assemble_mass(mesh);
  CHECK(Eigen::MatrixXd(m).sum() == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(max_abs(Eigen::MatrixXd(m) - Eigen::MatrixXd(m).transpose()) <= 1e-15);
  Eigen::SimplicialLLT<SparseMatrix> llt(m);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("assemblers agree with high-order quadrature on random meshes") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    auto mesh = testing::jittered_mesh(5 + static_cast<int>(seed % 3), 2.0, 0.3, seed);
    const auto n = static_cast<Eigen::Index>(mesh.num_nodes());

    const Eigen::MatrixXd m = assemble_mass(mesh);
    const Eigen::MatrixXd mo = mass_oracle(mesh);
    CHECK(max_abs(m - mo) <= 1e-12 * max_abs(mo));

    // Anisotropic stiffness with a different constant SPD matrix per element.
    std::vector<Matrix2> kd(mesh.num_triangles());
    Eigen::MatrixXd ko = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
      const double s = 0.1 * static_cast<double>(e % 7);
      kd[e] << 1.0 + s, 0.2 * s, 0.2 * s, 2.0 - s;
      const auto g = oracle_gradients(mesh, e);
      const auto& t = mesh.triangle(e);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          ko(t[a], t[b]) += integrate(mesh, e, [&](double, double, const auto&) { return g[a].dot(kd[e] * g[b]); });
        }
      }
    }
    const Eigen::MatrixXd k = assemble_stiffness(mesh, kd);
    CHECK(max_abs(k - ko) <= 1e-12 * max_abs(ko));

    // Load on a disk support.
    SourceSpec src{{0.3, -0.2}, 0.45, 100.0, false};
    const Vector f = assemble_load(mesh, src);
    Vector fo = Vector::Zero(n);
    for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
      if (!src.contains(mesh.centroid(e))) continue;
      const auto& t = mesh.triangle(e);
      for (int a = 0; a < 3; ++a) {
        fo[t[a]] += integrate(mesh, e, [&](double, double, const auto& l) { return 100.0 * l[a]; });
      }
    }
    CHECK((f - fo).cwiseAbs().maxCoeff() <= 1e-12 * fo.cwiseAbs().maxCoeff());

    // Control tensor slices: int phi_k D grad phi_i . grad phi_j.
    auto tags = disk_tags(mesh);
    for (auto d : {Direction::U, Direction::L, Direction::S}) {
      const auto b = assemble_control_tensor(mesh, tags, d);
      const Matrix2 dm = direction_matrix(d);
      for (std::size_t k = 0; k < b.n_ctrl(); k += 3) {
        const int node = tags.cloak_nodes[k];
        Eigen::MatrixXd so = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t e : tags.cloak_elems) {
          const auto& t = mesh.triangle(e);
          const int loc = static_cast<int>(std::find(t.begin(), t.end(), node) - t.begin());
          if (loc == 3) continue;
          const auto g = oracle_gradients(mesh, e);
          for (int a = 0; a < 3; ++a) {
            for (int c = 0; c < 3; ++c) {
              so(t[a], t[c]) +=
                  integrate(mesh, e, [&](double, double, const auto& l) { return l[loc] * g[a].dot(dm * g[c]); });
            }
          }
        }
        const Eigen::MatrixXd s = b.slice(k);
        CHECK(max_abs(s - so) <= 1e-12 * max_abs(so));
        CHECK(max_abs(s - s.transpose()) == 0.0);
      }
    }
  }
}

TEST_CASE("stiffness kernel and linearity") {
  auto mesh = testing::jittered_mesh(6, 2.0, 0.2, 9);
  const SparseMatrix a1 = assemble_stiffness(mesh, 1.0);
  const SparseMatrix a2 = assemble_stiffness(mesh, 2.0);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(mesh.num_nodes()));
  CHECK((a1 * ones).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(testing::max_abs_diff(a2, 2.0 * a1) <= 1e-14);
  // Positive semidefinite: smallest eigenvalue is zero up to roundoff.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(a1)};
  CHECK(es.eigenvalues()[0] >= -1e-12);
  CHECK(std::abs(es.eigenvalues()[0]) <= 1e-12);
  CHECK(es.eigenvalues()[1] > 1e-3);
}

TEST_CASE("anisotropic local stiffness by hand") {
  // K = diag(2, 1) on the unit right triangle; grad phi = (-1,-1), (1,0), (0,1).
  Matrix2 k;
  k << 2, 0, 0, 1;
  std::vector<Matrix2> kd{k};
  const Eigen::MatrixXd a = assemble_stiffness(unit_right_triangle(), kd);
  Eigen::Matrix3d expect;
  expect << 1.5, -1.0, -0.5, -1.0, 1.0, 0.0, -0.5, 0.0, 0.5;
  CHECK(max_abs(a - expect) <= 1e-15);
}

TEST_CASE("invalid diffusivity is an assembly error") {
  Matrix2 k;
  k << 1, 2, 2, 1;
  std::vector<Matrix2> kd{k};
  CHECK_THROWS_AS(assemble_stiffness(unit_right_triangle(), kd), AssemblyError);
  CHECK_THROWS_AS(assemble_stiffness(unit_right_triangle(), std::vector<Matrix2>{}), AssemblyError);
  CHECK_THROWS_AS(assemble_stiffness(unit_right_triangle(), 0.0), AssemblyError);
}

TEST_CASE("robin boundary matrix") {
  const TriMesh edge({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {{{0, 1}, BoundaryLabel::outer}});
  const Eigen::MatrixXd r = assemble_robin(edge, BoundaryLabel::outer, +1);
  CHECK(r(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(r(1, 1) == doctest::Approx(1.0 / 3));
  CHECK(r(0, 1) == doctest::Approx(1.0 / 6));
  CHECK(r(2, 2) == 0.0);
  const Eigen::MatrixXd rm = assemble_robin(edge, BoundaryLabel::outer, -1);
  CHECK(max_abs(rm + r) == 0.0);

  auto square = build_square_mesh(2.0, 0.25);
  const Eigen::MatrixXd rs = assemble_robin(square, BoundaryLabel::outer, +1, 1.0);
  CHECK(rs.trace() == doctest::Approx(2.0 / 3.0 * 8.0).epsilon(1e-13));
  const Eigen::MatrixXd rs2 = assemble_robin(square, BoundaryLabel::outer, -1, 2.5);
  CHECK(rs2.trace() == doctest::Approx(-2.5 * 2.0 / 3.0 * 8.0).epsilon(1e-13));
  // Boundary mass of the constant one is the perimeter.
  CHECK(rs.sum() == doctest::Approx(8.0).epsilon(1e-13));

  // Two-point Gauss oracle on a jittered mesh with a quadratic trace.
  auto mesh = testing::jittered_mesh(5, 2.0, 0.3, 17);
  const SparseMatrix rj = assemble_robin(mesh, BoundaryLabel::outer, +1, 1.0);
  Vector w(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto& p = mesh.node(static_cast<int>(i));
    w[static_cast<Eigen::Index>(i)] = 1.0 + p.x - 0.5 * p.y;
  }
  double oracle = 0.0;
  const double g = 0.5 / std::sqrt(3.0);
  for (const auto& ed : mesh.boundary_edges()) {
    const auto& a = mesh.node(ed.nodes[0]);
    const auto& b = mesh.node(ed.nodes[1]);
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    for (double s : {0.5 - g, 0.5 + g}) {
      const double val = (1 - s) * w[ed.nodes[0]] + s * w[ed.nodes[1]];
      oracle += 0.5 * len * val * val;
    }
  }
  CHECK(w.dot(rj * w) == doctest::Approx(oracle).epsilon(1e-13));

  CHECK_THROWS_AS(assemble_robin(square, BoundaryLabel::obstacle, +1), ConfigError);
}

TEST_CASE("load examples") {
  auto mesh = build_square_mesh(0.2, 0.05);
  SourceSpec zero{{0, 0}, 1.0, 0.0, true};
  CHECK(assemble_load(mesh, zero).cwiseAbs().maxCoeff() == 0.0);
  SourceSpec whole{{0, 0}, 1.0, 100.0, true};
  CHECK(assemble_load(mesh, whole).sum() == doctest::Approx(4.0).epsilon(1e-13));
}

TEST_CASE("control tensor contractions") {
  auto mesh = build_square_mesh(2.0, 0.2);
  auto tags = disk_tags(mesh);
  const auto bu = assemble_control_tensor(mesh, tags, Direction::U);
  const auto bl = assemble_control_tensor(mesh, tags, Direction::L);
  const auto bs = assemble_control_tensor(mesh, tags, Direction::S);
  const auto nk = static_cast<Eigen::Index>(bu.n_ctrl());
  REQUIRE(bu.n_ctrl() == tags.cloak_nodes.size());

  CHECK(bu.contract(Vector::Zero(nk)).norm() == 0.0);

  // U + L = I: unit controls give the cloak stiffness with unit diffusivity.
  const SparseMatrix iso = bu.contract(Vector::Ones(nk)) + bl.contract(Vector::Ones(nk));
  std::vector<Matrix2> kd(mesh.num_triangles(), Matrix2::Identity());
  for (auto e : tags.cloak_elems) kd[e] = 2.0 * Matrix2::Identity();
  CHECK(testing::max_abs_diff(iso + assemble_stiffness(mesh, 1.0), assemble_stiffness(mesh, kd)) <= 1e-13);

  // Linearity.
  const Vector x = testing::random_vector(nk, 1), y = testing::random_vector(nk, 2);
  CHECK(testing::max_abs_diff(bs.contract(2.0 * x - 3.0 * y), 2.0 * bs.contract(x) - 3.0 * bs.contract(y)) <= 1e-13);
  CHECK_THROWS_AS(bs.contract(Vector::Zero(nk + 1)), InvalidArgument);

  // contract(B_u, 1) + A(mu) equals the stiffness with K = diag(mu + 1, mu) on the cloak.
  const double mu = 1.0;
  std::vector<Matrix2> ku(mesh.num_triangles(), Matrix2::Identity() * mu);
  for (auto e : tags.cloak_elems) ku[e] << mu + 1.0, 0.0, 0.0, mu;
  CHECK(testing::max_abs_diff(bu.contract(Vector::Ones(nk)) + assemble_stiffness(mesh, mu), assemble_stiffness(mesh, ku)) <=
        1e-13);

  // Random controls: per-element K from the nodal average.
  const auto c = testing::random_controls(bu.n_ctrl(), 8);
  std::vector<Matrix2> kr(mesh.num_triangles(), Matrix2::Identity() * mu);
  std::vector<int> local(mesh.num_nodes(), -1);
  for (std::size_t k = 0; k < tags.cloak_nodes.size(); ++k) local[static_cast<std::size_t>(tags.cloak_nodes[k])] = static_cast<int>(k);
  for (auto e : tags.cloak_elems) {
    Matrix2 avg = Matrix2::Zero();
    for (int v : mesh.triangle(e)) {
      const int k = local[static_cast<std::size_t>(v)];
      Matrix2 kn;
      kn << c.u[k], c.v[k], c.v[k], c.f[k];
      avg += kn / 3.0;
    }
    kr[e] += avg;
  }
  const SparseMatrix sum = bu.contract(c.u) + bl.contract(c.f) + bs.contract(c.v) + assemble_stiffness(mesh, mu);
  CHECK(testing::max_abs_diff(sum, assemble_stiffness(mesh, kr)) <= 1e-12);

  // contract_pair is the k-major transpose layout of the contraction.
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  const Vector p = testing::random_vector(n, 3), q = testing::random_vector(n, 4);
  const Vector g = bs.contract_pair(p, q);
  const Vector h = testing::random_vector(nk, 5);
  CHECK(g.dot(h) == doctest::Approx(p.dot(bs.contract(h) * q)).epsilon(1e-12));

  // Entries touch cloak elements only.
  std::vector<bool> cloak_node(mesh.num_nodes(), false);
  for (int v : tags.cloak_nodes) cloak_node[static_cast<std::size_t>(v)] = true;
  for (std::size_t k = 0; k < bu.n_ctrl(); ++k) {
    for (const auto& en : bu.slice_entries(k)) {
      CHECK(cloak_node[static_cast<std::size_t>(en.row)]);
      CHECK(cloak_node[static_cast<std::size_t>(en.col)]);
    }
  }
}

TEST_CASE("single cloak triangle, direction S") {
  auto mesh = unit_right_triangle();
  auto tags = RegionTags::from_regions(mesh, {Region::cloak});
  const auto bs = assemble_control_tensor(mesh, tags, Direction::S);
  // grad phi = (-1,-1), (1,0), (0,1); S g_j = (g_j.y, g_j.x); area / 3 = 1/6.
  Eigen::Matrix3d expect;
  expect << 2, -1, -1, -1, 0, 1, -1, 1, 0;
  expect /= 6.0;
  for (std::size_t k = 0; k < 3; ++k) CHECK(max_abs(Eigen::MatrixXd(bs.slice(k)) - expect) <= 1e-15);
}

TEST_CASE("dirichlet elimination reproduces a linear field") {
  // 2 x 1 strip of cells; u = 5 on the left edge, unit outward flux on the
  // right edge. The exact solution 5 + (x - x_left) is P1.
  const TriMesh strip({{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}},
                      {{0, 1, 4}, {0, 4, 3}, {1, 2, 5}, {1, 5, 4}},
                      {{{0, 1}, BoundaryLabel::outer},
                       {{1, 2}, BoundaryLabel::outer},
                       {{2, 5}, BoundaryLabel::obstacle},
                       {{5, 4}, BoundaryLabel::outer},
                       {{4, 3}, BoundaryLabel::outer},
                       {{3, 0}, BoundaryLabel::outer}});
  const SparseMatrix a = assemble_stiffness(strip, 1.0);
  Vector rhs = Vector::Zero(6);
  rhs[2] = 0.5;
  rhs[5] = 0.5;
  const DirichletReduction red(6, {0, 3});
  const auto sys = apply_dirichlet(a, rhs, red, 5.0);
  const SymmetricSolver solver(sys.matrix);
  const Vector u = red.expand(solver.solve(sys.rhs), 5.0);
  for (int i = 0; i < 6; ++i) CHECK(u[i] == doctest::Approx(5.0 + strip.node(i).x).epsilon(1e-13));

  // T_o = 0: pure deletion.
  const auto zero = apply_dirichlet(a, rhs, red, 0.0);
  CHECK((zero.rhs - red.restrict_free(rhs)).norm() == 0.0);
  CHECK(testing::max_abs_diff(zero.matrix, red.reduce(a)) == 0.0);
}

TEST_CASE("elimination matches a penalty solve") {
  auto mesh = build_square_mesh(2.0, 0.1);
  auto tags = disk_tags(mesh);
  auto dom = mask_obstacle(mesh, tags);
  const SparseMatrix s =
      assemble_stiffness(dom.mesh, 1.0) + assemble_robin(dom.mesh, BoundaryLabel::outer, +1, 1.0);
  const Vector f = assemble_load(dom.mesh, SourceSpec{{0.7, 0.0}, 0.2, 100.0, false});
  for (double to : {0.0, 3.0}) {
    CAPTURE(to);
    const DirichletReduction red(dom.mesh.num_nodes(), dom.dirichlet_nodes);
    const auto sys = apply_dirichlet(s, f, red, to);
    const Vector q = red.expand(SymmetricSolver(sys.matrix).solve(sys.rhs), to);

    SparseMatrix pen = s;
    Vector fp = f;
    const double big = 1e12;
    for (int v : dom.dirichlet_nodes) {
      pen.coeffRef(v, v) += big;
      fp[v] += big * to;
    }
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(pen);
    const Vector qp = ldlt.solve(fp);
    CHECK((q - qp).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, q.cwiseAbs().maxCoeff()));
  }
}

}  // TEST_SUITE
