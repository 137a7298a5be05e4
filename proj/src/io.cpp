#include "cloakopt/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  return in;
}

/// Token reader that reports the line of the failure.
class Tokens {
 public:
  explicit Tokens(std::istream& in) {
    std::string line, w;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      std::istringstream s(line);
      while (s >> w) words_.emplace_back(w, n);
    }
  }

  std::string word() {
    if (next_ >= words_.size()) throw ParseError(line(), "unexpected end of file");
    return words_[next_++].first;
  }

  void expect(const std::string& w) {
    const auto got = word();
    if (got != w) throw ParseError(line(), "expected '" + w + "', got '" + got + "'");
  }

  double real() {
    const auto w = word();
    double x = 0.0;
    const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), x);
    if (ec != std::errc() || p != w.data() + w.size()) throw ParseError(line(), "expected a number, got '" + w + "'");
    return x;
  }

  long long integer() {
    const auto w = word();
    long long x = 0;
    const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), x);
    if (ec != std::errc() || p != w.data() + w.size()) throw ParseError(line(), "expected an integer, got '" + w + "'");
    return x;
  }

  std::size_t count() {
    const auto n = integer();
    if (n < 0) throw ParseError(line(), "negative count");
    return static_cast<std::size_t>(n);
  }

  int line() const {
    if (words_.empty()) return 0;
    return words_[std::min(next_ == 0 ? 0 : next_ - 1, words_.size() - 1)].second;
  }

 private:
  std::vector<std::pair<std::string, int>> words_;
  std::size_t next_ = 0;
};

TaggedMesh read_mesh_body(Tokens& t) {
  t.expect("nodes");
  const auto n = t.count();
  std::vector<Point> nodes(n);
  for (auto& p : nodes) {
    p.x = t.real();
    p.y = t.real();
  }
  t.expect("triangles");
  const auto m = t.count();
  std::vector<Triangle> tris(m);
  std::vector<Region> regions(m);
  for (std::size_t e = 0; e < m; ++e) {
    for (auto& v : tris[e]) v = static_cast<int>(t.integer());
    const auto r = t.integer();
    if (r < 0 || r > 3) throw ParseError(t.line(), "region tag must be 0..3");
    regions[e] = static_cast<Region>(r);
  }
  t.expect("edges");
  const auto b = t.count();
  std::vector<BoundaryEdge> edges(b);
  for (auto& ed : edges) {
    ed.nodes[0] = static_cast<int>(t.integer());
    ed.nodes[1] = static_cast<int>(t.integer());
    const auto l = t.integer();
    if (l != 1 && l != 2) throw ParseError(t.line(), "edge label must be 1 (outer) or 2 (obstacle)");
    ed.label = static_cast<BoundaryLabel>(l);
  }
  try {
    return {TriMesh(std::move(nodes), std::move(tris), std::move(edges)), std::move(regions)};
  } catch (const InvalidArgument& err) {
    throw ConfigError(std::string("invalid mesh: ") + err.what());
  }
}

}  // namespace

std::string format_double(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void write_mesh(std::ostream& out, const TriMesh& mesh, const std::vector<Region>& regions) {
  if (!regions.empty() && regions.size() != mesh.num_triangles()) {
    throw InvalidArgument("write_mesh: one region per triangle expected");
  }
  out << std::setprecision(17);
  out << "cloakopt-mesh 1\n";
  out << "nodes " << mesh.num_nodes() << '\n';
  for (const auto& p : mesh.nodes()) out << p.x << ' ' << p.y << '\n';
  out << "triangles " << mesh.num_triangles() << '\n';
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    const auto& t = mesh.triangle(e);
    out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << (regions.empty() ? 0 : static_cast<int>(regions[e])) << '\n';
  }
  out << "edges " << mesh.num_boundary_edges() << '\n';
  for (const auto& ed : mesh.boundary_edges()) {
    out << ed.nodes[0] << ' ' << ed.nodes[1] << ' ' << static_cast<int>(ed.label) << '\n';
  }
}

void write_mesh(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<Region>& regions) {
  auto out = open_out(path);
  write_mesh(out, mesh, regions);
}

TaggedMesh read_mesh(std::istream& in) {
  Tokens t(in);
  t.expect("cloakopt-mesh");
  if (t.integer() != 1) throw ParseError(t.line(), "unsupported mesh format version");
  return read_mesh_body(t);
}

TaggedMesh read_mesh(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_mesh(in);
}

void write_design(const std::filesystem::path& path, const Design& design) {
  if (design.controls.size() != design.times.size()) throw InvalidArgument("write_design: one time per slice expected");
  for (const auto& c : design.controls) {
    if (c.size() != design.control_nodes.size()) throw InvalidArgument("write_design: slice size mismatch");
  }
  auto out = open_out(path);
  write_mesh(out, design.mesh.mesh, design.mesh.regions);
  out << "design mu " << design.mu << " slices " << design.controls.size() << " nodes " << design.control_nodes.size()
      << '\n';
  for (std::size_t s = 0; s < design.controls.size(); ++s) {
    const auto& c = design.controls[s];
    out << "slice " << s << ' ' << design.times[s] << '\n';
    for (std::size_t k = 0; k < design.control_nodes.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      out << design.control_nodes[k] << ' ' << c.u[i] << ' ' << c.f[i] << ' ' << c.v[i] << '\n';
    }
  }
}

Design read_design(const std::filesystem::path& path) {
  auto in = open_in(path);
  Tokens t(in);
  t.expect("cloakopt-mesh");
  if (t.integer() != 1) throw ParseError(t.line(), "unsupported mesh format version");
  Design d;
  d.mesh = read_mesh_body(t);
  t.expect("design");
  t.expect("mu");
  d.mu = t.real();
  t.expect("slices");
  const auto slices = t.count();
  t.expect("nodes");
  const auto nodes = t.count();
  d.times.resize(slices);
  d.controls.assign(slices, ControlField::zeros(nodes));
  d.control_nodes.resize(nodes);
  for (std::size_t s = 0; s < slices; ++s) {
    t.expect("slice");
    if (t.count() != s) throw ParseError(t.line(), "slices must be listed in order");
    d.times[s] = t.real();
    auto& c = d.controls[s];
    for (std::size_t k = 0; k < nodes; ++k) {
      const auto node = static_cast<int>(t.integer());
      if (node < 0 || static_cast<std::size_t>(node) >= d.mesh.mesh.num_nodes()) {
        throw ParseError(t.line(), "control node outside the mesh");
      }
      if (s == 0) {
        d.control_nodes[k] = node;
      } else if (d.control_nodes[k] != node) {
        throw ParseError(t.line(), "control nodes differ between slices");
      }
      const auto i = static_cast<Eigen::Index>(k);
      c.u[i] = t.real();
      c.f[i] = t.real();
      c.v[i] = t.real();
    }
  }
  return d;
}

void write_vtk(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<NamedField>& point_data,
               const std::vector<Region>& regions) {
  for (const auto& [name, values] : point_data) {
    if (values.size() != mesh.num_nodes()) throw InvalidArgument("write_vtk: field '" + name + "' has the wrong size");
  }
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\ncloakopt\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes()) out << p.x << ' ' << p.y << " 0\n";
  out << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) out << "5\n";
  if (!regions.empty()) {
    out << "CELL_DATA " << mesh.num_triangles() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
    for (auto r : regions) out << static_cast<int>(r) << '\n';
  }
  if (!point_data.empty()) {
    out << "POINT_DATA " << mesh.num_nodes() << '\n';
    for (const auto& [name, values] : point_data) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) out << v << '\n';
    }
  }
}

void write_csv(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<NamedField>& fields) {
  for (const auto& [name, values] : fields) {
    if (values.size() != mesh.num_nodes()) throw InvalidArgument("write_csv: field '" + name + "' has the wrong size");
  }
  auto out = open_out(path);
  out << "index,x,y";
  for (const auto& f : fields) out << ',' << f.first;
  out << '\n';
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto& p = mesh.nodes()[i];
    out << i << ',' << p.x << ',' << p.y;
    for (const auto& f : fields) out << ',' << f.second[i];
    out << '\n';
  }
}

void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& m) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
  }
}

void Report::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos) throw InvalidArgument("bad report key: " + key);
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void Report::set(const std::string& key, double value) { set(key, format_double(value)); }

void Report::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

std::string Report::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return {};
}

double Report::number(const std::string& key) const {
  const auto v = get(key);
  if (v.empty()) throw InvalidArgument("report has no key '" + key + "'");
  return std::stod(v);
}

void Report::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

void Report::write(const std::filesystem::path& path) const {
  auto out = open_out(path);
  write(out);
}

Report Report::read(const std::filesystem::path& path) {
  auto in = open_in(path);
  Report r;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(n, "expected key=value");
    r.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return r;
}

}  // namespace cloakopt
