#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cloakopt/assembly.hpp"
#include "cloakopt/control.hpp"
#include "cloakopt/forward.hpp"
#include "cloakopt/mesh.hpp"
#include "cloakopt/regions.hpp"

namespace cloakopt {

/// Mesh with an optional region tag per triangle (all exterior when absent).
struct TaggedMesh {
  TriMesh mesh;
  std::vector<Region> regions;
};

/// ASCII mesh format, 0-based indices, coordinates with 17 significant digits:
///
///   cloakopt-mesh 1
///   nodes <n>
///   <x> <y>                 (n lines)
///   triangles <m>
///   <i> <j> <k> <region>    (m lines)
///   edges <b>
///   <i> <j> <label>         (b lines)
void write_mesh(std::ostream& out, const TriMesh& mesh, const std::vector<Region>& regions = {});
void write_mesh(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<Region>& regions = {});
TaggedMesh read_mesh(std::istream& in);
TaggedMesh read_mesh(const std::filesystem::path& path);

/// An optimized design: the reference mesh it lives on, the control nodes
/// (reference-mesh indices) and one control slice per time node.
struct Design {
  TaggedMesh mesh;
  double mu = 1.0;
  std::vector<int> control_nodes;
  std::vector<double> times;
  ControlTrajectory controls;
};

/// Mesh sections followed by
///
///   design mu <mu> slices <s> nodes <k>
///   slice <index> <time>
///   <reference node> <u> <f> <v>   (k lines per slice)
void write_design(const std::filesystem::path& path, const Design& design);
Design read_design(const std::filesystem::path& path);

/// Named nodal field for the VTK and CSV writers.
using NamedField = std::pair<std::string, std::vector<double>>;

std::vector<double> to_std(const Vector& v);

/// Legacy ASCII VTK unstructured grid with point data and an optional
/// `region` cell field.
void write_vtk(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<NamedField>& point_data,
               const std::vector<Region>& regions = {});

/// One row per node: index, x, y, then one column per field.
void write_csv(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<NamedField>& fields);

/// Sparse matrix as `%%MatrixMarket matrix coordinate real general`, 1-based.
void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& m);

/// Line-oriented `key=value` report, written in insertion order.
class Report {
 public:
  void set(const std::string& key, double value);
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, std::size_t value) { set(key, static_cast<long long>(value)); }
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  /// Value of a key, or an empty string.
  std::string get(const std::string& key) const;
  double number(const std::string& key) const;

  void write(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;
  static Report read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest decimal text that round-trips a double (17 significant digits).
std::string format_double(double x);

}  // namespace cloakopt
