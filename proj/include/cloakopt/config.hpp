#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cloakopt/assembly.hpp"
#include "cloakopt/forward.hpp"
#include "cloakopt/optimizer.hpp"
#include "cloakopt/regions.hpp"

namespace cloakopt {

enum class MeshSource { generate, file };
enum class RegionSource { geometry, mesh };
enum class Regime { steady, transient };

/// Everything a CLI command needs. Defaults reproduce the circular steady
/// layout with the parameter set of the original study.
struct ScenarioConfig {
  MeshSource mesh_source = MeshSource::generate;
  std::filesystem::path mesh_path;
  double side = 4.0;
  double h_max = 0.1;
  /// `mesh`: use the region column of the mesh file instead of the geometry.
  RegionSource regions = RegionSource::geometry;
  GeometrySpec geometry{DiskShape{{0.0, 0.04}, 0.59}, 0.39, 0.0};

  ProblemData data = default_data();

  Regime regime = Regime::steady;
  TimeGrid grid;

  OptimizeOptions optimizer = default_optimizer();
  /// Constant initial guess of the optimizer.
  double init_u = 0.0, init_f = 0.0, init_v = 0.0;

  /// Finite-difference audit.
  int audit_coordinates = 10;
  double audit_step = 1e-5;
  double audit_tolerance = 1e-5;

  /// Uniform refinements applied by `transfer`.
  int transfer_levels = 1;
  bool transfer_reoptimize = false;

  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  static ProblemData default_data();
  static OptimizeOptions default_optimizer();
};

/// Parses the `key = value` grammar documented in the README. Lines are
/// trimmed, `#` starts a comment, keys may appear at most once. Relative
/// paths are resolved against `base_dir`.
/// Throws ParseError (with the offending line) or ConfigError.
ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Reads and parses a file; relative paths inside resolve against its folder.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Range and consistency checks shared by parse_config and programmatic
/// construction. Throws ConfigError.
void validate(const ScenarioConfig& cfg);

}  // namespace cloakopt
